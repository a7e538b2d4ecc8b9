#include "vcdf/mvn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/special_functions/owens_t.hpp>

#include "vcdf/rng.hpp"

namespace vcdf
{
namespace
{
constexpr double inf = std::numeric_limits<double>::infinity();
constexpr double ln2 = std::numbers::ln2;

//! First primes, enough for lattice generators in any supported dimension.
std::vector<std::uint32_t> const& small_primes()
{
    static std::vector<std::uint32_t> const primes = [] {
        constexpr std::uint32_t limit = 300000;
        std::vector<bool> composite(limit + 1, false);
        std::vector<std::uint32_t> result;
        for (std::uint32_t i = 2; i <= limit; ++i)
        {
            if (composite[i])
                continue;
            result.push_back(i);
            for (std::uint64_t j = std::uint64_t{i} * i; j <= limit; j += i)
                composite[j] = true;
        }
        return result;
    }();
    return primes;
}

double frac(double x)
{
    return x - std::floor(x);
}

//! Running log(sum(exp(.))) that stays in linear space while it can.
class LogSumAccumulator
{
  public:
    void add_linear(double v) { linear_ += v; }

    void add_log(double lv)
    {
        if (lv == -inf)
            return;
        if (lv > max_)
        {
            scaled_ = scaled_ * std::exp(max_ - lv) + 1.0;
            max_ = lv;
        }
        else
        {
            scaled_ += std::exp(lv - max_);
        }
    }

    double log_total() const
    {
        double a = linear_ > 0 ? std::log(linear_) : -inf;
        double b = scaled_ > 0 ? max_ + std::log(scaled_) : -inf;
        if (a == -inf)
            return b;
        if (b == -inf)
            return a;
        double hi = std::max(a, b);
        return hi + std::log1p(std::exp(std::min(a, b) - hi));
    }

  private:
    double linear_ = 0;
    double max_ = -inf;
    double scaled_ = 0;
};

}  // namespace

//---------------------------------------------------------------------------//
double std_normal_cdf(double x)
{
    return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2);
}

double std_normal_log_pdf(double x)
{
    return -0.5 * x * x - 0.5 * std::log(2 * std::numbers::pi);
}

double std_bvn_cdf_diagonal(double h, double corr)
{
    if (!(corr >= -1 && corr <= 1))
        throw std::invalid_argument("correlation must lie in [-1, 1]");
    if (h == -inf)
        return 0;
    if (h == inf)
        return 1;
    if (corr == 1)
        return std_normal_cdf(h);
    if (corr == -1)
        return std::max(0.0, 2 * std_normal_cdf(h) - 1);
    double const a = std::sqrt((1 - corr) / (1 + corr));
    return std::max(0.0, std_normal_cdf(h) - 2 * boost::math::owens_t(h, a));
}

double std_normal_quantile(double p)
{
    if (!(p > 0))
        return p == 0 ? -inf : std::numeric_limits<double>::quiet_NaN();
    if (!(p < 1))
        return p == 1 ? inf : std::numeric_limits<double>::quiet_NaN();

    double const q = p - 0.5;
    if (std::fabs(q) <= 0.425)
    {
        double const r = 0.180625 - q * q;
        return q
               * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
                       + 67265.770927008700853)
                          * r
                      + 45921.953931549871457)
                         * r
                     + 13731.693765509461125)
                        * r
                    + 1971.5909503065514427)
                       * r
                   + 133.14166789178437745)
                      * r
                  + 3.387132872796366608)
               / (((((((r * 5226.495278852545925 + 28729.085735721942674) * r
                       + 39307.89580009271061)
                          * r
                      + 21213.794301586595867)
                         * r
                     + 5394.1960214247511077)
                        * r
                    + 687.1870074920579083)
                       * r
                   + 42.313330701600911252)
                      * r
                  + 1.0);
    }

    double r = std::sqrt(-std::log(q < 0 ? p : 1 - p));
    double val;
    if (r <= 5)
    {
        r -= 1.6;
        val = (((((((r * 7.7454501427834140764e-4 + .0227238449892691845833) * r
                    + .24178072517745061177)
                       * r
                   + 1.27045825245236838258)
                      * r
                  + 3.64784832476320460504)
                     * r
                 + 5.7694972214606914055)
                    * r
                + 4.6303378461565452959)
                   * r
               + 1.42343711074968357734)
              / (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4)
                          * r
                      + .0151986665636164571966)
                         * r
                     + .14810397642748007459)
                        * r
                    + .68976733498510000455)
                       * r
                   + 1.6763848301838038494)
                      * r
                  + 2.05319162663775882187)
                     * r
                 + 1.0);
    }
    else
    {
        r -= 5;
        val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5)
                        * r
                    + .0012426609473880784386)
                       * r
                   + .026532189526576123093)
                      * r
                  + .29656057182850489123)
                     * r
                 + 1.7848265399172913358)
                    * r
                + 5.4637849111641143699)
                   * r
               + 6.6579046435011037772)
              / (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7)
                          * r
                      + 1.8463183175100546818e-5)
                         * r
                     + 7.868691311456132591e-4)
                        * r
                    + .0148753612908506148525)
                       * r
                   + .13692988092273580531)
                      * r
                  + .59983220655588793769)
                     * r
                 + 1.0);
    }
    return q < 0 ? -val : val;
}

bool is_prime(std::uint64_t n)
{
    if (n < 2)
        return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
    {
        if (n % d == 0)
            return false;
    }
    return true;
}

//---------------------------------------------------------------------------//
Eigen::MatrixXd cholesky(Eigen::MatrixXd const& sigma)
{
    if (sigma.rows() != sigma.cols())
        throw std::invalid_argument("cholesky needs a square matrix");
    if (sigma.rows() == 0)
        return sigma;

    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("covariance matrix is not positive definite");

    Eigen::MatrixXd l = llt.matrixL();
    double const scale = std::max(1.0, sigma.diagonal().maxCoeff());
    for (Eigen::Index i = 0; i < l.rows(); ++i)
    {
        if (!(l(i, i) * l(i, i) > 1e-12 * scale))
        {
            throw NotPositiveDefinite("cholesky pivot " + std::to_string(i)
                                      + " below tolerance (duplicate or "
                                        "colinear locations?)");
        }
    }
    return l;
}

double mvn_logpdf_chol(Eigen::VectorXd const& x, Eigen::MatrixXd const& chol)
{
    Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(x);
    double const n = static_cast<double>(x.size());
    return -0.5 * n * std::log(2 * std::numbers::pi)
           - chol.diagonal().array().log().sum() - 0.5 * z.squaredNorm();
}

double mvn_logpdf(Eigen::VectorXd const& x,
                  Eigen::VectorXd const& mu,
                  Eigen::MatrixXd const& sigma)
{
    if (x.size() != mu.size() || x.size() != sigma.rows())
        throw std::invalid_argument("mvn_logpdf dimension mismatch");
    return mvn_logpdf_chol(x - mu, cholesky(sigma));
}

ConditionalGaussian conditional_gaussian(Eigen::MatrixXd const& sigma,
                                         std::span<std::size_t const> cond_idx,
                                         std::span<std::size_t const> free_idx,
                                         Eigen::VectorXd const& cond_values)
{
    auto const nc = static_cast<Eigen::Index>(cond_idx.size());
    auto const nf = static_cast<Eigen::Index>(free_idx.size());
    if (cond_values.size() != nc)
        throw std::invalid_argument("conditioning values size mismatch");

    std::vector<Eigen::Index> cidx(cond_idx.begin(), cond_idx.end());
    std::vector<Eigen::Index> fidx(free_idx.begin(), free_idx.end());
    for (auto f : fidx)
    {
        if (std::find(cidx.begin(), cidx.end(), f) != cidx.end())
            throw std::invalid_argument("free and conditioning sets overlap");
    }

    ConditionalGaussian result;
    result.cov = sigma(fidx, fidx);
    result.mean = Eigen::VectorXd::Zero(nf);
    if (nc == 0)
        return result;

    Eigen::MatrixXd l = cholesky(sigma(cidx, cidx));
    // Whitened cross-covariance: L^{-1} Sigma_{cond,free}
    Eigen::MatrixXd w
        = l.triangularView<Eigen::Lower>().solve(sigma(cidx, fidx).eval());
    Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(cond_values);
    result.mean = w.transpose() * z;
    result.cov.noalias() -= w.transpose() * w;
    return result;
}

//---------------------------------------------------------------------------//
void QmcConfig::validate() const
{
    if (!is_prime(n_points))
    {
        throw std::invalid_argument("QMC point count must be prime, got "
                                    + std::to_string(n_points));
    }
    if (n_shifts < 2)
        throw std::invalid_argument("QMC needs at least two random shifts");
}

QmcProblem::QmcProblem(Eigen::VectorXd const& upper,
                       Eigen::MatrixXd const& sigma)
{
    auto const d = upper.size();
    if (d < 1 || sigma.rows() != d || sigma.cols() != d)
        throw std::invalid_argument("QMC CDF dimension mismatch");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<double> standardized(order.size());
    for (Eigen::Index i = 0; i < d; ++i)
    {
        if (upper[i] == -inf)
            degenerate_ = true;
        if (std::isnan(upper[i]))
            throw std::invalid_argument("QMC CDF bound is NaN");
        standardized[static_cast<std::size_t>(i)]
            = upper[i] / std::sqrt(sigma(i, i));
    }
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return standardized[static_cast<std::size_t>(a)]
               < standardized[static_cast<std::size_t>(b)];
    });

    Eigen::MatrixXd l = cholesky(sigma(order, order));
    bounds_.resize(order.size());
    chol_.resize(order.size() * (order.size() + 1) / 2);
    std::size_t k = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
    {
        bounds_[i] = upper[order[i]];
        for (std::size_t j = 0; j <= i; ++j)
            chol_[k++] = l(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(j));
    }
}

LogProbEstimate QmcProblem::estimate(QmcConfig const& cfg, double scale) const
{
    cfg.validate();
    if (!(scale > 0))
        throw std::invalid_argument("bound scale must be positive");
    if (bounds_.empty())
        throw std::invalid_argument("QMC problem is empty");
    if (degenerate_)
        return {-inf, 0.0, 0};

    std::size_t const d = bounds_.size();
    std::vector<double> a(d);
    for (std::size_t i = 0; i < d; ++i)
        a[i] = bounds_[i] * scale;

    double const e0 = std_normal_cdf(a[0] / chol_[0]);
    if (d == 1)
        return {std::log(e0), 0.0, 0};
    if (e0 == 0)
        return {-inf, 0.0, 0};

    auto const& primes = small_primes();
    if (d - 1 > primes.size())
        throw std::invalid_argument("QMC dimension exceeds generator table");
    std::vector<double> alpha(d - 1);
    for (std::size_t k = 0; k + 1 < d; ++k)
        alpha[k] = frac(std::sqrt(static_cast<double>(primes[k])));

    CounterRng rng(cfg.seed);
    std::vector<double> shift(d - 1);
    std::vector<double> w(d - 1);
    std::vector<double> y(d - 1);
    std::vector<double> shift_log_means(cfg.n_shifts);
    double const log_pairs = std::log(2.0 * static_cast<double>(cfg.n_points));

    // Separation-of-variables integrand at one transformed point.
    auto integrand = [&](LogSumAccumulator& acc) {
        double f = e0;
        long exponent = 0;
        double const* row = chol_.data() + 1;
        for (std::size_t i = 1; i < d; ++i, row += i)
        {
            double s = 0;
            for (std::size_t j = 0; j < i; ++j)
                s += row[j] * y[j];
            double const e = std_normal_cdf((a[i] - s) / row[i]);
            if (e == 0)
                return;
            if (e >= 1e-100)
            {
                f *= e;
            }
            else
            {
                int ee;
                f *= std::frexp(e, &ee);
                exponent += ee;
            }
            if (f < 1e-100)
            {
                int ef;
                f = std::frexp(f, &ef);
                exponent += ef;
            }
            if (i + 1 < d)
                y[i] = std_normal_quantile(w[i] * e);
        }
        if (exponent == 0)
            acc.add_linear(f);
        else
            acc.add_log(std::log(f) + static_cast<double>(exponent) * ln2);
    };

    for (std::uint32_t s = 0; s < cfg.n_shifts; ++s)
    {
        for (std::size_t k = 0; k + 1 < d; ++k)
            shift[k] = rng.uniform(s, k);

        LogSumAccumulator acc;
        for (std::uint64_t j = 1; j <= cfg.n_points; ++j)
        {
            double const jd = static_cast<double>(j);
            for (int anti = 0; anti < 2; ++anti)
            {
                for (std::size_t k = 0; k + 1 < d; ++k)
                {
                    double t = std::fabs(2 * frac(jd * alpha[k] + shift[k]) - 1);
                    w[k] = anti ? 1 - t : t;
                }
                y[0] = std_normal_quantile(w[0] * e0);
                integrand(acc);
            }
        }
        shift_log_means[s] = acc.log_total() - log_pairs;
    }

    LogSumAccumulator total;
    for (double v : shift_log_means)
        total.add_log(v);
    double const n_shifts = static_cast<double>(cfg.n_shifts);
    double const log_mean = total.log_total() - std::log(n_shifts);

    LogProbEstimate est;
    est.log_value = log_mean;
    est.n_points_used = 2 * cfg.n_points * cfg.n_shifts;
    if (log_mean == -inf)
        return est;

    // Relative spread of the shift means gives the log-scale standard error.
    double sum_sq = 0;
    for (double v : shift_log_means)
    {
        double r = std::exp(v - log_mean) - 1.0;
        sum_sq += r * r;
    }
    est.std_error = std::sqrt(sum_sq / (n_shifts - 1) / n_shifts);
    return est;
}

LogProbEstimate qmc_mvn_cdf(Eigen::VectorXd const& upper,
                            Eigen::MatrixXd const& sigma,
                            QmcConfig const& cfg)
{
    cfg.validate();
    return QmcProblem(upper, sigma).estimate(cfg);
}

//---------------------------------------------------------------------------//
Eigen::VectorXd counter_normals(std::uint64_t seed, std::size_t n)
{
    CounterRng rng(seed);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        z[static_cast<Eigen::Index>(i)] = std_normal_quantile(rng.uniform(0, i));
    return z;
}

Eigen::VectorXd simulate_gp(std::span<Location const> locs,
                            CovarianceSpec const& spec,
                            std::uint64_t seed)
{
    Eigen::MatrixXd l = cholesky(build_covariance(locs, spec));
    return l.triangularView<Eigen::Lower>() * counter_normals(seed, locs.size());
}

}  // namespace vcdf
