#include "vcdf/scalemix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/tools/roots.hpp>

namespace vcdf
{
namespace
{
constexpr double inf = std::numeric_limits<double>::infinity();

//! Accumulates log sum_k exp(a_k) together with a standard error.
class RadialSum
{
  public:
    void add(double log_term, double log_se)
    {
        terms_.push_back(log_term);
        ses_.push_back(log_se);
    }

    double log_value() const
    {
        double hi = -inf;
        for (double t : terms_)
            hi = std::max(hi, t);
        if (hi == -inf)
            return -inf;
        double s = 0;
        for (double t : terms_)
            s += std::exp(t - hi);
        return hi + std::log(s);
    }

    //! Contribution-weighted node errors, assuming full correlation.
    double std_error() const
    {
        double const total = log_value();
        if (total == -inf)
            return 0;
        double se = 0;
        for (std::size_t k = 0; k < terms_.size(); ++k)
            se += std::exp(terms_[k] - total) * ses_[k];
        return se;
    }

  private:
    std::vector<double> terms_;
    std::vector<double> ses_;
};

Eigen::VectorXd gather(Eigen::VectorXd const& v, std::span<std::size_t const> idx)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(idx[i])];
    return out;
}

std::vector<Location> gather(std::span<Location const> locs,
                             std::span<std::size_t const> idx)
{
    std::vector<Location> out;
    out.reserve(idx.size());
    for (auto i : idx)
        out.push_back(locs[i]);
    return out;
}

}  // namespace

//---------------------------------------------------------------------------//
// MIXING DISTRIBUTION
//---------------------------------------------------------------------------//

void MixtureParams::validate() const
{
    if (!(beta >= 0) || !std::isfinite(beta))
        throw std::invalid_argument("mixing beta must be >= 0");
    if (!(gamma > 0) || !std::isfinite(gamma))
        throw std::invalid_argument("mixing gamma must be > 0");
    cov.validate();
}

double mixing_cdf(double r, MixtureParams const& params)
{
    if (std::isnan(r))
        return r;
    if (r <= 1)
        return 0;
    if (r == inf)
        return 1;
    double const log_r = std::log(r);
    if (params.beta == 0)
        return -std::expm1(-params.gamma * log_r);
    // (r^beta - 1) / beta, stable for small beta
    double const h = std::expm1(params.beta * log_r) / params.beta;
    return -std::expm1(-params.gamma * h);
}

double mixing_pdf(double r, MixtureParams const& params)
{
    if (!(r >= 1) || r == inf)
        return 0;
    double const log_r = std::log(r);
    if (params.beta == 0)
        return params.gamma * std::exp(-(params.gamma + 1) * log_r);
    double const h = std::expm1(params.beta * log_r) / params.beta;
    return params.gamma * std::exp((params.beta - 1) * log_r - params.gamma * h);
}

double mixing_quantile(double u, MixtureParams const& params)
{
    if (!(u >= 0 && u <= 1))
        throw std::invalid_argument("mixing quantile needs u in [0, 1]");
    if (u == 1)
        return inf;
    double const t = -std::log1p(-u) / params.gamma;  // -log(1-u)/gamma
    if (params.beta == 0)
        return std::exp(t);
    return std::exp(std::log1p(params.beta * t) / params.beta);
}

//---------------------------------------------------------------------------//
// QUADRATURE
//---------------------------------------------------------------------------//

void QuadratureConfig::validate() const
{
    if (n_nodes < 8)
        throw std::invalid_argument("radial quadrature needs at least 8 nodes");
}

UnitRule const& gauss_legendre_unit(std::size_t n_nodes)
{
    static std::mutex mutex;
    static std::map<std::size_t, std::unique_ptr<UnitRule>> cache;

    std::lock_guard lock(mutex);
    auto& slot = cache[n_nodes];
    if (slot)
        return *slot;

    auto const n = static_cast<int>(n_nodes);
    auto zeros = boost::math::legendre_p_zeros<double>(n);
    std::vector<std::pair<double, double>> pts;
    for (double x : zeros)
    {
        double dp = boost::math::legendre_p_prime(n, x);
        double w = 2.0 / ((1 - x * x) * dp * dp);
        pts.emplace_back(x, w);
        if (x != 0)
            pts.emplace_back(-x, w);
    }
    std::sort(pts.begin(), pts.end());

    auto rule = std::make_unique<UnitRule>();
    for (auto [x, w] : pts)
    {
        rule->nodes.push_back(0.5 * (1 + x));
        rule->weights.push_back(0.5 * w);
    }
    slot = std::move(rule);
    return *slot;
}

MixtureModel::MixtureModel(MixtureParams const& params,
                           QuadratureConfig const& quad)
    : params_{params}
{
    params.validate();
    quad.validate();
    auto const& rule = gauss_legendre_unit(quad.n_nodes);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    {
        radii_.push_back(mixing_quantile(rule.nodes[k], params));
        weights_.push_back(rule.weights[k]);
        log_weights_.push_back(std::log(rule.weights[k]));
    }
}

double MixtureModel::marginal_cdf(double x) const
{
    if (x == inf)
        return 1;
    if (x == -inf)
        return 0;
    double s = 0;
    for (std::size_t k = 0; k < radii_.size(); ++k)
        s += weights_[k] * std_normal_cdf(x / radii_[k]);
    return s;
}

double MixtureModel::marginal_pdf(double x) const
{
    double s = 0;
    for (std::size_t k = 0; k < radii_.size(); ++k)
        s += weights_[k] * std::exp(std_normal_log_pdf(x / radii_[k])) / radii_[k];
    return s;
}

double MixtureModel::marginal_log_pdf(double x) const
{
    RadialSum sum;
    for (std::size_t k = 0; k < radii_.size(); ++k)
    {
        sum.add(log_weights_[k] + std_normal_log_pdf(x / radii_[k])
                    - std::log(radii_[k]),
                0);
    }
    return sum.log_value();
}

double MixtureModel::marginal_quantile(double prob) const
{
    if (!(prob > 0 && prob < 1))
        throw std::invalid_argument("marginal quantile needs prob in (0, 1)");

    auto f = [&](double x) { return marginal_cdf(x) - prob; };
    double lo = -1, hi = 1;
    for (int i = 0; f(lo) > 0; ++i)
    {
        if (i > 200)
            throw std::runtime_error("marginal quantile: no lower bracket");
        hi = std::min(hi, lo);
        lo *= 2;
    }
    for (int i = 0; f(hi) < 0; ++i)
    {
        if (i > 200)
            throw std::runtime_error("marginal quantile: no upper bracket");
        lo = std::max(lo, hi);
        hi *= 2;
    }

    std::uintmax_t max_iter = 200;
    auto [a, b] = boost::math::tools::toms748_solve(
        f, lo, hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
    return 0.5 * (a + b);
}

double marginal_cdf(double x, MixtureParams const& params, QuadratureConfig const& quad)
{
    return MixtureModel(params, quad).marginal_cdf(x);
}

double marginal_pdf(double x, MixtureParams const& params, QuadratureConfig const& quad)
{
    return MixtureModel(params, quad).marginal_pdf(x);
}

double marginal_quantile(double prob,
                         MixtureParams const& params,
                         QuadratureConfig const& quad)
{
    return MixtureModel(params, quad).marginal_quantile(prob);
}

//---------------------------------------------------------------------------//
// DATA PREPARATION
//---------------------------------------------------------------------------//

bool is_missing(double v)
{
    return std::isnan(v);
}

Eigen::MatrixXd rank_transform(Eigen::MatrixXd const& data)
{
    Eigen::MatrixXd out(data.rows(), data.cols());
    out.setConstant(std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index c = 0; c < data.cols(); ++c)
    {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index t = 0; t < data.rows(); ++t)
        {
            if (!is_missing(data(t, c)))
                rows.push_back(t);
        }
        if (rows.empty())
        {
            throw std::invalid_argument("column " + std::to_string(c)
                                        + " has no observed values");
        }
        std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) {
            return data(a, c) < data(b, c);
        });
        double const denom = static_cast<double>(rows.size()) + 1;
        for (std::size_t i = 0; i < rows.size();)
        {
            std::size_t j = i;
            while (j + 1 < rows.size() && data(rows[j + 1], c) == data(rows[i], c))
                ++j;
            // Ranks i+1 .. j+1 share their average.
            double const rank = 0.5 * static_cast<double>(i + j + 2);
            for (std::size_t k = i; k <= j; ++k)
                out(rows[k], c) = rank / denom;
            i = j + 1;
        }
    }
    return out;
}

Replicate Replicate::from_uniform(Eigen::VectorXd const& u, double threshold)
{
    if (!(threshold > 0 && threshold < 1))
        throw std::invalid_argument("threshold must lie in (0, 1)");
    Replicate rep;
    rep.values = u;
    rep.threshold = threshold;
    for (Eigen::Index i = 0; i < u.size(); ++i)
    {
        if (is_missing(u[i]))
            continue;
        if (!(u[i] > 0 && u[i] < 1))
            throw std::invalid_argument("uniform-scale value outside (0, 1)");
        auto const idx = static_cast<std::size_t>(i);
        rep.observed.push_back(idx);
        (u[i] > threshold ? rep.exceed_idx : rep.censored_idx).push_back(idx);
    }
    return rep;
}

//---------------------------------------------------------------------------//
// CENSORED LIKELIHOOD
//---------------------------------------------------------------------------//

LogProbEstimate log_joint_cdf(Eigen::VectorXd const& x,
                              std::span<Location const> locs,
                              MixtureModel const& model,
                              LikelihoodConfig const& cfg)
{
    auto const& spec = model.params().cov;
    auto plan = build_plan(locs, spec, cfg.plan);
    VecchiaCdfEvaluator eval(x, CovarianceSource(locs, spec), plan);

    RadialSum sum;
    auto radii = model.radii();
    auto lw = model.log_weights();
    for (std::size_t k = 0; k < radii.size(); ++k)
    {
        auto est = eval.evaluate(cfg.qmc, 1.0 / radii[k], cfg.workers);
        sum.add(lw[k] + est.log_value, est.std_error);
    }
    return {sum.log_value(), sum.std_error(), 0};
}

double log_joint_pdf(Eigen::VectorXd const& x,
                     std::span<Location const> locs,
                     MixtureModel const& model,
                     LikelihoodConfig const& cfg)
{
    auto const& spec = model.params().cov;
    auto plan = build_plan(locs, spec, cfg.plan);
    VecchiaPdfEvaluator eval(x, CovarianceSource(locs, spec), plan);

    double const d = static_cast<double>(x.size());
    RadialSum sum;
    auto radii = model.radii();
    auto lw = model.log_weights();
    for (std::size_t k = 0; k < radii.size(); ++k)
        sum.add(lw[k] + eval.evaluate(1.0 / radii[k]) - d * std::log(radii[k]), 0);
    return sum.log_value();
}

LogProbEstimate log_partial_cdf(Eigen::VectorXd const& x,
                                std::span<std::size_t const> exceed_idx,
                                std::span<Location const> locs,
                                MixtureModel const& model,
                                LikelihoodConfig const& cfg)
{
    auto const d = static_cast<std::size_t>(x.size());
    if (locs.size() != d)
        throw std::invalid_argument("partial CDF: locations and values disagree");
    if (exceed_idx.empty())
        return log_joint_cdf(x, locs, model, cfg);

    std::vector<bool> is_exceed(d, false);
    for (auto i : exceed_idx)
        is_exceed.at(i) = true;
    IndexList exceed(exceed_idx.begin(), exceed_idx.end());
    IndexList censored;
    for (std::size_t i = 0; i < d; ++i)
    {
        if (!is_exceed[i])
            censored.push_back(i);
    }

    auto const& spec = model.params().cov;
    Eigen::MatrixXd sigma = build_covariance(locs, spec, DuplicatePolicy::Reject);
    Eigen::VectorXd x_exceed = gather(x, exceed);

    // Density of the exceedances: constant - 0.5 * |L^{-1} x_I|^2 / r^2.
    Eigen::MatrixXd l_exceed = cholesky(sigma(
        std::vector<Eigen::Index>(exceed.begin(), exceed.end()),
        std::vector<Eigen::Index>(exceed.begin(), exceed.end())));
    double const n_exceed = static_cast<double>(exceed.size());
    double const quad_form
        = l_exceed.triangularView<Eigen::Lower>().solve(x_exceed).squaredNorm();
    double const log_det_half = l_exceed.diagonal().array().log().sum();
    double const pdf_const
        = -0.5 * n_exceed * std::log(2 * std::numbers::pi) - log_det_half;

    std::optional<VecchiaCdfEvaluator> censored_eval;
    ConditionalGaussian cond;
    std::vector<Location> censored_locs;
    if (!censored.empty())
    {
        cond = conditional_gaussian(sigma, exceed, censored, x_exceed);
        censored_locs = gather(locs, censored);
        auto plan = build_plan(censored_locs, spec, cfg.plan);
        Eigen::VectorXd bounds = gather(x, censored) - cond.mean;
        censored_eval.emplace(bounds, CovarianceSource(cond.cov), plan);
    }

    auto radii = model.radii();
    auto lw = model.log_weights();
    std::vector<double> density_part(radii.size());
    for (std::size_t k = 0; k < radii.size(); ++k)
    {
        double const r = radii[k];
        density_part[k] = lw[k] + pdf_const - 0.5 * quad_form / (r * r)
                          - n_exceed * std::log(r);
    }

    // The CDF factor is at most one, so the density part bounds each node.
    // Visiting nodes from the largest bound down lets us skip any node that
    // cannot reach prune_gap below the best node seen so far.
    constexpr double prune_gap = 45;
    std::vector<std::size_t> visit(radii.size());
    std::iota(visit.begin(), visit.end(), std::size_t{0});
    std::stable_sort(visit.begin(), visit.end(), [&](auto a, auto b) {
        return density_part[a] > density_part[b];
    });

    RadialSum sum;
    double best = -inf;
    for (auto k : visit)
    {
        if (density_part[k] < best - prune_gap)
            break;
        double term = density_part[k];
        double se = 0;
        if (censored_eval)
        {
            auto est = censored_eval->evaluate(cfg.qmc, 1.0 / radii[k], cfg.workers);
            term += est.log_value;
            se = est.std_error;
        }
        best = std::max(best, term);
        sum.add(term, se);
    }
    return {sum.log_value(), sum.std_error(), 0};
}

ReplicateLogLik censored_loglik_replicate_detail(Replicate const& rep,
                                                 std::span<Location const> locs,
                                                 MixtureModel const& model,
                                                 LikelihoodConfig const& cfg)
{
    if (static_cast<std::size_t>(rep.values.size()) != locs.size())
        throw std::invalid_argument("replicate and locations disagree in size");

    ReplicateLogLik out;
    if (rep.observed.empty())
        return out;

    // Model-scale values; censored sites sit exactly at the threshold quantile.
    double const q = model.marginal_quantile(rep.threshold);
    std::vector<Location> obs_locs = gather(locs, rep.observed);
    Eigen::VectorXd x(static_cast<Eigen::Index>(rep.observed.size()));
    IndexList exceed_pos;
    double log_marginals = 0;
    for (std::size_t k = 0; k < rep.observed.size(); ++k)
    {
        double const v = rep.values[static_cast<Eigen::Index>(rep.observed[k])];
        if (v > rep.threshold)
        {
            double const xk = model.marginal_quantile(v);
            x[static_cast<Eigen::Index>(k)] = xk;
            exceed_pos.push_back(k);
            log_marginals += model.marginal_log_pdf(xk);
        }
        else
        {
            x[static_cast<Eigen::Index>(k)] = q;
        }
    }

    if (exceed_pos.empty())
    {
        out.kind = CensoringCase::AllCensored;
        auto est = log_joint_cdf(x, obs_locs, model, cfg);
        out.value = est.log_value;
        out.std_error = est.std_error;
    }
    else if (exceed_pos.size() == rep.observed.size())
    {
        out.kind = CensoringCase::AllExceed;
        out.value = log_joint_pdf(x, obs_locs, model, cfg) - log_marginals;
    }
    else
    {
        out.kind = CensoringCase::Mixed;
        auto est = log_partial_cdf(x, exceed_pos, obs_locs, model, cfg);
        out.value = est.log_value - log_marginals;
        out.std_error = est.std_error;
    }
    if (!std::isfinite(out.value))
    {
        out.underflow = true;
        out.value = -inf;
    }
    return out;
}

double censored_loglik_replicate(Replicate const& rep,
                                 std::span<Location const> locs,
                                 MixtureParams const& params,
                                 LikelihoodConfig const& cfg)
{
    MixtureModel model(params, cfg.quad);
    return censored_loglik_replicate_detail(rep, locs, model, cfg).value;
}

//---------------------------------------------------------------------------//
// TAIL DEPENDENCE
//---------------------------------------------------------------------------//

double chi_from_joint(double u, double joint)
{
    return std::clamp((1 - 2 * u + joint) / (1 - u), 0.0, 1.0);
}

double chi_u(Location const& a, Location const& b, double u, MixtureModel const& model)
{
    if (!(u > 0 && u < 1))
        throw std::invalid_argument("chi_u needs u in (0, 1)");
    if (a == b)
        return 1.0;

    double const q = model.marginal_quantile(u);
    auto const& spec = model.params().cov;
    double const corr = spec.correlation(mahalanobis_distance(a, b, spec));

    double joint = 0;
    auto radii = model.radii();
    auto lw = model.log_weights();
    for (std::size_t k = 0; k < radii.size(); ++k)
        joint += std::exp(lw[k]) * std_bvn_cdf_diagonal(q / radii[k], corr);

    return chi_from_joint(u, joint);
}

double chi_u(Location const& a,
             Location const& b,
             double u,
             MixtureParams const& params,
             QuadratureConfig const& quad)
{
    return chi_u(a, b, u, MixtureModel(params, quad));
}

}  // namespace vcdf
