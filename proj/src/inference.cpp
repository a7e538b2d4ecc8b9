#include "vcdf/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "vcdf/parallel.hpp"
#include "vcdf/rng.hpp"

namespace vcdf
{
namespace
{
constexpr double inf = std::numeric_limits<double>::infinity();
}

//---------------------------------------------------------------------------//
// DATA
//---------------------------------------------------------------------------//

Dataset make_dataset(std::vector<Location> locs,
                     Eigen::MatrixXd const& uniform,
                     double threshold)
{
    if (static_cast<std::size_t>(uniform.cols()) != locs.size())
        throw std::invalid_argument("observation columns and stations disagree");

    Dataset data;
    data.locs = std::move(locs);
    std::size_t missing = 0;
    for (Eigen::Index t = 0; t < uniform.rows(); ++t)
    {
        Eigen::VectorXd row = uniform.row(t).transpose();
        auto rep = Replicate::from_uniform(row, threshold);
        missing += data.locs.size() - rep.observed.size();
        data.replicates.push_back(std::move(rep));
    }
    if (uniform.size() > 0)
        data.missing_fraction
            = static_cast<double>(missing) / static_cast<double>(uniform.size());
    return data;
}

Eigen::MatrixXd simulate_mixture(std::span<Location const> locs,
                                 MixtureParams const& params,
                                 std::size_t n_replicates,
                                 std::uint64_t seed)
{
    params.validate();
    Eigen::MatrixXd l = cholesky(build_covariance(locs, params.cov));
    CounterRng rng(derive_seed(seed, 0x726164ULL));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n_replicates),
                        static_cast<Eigen::Index>(locs.size()));
    for (std::size_t t = 0; t < n_replicates; ++t)
    {
        double const r = mixing_quantile(rng.uniform(0, t), params);
        Eigen::VectorXd w = l.triangularView<Eigen::Lower>()
                            * counter_normals(derive_seed(seed, t, 1), locs.size());
        out.row(static_cast<Eigen::Index>(t)) = r * w.transpose();
    }
    return out;
}

//---------------------------------------------------------------------------//
// PARAMETER TRANSFORMS
//---------------------------------------------------------------------------//

Eigen::VectorXd transform_params(MixtureParams const& psi)
{
    psi.validate();
    bool const aniso = psi.cov.kind == CovarianceKind::AnisotropicExponential;
    if (!(psi.beta > 0))
        throw std::invalid_argument("beta = 0 lies on the transform boundary");
    Eigen::VectorXd v(aniso ? 4 : 2);
    v[0] = std::log(psi.beta);
    v[1] = std::log(psi.cov.rho);
    if (aniso)
    {
        double const t = psi.cov.phi / std::numbers::pi;
        if (!(t > 0))
            throw std::invalid_argument("phi = 0 lies on the transform boundary");
        if (!(psi.cov.aspect > 1))
            throw std::invalid_argument("aspect = 1 lies on the transform boundary");
        v[2] = std::log(t) - std::log1p(-t);
        v[3] = std::log(psi.cov.aspect - 1);
    }
    return v;
}

MixtureParams untransform_params(Eigen::VectorXd const& v,
                                 MixtureParams const& like)
{
    bool const aniso = like.cov.kind == CovarianceKind::AnisotropicExponential;
    if (v.size() != (aniso ? 4 : 2))
        throw std::invalid_argument("parameter vector has the wrong length");
    if (!v.allFinite())
        throw std::invalid_argument("parameter vector is not finite");

    MixtureParams psi = like;
    psi.beta = std::exp(v[0]);
    double const rho = std::exp(v[1]);
    if (aniso)
    {
        double const t = 1.0 / (1.0 + std::exp(-v[2]));
        double phi = std::numbers::pi * t;
        double const aspect = 1.0 + std::exp(v[3]);
        if (!(phi < std::numbers::pi))
            phi = std::nextafter(std::numbers::pi, 0.0);
        psi.cov = CovarianceSpec::anisotropic(rho, phi, aspect);
    }
    else
    {
        psi.cov = CovarianceSpec::isotropic(rho);
    }
    psi.validate();
    return psi;
}

//---------------------------------------------------------------------------//
// NELDER-MEAD
//---------------------------------------------------------------------------//

namespace
{
struct Simplex
{
    std::vector<Eigen::VectorXd> x;
    std::vector<double> f;

    void sort()
    {
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](auto a, auto b) { return f[a] < f[b]; });
        std::vector<Eigen::VectorXd> xs;
        std::vector<double> fs;
        for (auto i : idx)
        {
            xs.push_back(x[i]);
            fs.push_back(f[i]);
        }
        x = std::move(xs);
        f = std::move(fs);
    }

    double diameter() const
    {
        double d = 0;
        for (std::size_t i = 1; i < x.size(); ++i)
            d = std::max(d, (x[i] - x[0]).lpNorm<Eigen::Infinity>());
        return d;
    }

    double spread() const { return f.back() - f.front(); }
};

void run_simplex(Objective const& eval,
                 Simplex& s,
                 NelderMeadOptions const& opts,
                 NelderMeadResult& result)
{
    constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
    auto const n = s.x.size() - 1;

    s.sort();
    while (true)
    {
        if (s.diameter() <= opts.tol && s.spread() <= opts.tol)
        {
            result.converged = true;
            return;
        }
        if (result.iterations >= opts.max_iter)
        {
            result.converged = false;
            return;
        }
        ++result.iterations;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(s.x[0].size());
        for (std::size_t i = 0; i < n; ++i)
            centroid += s.x[i];
        centroid /= static_cast<double>(n);

        Eigen::VectorXd const& worst = s.x[n];
        Eigen::VectorXd xr = centroid + reflect * (centroid - worst);
        double const fr = eval(xr);

        if (fr < s.f[0])
        {
            Eigen::VectorXd xe = centroid + expand * (xr - centroid);
            double const fe = eval(xe);
            if (fe < fr)
            {
                s.x[n] = xe;
                s.f[n] = fe;
            }
            else
            {
                s.x[n] = xr;
                s.f[n] = fr;
            }
        }
        else if (fr < s.f[n - 1])
        {
            s.x[n] = xr;
            s.f[n] = fr;
        }
        else
        {
            bool accepted = false;
            if (fr < s.f[n])
            {
                Eigen::VectorXd xc = centroid + contract * (xr - centroid);
                double const fc = eval(xc);
                if (fc <= fr)
                {
                    s.x[n] = xc;
                    s.f[n] = fc;
                    accepted = true;
                }
            }
            else
            {
                Eigen::VectorXd xc = centroid + contract * (worst - centroid);
                double const fc = eval(xc);
                if (fc < s.f[n])
                {
                    s.x[n] = xc;
                    s.f[n] = fc;
                    accepted = true;
                }
            }
            if (!accepted)
            {
                for (std::size_t i = 1; i <= n; ++i)
                {
                    s.x[i] = s.x[0] + shrink * (s.x[i] - s.x[0]);
                    s.f[i] = eval(s.x[i]);
                }
            }
        }
        s.sort();
        if (opts.keep_trace)
            result.trace.push_back({result.iterations, s.f[0], s.x[0]});
    }
}

Simplex initial_simplex(Objective const& eval, Eigen::VectorXd const& x0, double step)
{
    Simplex s;
    s.x.push_back(x0);
    s.f.push_back(eval(x0));
    for (Eigen::Index i = 0; i < x0.size(); ++i)
    {
        Eigen::VectorXd xi = x0;
        xi[i] += step;
        s.x.push_back(xi);
        s.f.push_back(eval(xi));
    }
    return s;
}

}  // namespace

NelderMeadResult nelder_mead(Objective const& objective,
                             Eigen::VectorXd const& init,
                             NelderMeadOptions const& opts)
{
    if (init.size() < 1)
        throw std::invalid_argument("Nelder-Mead needs at least one parameter");
    if (opts.max_iter < 1 || !(opts.tol > 0))
        throw std::invalid_argument("Nelder-Mead needs max_iter >= 1 and tol > 0");

    NelderMeadResult result;
    Objective eval = [&](Eigen::VectorXd const& x) {
        ++result.n_evals;
        double v = objective(x);
        return std::isnan(v) || v == -inf ? inf : v;
    };

    Simplex s = initial_simplex(eval, init, opts.initial_step);
    if (!std::isfinite(s.f[0]))
        throw std::invalid_argument("objective is not finite at the initial point");
    run_simplex(eval, s, opts, result);

    if (opts.restart && result.iterations < opts.max_iter)
    {
        Simplex again = initial_simplex(eval, s.x[0], opts.initial_step);
        again.f[0] = s.f[0];
        run_simplex(eval, again, opts, result);
        if (again.f[0] <= s.f[0])
            s = std::move(again);
    }

    result.x = s.x[0];
    result.value = s.f[0];
    return result;
}

//---------------------------------------------------------------------------//
// LIKELIHOOD AND FITTING
//---------------------------------------------------------------------------//

void FitConfig::validate() const
{
    init.validate();
    if (max_iter < 1)
        throw std::invalid_argument("max_iter must be >= 1");
    if (!(tol > 0))
        throw std::invalid_argument("tol must be > 0");
    if (!(threshold > 0 && threshold < 1))
        throw std::invalid_argument("threshold must lie in (0, 1)");
    lik.qmc.validate();
    lik.quad.validate();
}

LoglikSummary full_loglik_detail(MixtureParams const& psi,
                                 Dataset const& data,
                                 FitConfig const& cfg)
{
    MixtureModel model(psi, cfg.lik.quad);
    LikelihoodConfig lik = cfg.lik;
    lik.qmc.seed = cfg.seed;
    unsigned const workers = lik.workers;
    lik.workers = 1;

    auto const n = data.replicates.size();
    std::vector<ReplicateLogLik> values(n);

    // Fully censored replicates with the same observed set share one bound
    // vector, so each distinct set is evaluated once.
    std::map<IndexList, std::size_t> censored_first;
    std::vector<std::size_t> todo;
    std::vector<std::size_t> copy_from(n, n);
    for (std::size_t t = 0; t < n; ++t)
    {
        auto const& rep = data.replicates[t];
        if (!rep.observed.empty() && rep.exceed_idx.empty())
        {
            auto [it, inserted] = censored_first.emplace(rep.observed, t);
            if (!inserted)
            {
                copy_from[t] = it->second;
                continue;
            }
        }
        todo.push_back(t);
    }

    parallel_for(todo.size(), workers, [&](std::size_t k) {
        auto t = todo[k];
        values[t] = censored_loglik_replicate_detail(
            data.replicates[t], data.locs, model, lik);
    });
    for (std::size_t t = 0; t < n; ++t)
    {
        if (copy_from[t] != n)
            values[t] = values[copy_from[t]];
    }

    LoglikSummary out;
    double var = 0;
    for (auto const& v : values)
    {
        if (v.underflow)
        {
            ++out.n_dropped;
            continue;
        }
        out.value += v.value;
        var += v.std_error * v.std_error;
    }
    out.std_error = std::sqrt(var);
    return out;
}

double full_loglik(MixtureParams const& psi, Dataset const& data, FitConfig const& cfg)
{
    auto summary = full_loglik_detail(psi, data, cfg);
    if (summary.n_dropped > 0)
    {
        std::clog << "warning: " << summary.n_dropped
                  << " replicate(s) underflowed and were excluded\n";
    }
    return summary.value;
}

FitResult fit(Dataset const& data, FitConfig const& cfg)
{
    cfg.validate();
    auto const start = std::chrono::steady_clock::now();

    Objective objective = [&](Eigen::VectorXd const& v) {
        MixtureParams psi;
        try
        {
            psi = untransform_params(v, cfg.init);
        }
        catch (std::invalid_argument const&)
        {
            return inf;
        }
        try
        {
            return -full_loglik_detail(psi, data, cfg).value;
        }
        catch (NotPositiveDefinite const&)
        {
            return inf;
        }
    };

    NelderMeadOptions opts;
    opts.max_iter = cfg.max_iter;
    opts.tol = cfg.tol;
    opts.initial_step = cfg.initial_step;
    opts.restart = cfg.restart;
    opts.keep_trace = cfg.keep_trace;
    auto nm = nelder_mead(objective, transform_params(cfg.init), opts);

    FitResult result;
    result.psi_hat = untransform_params(nm.x, cfg.init);
    auto final = full_loglik_detail(result.psi_hat, data, cfg);
    result.loglik = final.value;
    result.n_dropped = final.n_dropped;
    result.n_evals = nm.n_evals + 1;
    result.converged = nm.converged && std::isfinite(result.loglik);
    result.trace = std::move(nm.trace);
    result.wall_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
    return result;
}

//---------------------------------------------------------------------------//
// SERIALIZATION
//---------------------------------------------------------------------------//

nlohmann::json params_to_json(MixtureParams const& p)
{
    return {
        {"beta", p.beta},
        {"gamma", p.gamma},
        {"rho", p.cov.rho},
        {"phi", p.cov.phi},
        {"aspect", p.cov.aspect},
        {"kind",
         p.cov.kind == CovarianceKind::IsotropicExponential ? "isotropic"
                                                            : "anisotropic"},
    };
}

MixtureParams params_from_json(nlohmann::json const& j)
{
    MixtureParams p;
    p.beta = j.at("beta").get<double>();
    p.gamma = j.value("gamma", 1.0);
    auto kind = j.value("kind", std::string{"anisotropic"});
    double const rho = j.at("rho").get<double>();
    if (kind == "isotropic")
    {
        p.cov = CovarianceSpec::isotropic(rho);
    }
    else if (kind == "anisotropic")
    {
        p.cov = CovarianceSpec::anisotropic(
            rho, j.at("phi").get<double>(), j.at("aspect").get<double>());
    }
    else
    {
        throw std::invalid_argument("unknown covariance kind '" + kind + "'");
    }
    p.validate();
    return p;
}

nlohmann::json fit_config_to_json(FitConfig const& cfg)
{
    return {
        {"schema_version", schema_version},
        {"init", params_to_json(cfg.init)},
        {"max_iter", cfg.max_iter},
        {"tol", cfg.tol},
        {"initial_step", cfg.initial_step},
        {"restart", cfg.restart},
        {"keep_trace", cfg.keep_trace},
        {"seed", cfg.seed},
        {"threshold", cfg.threshold},
        {"workers", cfg.lik.workers},
        {"qmc", {{"n_points", cfg.lik.qmc.n_points}, {"n_shifts", cfg.lik.qmc.n_shifts}}},
        {"quad", {{"n_nodes", cfg.lik.quad.n_nodes}}},
        {"plan",
         {{"m", cfg.lik.plan.m},
          {"p", cfg.lik.plan.p},
          {"strategy", to_string(cfg.lik.plan.strategy)},
          {"ordering", to_string(cfg.lik.plan.ordering)},
          {"seed", cfg.lik.plan.seed}}},
    };
}

FitConfig fit_config_from_json(nlohmann::json const& j)
{
    int const version = j.at("schema_version").get<int>();
    if (version != schema_version)
    {
        throw std::invalid_argument("unsupported fit config schema_version "
                                    + std::to_string(version));
    }
    FitConfig cfg;
    cfg.init = params_from_json(j.at("init"));
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.initial_step = j.value("initial_step", cfg.initial_step);
    cfg.restart = j.value("restart", cfg.restart);
    cfg.keep_trace = j.value("keep_trace", cfg.keep_trace);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threshold = j.value("threshold", cfg.threshold);
    cfg.lik.workers = j.value("workers", cfg.lik.workers);
    if (j.contains("qmc"))
    {
        auto const& q = j.at("qmc");
        cfg.lik.qmc.n_points = q.value("n_points", cfg.lik.qmc.n_points);
        cfg.lik.qmc.n_shifts = q.value("n_shifts", cfg.lik.qmc.n_shifts);
    }
    if (j.contains("quad"))
        cfg.lik.quad.n_nodes = j.at("quad").value("n_nodes", cfg.lik.quad.n_nodes);
    if (j.contains("plan"))
    {
        auto const& p = j.at("plan");
        cfg.lik.plan.m = p.value("m", cfg.lik.plan.m);
        cfg.lik.plan.p = p.value("p", cfg.lik.plan.p);
        cfg.lik.plan.strategy = neighbor_strategy_from_string(
            p.value("strategy", std::string{to_string(cfg.lik.plan.strategy)}));
        cfg.lik.plan.ordering = ordering_kind_from_string(
            p.value("ordering", std::string{to_string(cfg.lik.plan.ordering)}));
        cfg.lik.plan.seed = p.value("seed", cfg.lik.plan.seed);
    }
    cfg.validate();
    return cfg;
}

nlohmann::json fit_result_to_json(FitResult const& result, FitConfig const& cfg)
{
    nlohmann::json trace = nlohmann::json::array();
    for (auto const& step : result.trace)
    {
        std::vector<double> point(step.best_point.data(),
                                  step.best_point.data() + step.best_point.size());
        trace.push_back({{"iteration", step.iteration},
                         {"neg_loglik", step.best_value},
                         {"point", point}});
    }
    return {
        {"schema_version", schema_version},
        {"psi_hat", params_to_json(result.psi_hat)},
        {"loglik", result.loglik},
        {"n_evals", result.n_evals},
        {"n_dropped", result.n_dropped},
        {"converged", result.converged},
        {"trace", trace},
        {"config", fit_config_to_json(cfg)},
    };
}

}  // namespace vcdf
