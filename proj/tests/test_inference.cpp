#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "support.hpp"
#include "vcdf/inference.hpp"

using namespace vcdf;
using doctest::Approx;

namespace
{
FitConfig cheap_config()
{
    FitConfig cfg;
    cfg.init = {0.5, 1, CovarianceSpec::isotropic(1)};
    cfg.lik.plan.m = 4;
    cfg.lik.qmc = {97, 4, 1};
    cfg.lik.quad = {16};
    cfg.max_iter = 40;
    cfg.seed = 9;
    cfg.threshold = 0.8;
    return cfg;
}

Dataset simulated(std::size_t n_side, std::size_t n_rep, double threshold, std::uint64_t seed)
{
    auto locs = make_grid(n_side);
    MixtureParams truth{0.5, 1, CovarianceSpec::isotropic(1)};
    auto raw = simulate_mixture(locs, truth, n_rep, seed);
    return make_dataset(locs, rank_transform(raw), threshold);
}

}  // namespace

TEST_CASE("full log-likelihood assembly")
{
    auto cfg = cheap_config();
    auto data = simulated(3, 12, cfg.threshold, 2);
    MixtureParams psi{0.7, 1, CovarianceSpec::isotropic(1.4)};

    LikelihoodConfig lik = cfg.lik;
    lik.qmc.seed = cfg.seed;

    SUBCASE("single replicate")
    {
        Dataset one{data.locs, {data.replicates[3]}, 0};
        double expect = censored_loglik_replicate(data.replicates[3], data.locs, psi, lik);
        CHECK(full_loglik(psi, one, cfg) == expect);
    }

    SUBCASE("a duplicated replicate doubles the value")
    {
        for (std::size_t t : {0, 5, 9})
        {
            Dataset one{data.locs, {data.replicates[t]}, 0};
            Dataset two{data.locs, {data.replicates[t], data.replicates[t]}, 0};
            CHECK(full_loglik(psi, two, cfg) == 2 * full_loglik(psi, one, cfg));
        }
    }

    SUBCASE("5x5 grid, 20 replicates, against a per-replicate sum")
    {
        auto big = simulated(5, 20, 0.9, 13);
        auto big_cfg = cfg;
        big_cfg.threshold = 0.9;
        double sum = 0;
        for (auto const& rep : big.replicates)
            sum += censored_loglik_replicate(rep, big.locs, psi, lik);
        CHECK(full_loglik(psi, big, big_cfg) == Approx(sum).epsilon(1e-12));

        big_cfg.lik.workers = 3;
        CHECK(full_loglik(psi, big, big_cfg) == Approx(sum).epsilon(1e-12));
    }

    SUBCASE("fixed seeds give a deterministic surface")
    {
        double a = full_loglik(psi, data, cfg);
        double b = full_loglik(psi, data, cfg);
        CHECK(a == b);
        CHECK(std::isfinite(a));
        auto other = cfg;
        other.seed = 10;
        CHECK(full_loglik(psi, data, other) != a);
    }

    SUBCASE("missing values and censoring bookkeeping")
    {
        Eigen::MatrixXd u(2, 3);
        u << 0.5, std::numeric_limits<double>::quiet_NaN(), 0.99, 0.1, 0.2, 0.3;
        auto row = make_grid(3);
        row.resize(3);
        auto d = make_dataset(row, u, 0.9);
        CHECK(d.missing_fraction == Approx(1.0 / 6));
        CHECK(d.replicates[0].exceed_idx == IndexList{2});
        CHECK(d.replicates[1].exceed_idx.empty());
        CHECK_THROWS_AS(make_dataset(make_grid(2), u, 0.9), std::invalid_argument);
    }
}

TEST_CASE("nelder-mead")
{
    NelderMeadOptions opts;

    SUBCASE("quadratic bowl")
    {
        auto bowl = [](Eigen::VectorXd const& v) {
            return (v[0] - 1) * (v[0] - 1) + (v[1] + 2) * (v[1] + 2);
        };
        auto res = nelder_mead(bowl, Eigen::Vector2d::Zero(), opts);
        CHECK(std::fabs(res.x[0] - 1) <= 1e-4);
        CHECK(std::fabs(res.x[1] + 2) <= 1e-4);
        CHECK(res.converged);
    }

    SUBCASE("rosenbrock")
    {
        auto rosen = [](Eigen::VectorXd const& v) {
            double a = 1 - v[0];
            double b = v[1] - v[0] * v[0];
            return a * a + 100 * b * b;
        };
        opts.tol = 1e-10;
        opts.max_iter = 500;
        auto res = nelder_mead(rosen, Eigen::Vector2d(-1.2, 1), opts);
        CHECK(res.value < 1e-6);
        CHECK(res.iterations <= 500);
    }

    SUBCASE("iteration cap reports non-convergence with the best vertex")
    {
        auto bowl = [](Eigen::VectorXd const& v) { return v.squaredNorm(); };
        opts.max_iter = 3;
        opts.keep_trace = true;
        auto res = nelder_mead(bowl, Eigen::Vector3d(4, 4, 4), opts);
        CHECK_FALSE(res.converged);
        CHECK(res.value == bowl(res.x));
        REQUIRE(!res.trace.empty());
        for (std::size_t k = 1; k < res.trace.size(); ++k)
            CHECK(res.trace[k].best_value <= res.trace[k - 1].best_value);
    }

    SUBCASE("non-finite values are avoided")
    {
        auto walled = [](Eigen::VectorXd const& v) {
            if (v[0] < 0)
                return std::numeric_limits<double>::quiet_NaN();
            return (v[0] - 0.1) * (v[0] - 0.1) + v[1] * v[1];
        };
        auto res = nelder_mead(walled, Eigen::Vector2d(1, 1), opts);
        CHECK(res.x[0] >= 0);
        CHECK(std::fabs(res.x[0] - 0.1) <= 1e-3);
    }

    SUBCASE("noisy objective lands in the basin")
    {
        double const sigma = 0.01;
        for (std::uint64_t seed = 0; seed < 10; ++seed)
        {
            std::mt19937_64 engine(seed);
            std::normal_distribution<double> noise(0, sigma);
            auto noisy = [&](Eigen::VectorXd const& v) {
                return (v - Eigen::Vector2d(1, -2)).squaredNorm() + noise(engine);
            };
            auto res = nelder_mead(noisy, Eigen::Vector2d::Zero(), opts);
            // Comparisons between vertices are only meaningful down to a few
            // noise widths, so the true objective at the answer is too.
            CHECK((res.x - Eigen::Vector2d(1, -2)).squaredNorm() <= 6 * sigma);
        }
    }

    SUBCASE("never worse than the starting point")
    {
        test::Gen gen(21);
        for (int trial = 0; trial < 50; ++trial)
        {
            Eigen::VectorXd centre(3);
            centre << gen.normal(), gen.normal(), gen.normal();
            auto f = [&](Eigen::VectorXd const& v) {
                double s = 0;
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    s += std::fabs(v[i] - centre[i]) + std::sin(5 * v[i]);
                return s;
            };
            Eigen::VectorXd init(3);
            init << gen.normal(), gen.normal(), gen.normal();
            NelderMeadOptions o;
            o.max_iter = gen.index(1, 60);
            o.restart = trial % 2 == 0;
            auto res = nelder_mead(f, init, o);
            CHECK(res.value <= f(init));
            CHECK(res.value == f(res.x));
        }
    }
}

TEST_CASE("parameter transforms")
{
    MixtureParams table{0.82, 1, CovarianceSpec::anisotropic(1.31, 1.10, 2.29)};
    auto back = untransform_params(transform_params(table), table);
    CHECK(std::fabs(back.beta - 0.82) <= 1e-12);
    CHECK(std::fabs(back.cov.rho - 1.31) <= 1e-12);
    CHECK(std::fabs(back.cov.phi - 1.10) <= 1e-12);
    CHECK(std::fabs(back.cov.aspect - 2.29) <= 1e-12);
    CHECK(back.gamma == 1);

    MixtureParams round_aspect{0.5, 1, CovarianceSpec::anisotropic(1, 0.5, 1)};
    CHECK_THROWS_AS(transform_params(round_aspect), std::invalid_argument);
    MixtureParams zero_beta{0, 1, CovarianceSpec::isotropic(1)};
    CHECK_THROWS_AS(transform_params(zero_beta), std::invalid_argument);
    CHECK_THROWS_AS(untransform_params(Eigen::Vector3d::Zero(), zero_beta), std::invalid_argument);
    CHECK_THROWS_AS(untransform_params(Eigen::Vector2d(NAN, 0), zero_beta), std::invalid_argument);
    CHECK(transform_params(MixtureParams{0.5, 1, CovarianceSpec::isotropic(2)}).size() == 2);

    SUBCASE("random round trips")
    {
        test::Gen gen(31);
        for (int k = 0; k < 1000; ++k)
        {
            bool aniso = k % 2 == 0;
            auto cov = aniso ? CovarianceSpec::anisotropic(gen.uniform(0.05, 20),
                                                           gen.uniform(1e-3, 3.1),
                                                           gen.uniform(1.001, 10))
                             : CovarianceSpec::isotropic(gen.uniform(0.05, 20));
            MixtureParams psi{gen.uniform(1e-3, 5), gen.uniform(0.5, 2), cov};
            auto v = transform_params(psi);
            CHECK(v.allFinite());
            auto r = untransform_params(v, psi);
            CHECK(std::fabs(r.beta - psi.beta) <= 1e-10 * std::max(1.0, psi.beta));
            CHECK(std::fabs(r.cov.rho - psi.cov.rho) <= 1e-10 * std::max(1.0, psi.cov.rho));
            CHECK(r.gamma == psi.gamma);
            CHECK(r.cov.kind == psi.cov.kind);
            if (aniso)
            {
                CHECK(std::fabs(r.cov.phi - psi.cov.phi) <= 1e-10);
                CHECK(std::fabs(r.cov.aspect - psi.cov.aspect) <= 1e-10 * psi.cov.aspect);
            }
        }
    }

    SUBCASE("every unconstrained vector maps into the domain")
    {
        test::Gen gen(32);
        MixtureParams like{0.5, 1, CovarianceSpec::anisotropic(1, 1, 2)};
        for (int k = 0; k < 1000; ++k)
        {
            Eigen::Vector4d v(gen.uniform(-30, 5), gen.uniform(-30, 5), gen.uniform(-40, 40),
                              gen.uniform(-30, 5));
            auto psi = untransform_params(v, like);
            CHECK(psi.cov.phi >= 0);
            CHECK(psi.cov.phi < std::numbers::pi);
            CHECK(psi.cov.aspect >= 1);
        }
    }
}

TEST_CASE("fitting")
{
    auto cfg = cheap_config();
    auto data = simulated(3, 40, cfg.threshold, 4);

    auto a = fit(data, cfg);
    CHECK(std::isfinite(a.loglik));
    CHECK(a.loglik >= full_loglik(cfg.init, data, cfg));
    CHECK(a.loglik == Approx(full_loglik(a.psi_hat, data, cfg)).epsilon(1e-12));
    CHECK(a.n_evals > 0);
    CHECK(a.wall_seconds >= 0);
    CHECK(!a.trace.empty());
    CHECK(a.psi_hat.gamma == 1);

    auto b = fit(data, cfg);
    CHECK(b.psi_hat.beta == a.psi_hat.beta);
    CHECK(b.psi_hat.cov.rho == a.psi_hat.cov.rho);
    CHECK(b.loglik == a.loglik);
}

TEST_CASE("fit configuration validation")
{
    auto bad = cheap_config();
    bad.max_iter = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cheap_config();
    bad.tol = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("json serialization")
{
    MixtureParams aniso{0.82, 1, CovarianceSpec::anisotropic(1.31, 1.10, 2.29)};
    auto p = params_from_json(params_to_json(aniso));
    CHECK(p.beta == aniso.beta);
    CHECK(p.cov.rho == aniso.cov.rho);
    CHECK(p.cov.phi == aniso.cov.phi);
    CHECK(p.cov.aspect == aniso.cov.aspect);
    CHECK(p.cov.kind == CovarianceKind::AnisotropicExponential);

    MixtureParams iso{0.3, 1.5, CovarianceSpec::isotropic(2)};
    auto q = params_from_json(params_to_json(iso));
    CHECK(q.gamma == 1.5);
    CHECK(q.cov.kind == CovarianceKind::IsotropicExponential);

    auto bad = params_to_json(iso);
    bad["kind"] = "matern";
    CHECK_THROWS(params_from_json(bad));
    bad = params_to_json(iso);
    bad["rho"] = -1;
    CHECK_THROWS_AS(params_from_json(bad), std::invalid_argument);

    auto cfg = cheap_config();
    cfg.lik.plan.strategy = NeighborStrategy::RandomShared;
    cfg.restart = false;
    auto j = fit_config_to_json(cfg);
    auto back = fit_config_from_json(j);
    CHECK(fit_config_to_json(back) == j);
    CHECK(back.lik.qmc.n_points == 97);
    CHECK(back.lik.plan.strategy == NeighborStrategy::RandomShared);

    j["schema_version"] = schema_version + 1;
    CHECK_THROWS_AS(fit_config_from_json(j), std::invalid_argument);

    FitResult result;
    result.psi_hat = aniso;
    result.loglik = -12.5;
    result.converged = true;
    auto out = fit_result_to_json(result, cfg);
    CHECK(out.at("loglik") == -12.5);
    CHECK(params_from_json(out.at("psi_hat")).cov.aspect == 2.29);
    CHECK(out.contains("config"));
}
