#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "vcdf/io.hpp"
#include "vcdf/mvn.hpp"
#include "vcdf/parallel.hpp"
#include "vcdf/rng.hpp"
#include "vcdf/scalemix.hpp"

namespace vcdf::cli
{
namespace
{
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string csv_safe(std::string s)
{
    for (auto& c : s)
    {
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    }
    return s;
}

std::ofstream open_output(std::filesystem::path const& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

nlohmann::json read_json(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw UsageError(path.string() + ": " + e.what());
    }
}

// Seeds for the bound vector of a scenario and for replication r.
constexpr std::uint64_t field_tag = 0x6669656c64ULL;
constexpr std::uint64_t qmc_tag = 0x716d63ULL;

}  // namespace

int report_exception(std::ostream& err)
{
    try
    {
        throw;
    }
    catch (NotPositiveDefinite const& e)
    {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }
    catch (NumericalFailure const& e)
    {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }
    catch (nlohmann::json::exception const& e)
    {
        err << "error: malformed JSON: " << e.what() << '\n';
        return exit_usage;
    }
    catch (std::exception const& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
}

Eigen::VectorXd scenario_bounds(std::span<Location const> locs,
                                CovarianceSpec const& spec,
                                std::uint64_t seed)
{
    return simulate_gp(locs, spec, seed);
}

std::string result_header()
{
    return "grid,dim,rho,method,m,p,strategy,n_points,replication,log_cdf,"
           "std_error,wall_time_seconds,plan_seconds,workers,error";
}

std::string format_row(ResultRow const& r)
{
    std::ostringstream os;
    os << r.grid << ',' << r.dim << ',' << format_double(r.rho) << ',' << r.method
       << ',' << r.m << ',' << r.p << ',' << r.strategy << ',' << r.n_points << ','
       << r.replication << ',' << format_double(r.log_cdf) << ','
       << format_double(r.std_error) << ',' << format_double(r.wall_time_seconds)
       << ',' << format_double(r.plan_seconds) << ',' << r.workers << ','
       << csv_safe(r.error);
    return os.str();
}

//---------------------------------------------------------------------------//
// SIMULATE
//---------------------------------------------------------------------------//

void cmd_simulate(SimulateOptions const& opts)
{
    if (opts.grid.n_side < 1 || !(opts.grid.spacing > 0))
        throw UsageError("grid needs n_side >= 1 and spacing > 0");
    opts.spec.validate();
    auto locs = make_grid(opts.grid.n_side, opts.grid.spacing);

    if (!opts.out.empty())
    {
        auto field = simulate_gp(locs, opts.spec, opts.seed);
        auto out = open_output(opts.out);
        out << "station_id,x,y,value\n";
        char buf[128];
        for (std::size_t i = 0; i < locs.size(); ++i)
        {
            std::snprintf(buf,
                          sizeof(buf),
                          "%zu,%.17g,%.17g,%.17g\n",
                          i + 1,
                          locs[i].x,
                          locs[i].y,
                          field[static_cast<Eigen::Index>(i)]);
            out << buf;
        }
        if (!out)
            throw std::runtime_error("failed writing '" + opts.out.string() + "'");
    }

    if (opts.replicates > 0)
    {
        if (opts.stations_out.empty() || opts.observations_out.empty())
            throw UsageError("mixture replicates need --stations and --observations");
        MixtureParams params{opts.beta, opts.gamma, opts.spec};
        params.validate();

        std::vector<Station> stations;
        Observations obs;
        for (std::size_t i = 0; i < locs.size(); ++i)
        {
            stations.push_back({"s" + std::to_string(i + 1), locs[i]});
            obs.station_ids.push_back(stations.back().id);
        }
        obs.values = simulate_mixture(locs, params, opts.replicates, opts.seed);
        for (std::size_t t = 0; t < opts.replicates; ++t)
            obs.times.push_back(std::to_string(t + 1));
        write_stations(opts.stations_out, stations);
        write_observations(opts.observations_out, obs);
    }
}

//---------------------------------------------------------------------------//
// CDF
//---------------------------------------------------------------------------//

ResultRow run_cdf(CdfOptions const& opts, std::size_t replication)
{
    opts.spec.validate();
    auto locs = make_grid(opts.grid.n_side, opts.grid.spacing);
    Eigen::VectorXd upper = scenario_bounds(locs, opts.spec, opts.seed);

    QmcConfig qmc = opts.qmc;
    qmc.seed = derive_seed(opts.seed, replication, qmc_tag);
    qmc.validate();

    ResultRow row;
    row.grid = opts.grid.n_side;
    row.dim = locs.size();
    row.rho = opts.spec.rho;
    row.method = opts.method;
    row.n_points = qmc.n_points;
    row.replication = replication;
    row.workers = opts.workers;

    LogProbEstimate est;
    if (opts.method == "vecchia")
    {
        row.m = opts.plan.m;
        row.p = opts.plan.p;
        row.strategy = to_string(opts.plan.strategy);
        auto start = Clock::now();
        auto plan = build_plan(locs, opts.spec, opts.plan);
        row.plan_seconds = seconds_since(start);
        if (!opts.plan_out.empty())
        {
            auto out = open_output(opts.plan_out);
            out << plan_to_json(plan).dump(1) << '\n';
        }
        start = Clock::now();
        est = vecchia_log_cdf(upper, locs, opts.spec, plan, qmc, opts.workers);
        row.wall_time_seconds = seconds_since(start);
    }
    else if (opts.method == "qmc")
    {
        auto start = Clock::now();
        est = qmc_mvn_cdf(upper, build_covariance(locs, opts.spec), qmc);
        row.wall_time_seconds = seconds_since(start);
    }
    else
    {
        throw UsageError("unknown method '" + opts.method + "' (vecchia or qmc)");
    }
    if (std::isnan(est.log_value))
        throw NumericalFailure("log CDF estimate is NaN");
    row.log_cdf = est.log_value;
    row.std_error = est.std_error;
    return row;
}

//---------------------------------------------------------------------------//
// SIMULATION STUDY
//---------------------------------------------------------------------------//

void ExperimentSpec::validate() const
{
    if (grids.empty() || rhos.empty() || ps.empty() || strategies.empty())
        throw UsageError("grid, range, p and strategy lists must be nonempty");
    // Either method list may be empty so a single-method cell is expressible.
    if (ms.empty() && qmc_sizes.empty())
        throw UsageError("experiment needs at least one m value or qmc size");
    for (auto n : qmc_sizes)
    {
        if (!is_prime(n))
            throw UsageError("qmc size " + std::to_string(n) + " is not prime");
    }
    if (!is_prime(vecchia_points))
        throw UsageError("vecchia_points must be prime");
    if (n_shifts < 2)
        throw UsageError("n_shifts must be >= 2");
    if (replications < 1)
        throw UsageError("replications must be >= 1");
    for (auto g : grids)
    {
        if (g < 1)
            throw UsageError("grid sizes must be >= 1");
    }
    for (auto r : rhos)
    {
        if (!(r > 0))
            throw UsageError("ranges must be > 0");
    }
    for (auto m : ms)
    {
        if (m < 1)
            throw UsageError("m values must be >= 1");
    }
    for (auto p : ps)
    {
        if (p < 1)
            throw UsageError("p values must be >= 1");
    }
}

ExperimentSpec experiment_from_json(nlohmann::json const& j)
{
    ExperimentSpec spec;
    int const version = j.value("schema_version", schema_version);
    if (version != schema_version)
        throw UsageError("unsupported experiment schema_version "
                         + std::to_string(version));
    spec.grids = j.value("grids", spec.grids);
    spec.rhos = j.value("rhos", spec.rhos);
    spec.ms = j.value("ms", spec.ms);
    spec.ps = j.value("ps", spec.ps);
    if (j.contains("strategies"))
    {
        spec.strategies.clear();
        for (auto const& s : j.at("strategies"))
            spec.strategies.push_back(neighbor_strategy_from_string(s.get<std::string>()));
    }
    spec.qmc_sizes = j.value("qmc_sizes", spec.qmc_sizes);
    spec.vecchia_points = j.value("vecchia_points", spec.vecchia_points);
    spec.n_shifts = j.value("n_shifts", spec.n_shifts);
    spec.replications = j.value("replications", spec.replications);
    spec.max_qmc_dim = j.value("max_qmc_dim", spec.max_qmc_dim);
    spec.record_timing = j.value("record_timing", spec.record_timing);
    spec.seed = j.value("seed", spec.seed);
    spec.workers = j.value("workers", spec.workers);
    spec.validate();
    return spec;
}

nlohmann::json experiment_to_json(ExperimentSpec const& spec)
{
    std::vector<std::string> strategies;
    for (auto s : spec.strategies)
        strategies.emplace_back(to_string(s));
    return {
        {"schema_version", schema_version},
        {"grids", spec.grids},
        {"rhos", spec.rhos},
        {"ms", spec.ms},
        {"ps", spec.ps},
        {"strategies", strategies},
        {"qmc_sizes", spec.qmc_sizes},
        {"vecchia_points", spec.vecchia_points},
        {"n_shifts", spec.n_shifts},
        {"replications", spec.replications},
        {"max_qmc_dim", spec.max_qmc_dim},
        {"record_timing", spec.record_timing},
        {"seed", spec.seed},
        {"workers", spec.workers},
    };
}

std::size_t cmd_simstudy(ExperimentSpec const& spec, std::ostream& out)
{
    spec.validate();
    out << result_header() << '\n';
    std::size_t n_rows = 0;
    auto emit = [&](ResultRow row) {
        if (!spec.record_timing)
        {
            row.wall_time_seconds = 0;
            row.plan_seconds = 0;
        }
        out << format_row(row) << '\n' << std::flush;
        ++n_rows;
    };

    for (auto n_side : spec.grids)
    {
        for (std::size_t ri = 0; ri < spec.rhos.size(); ++ri)
        {
            auto const cov = CovarianceSpec::isotropic(spec.rhos[ri]);
            auto const locs = make_grid(n_side, 1.0);
            ResultRow base;
            base.grid = n_side;
            base.dim = locs.size();
            base.rho = cov.rho;
            base.workers = spec.workers;

            std::optional<Eigen::VectorXd> upper;
            std::string scenario_error;
            try
            {
                upper = scenario_bounds(locs, cov, derive_seed(spec.seed, n_side, ri));
            }
            catch (std::exception const& e)
            {
                scenario_error = e.what();
            }

            auto run_method = [&](ResultRow proto, auto&& evaluate) {
                for (std::size_t r = 0; r < spec.replications; ++r)
                {
                    ResultRow row = proto;
                    row.replication = r;
                    if (!scenario_error.empty())
                    {
                        row.error = scenario_error;
                        emit(row);
                        continue;
                    }
                    QmcConfig qmc{row.n_points, spec.n_shifts, derive_seed(spec.seed, r, qmc_tag)};
                    try
                    {
                        auto start = Clock::now();
                        auto est = evaluate(qmc);
                        row.wall_time_seconds = seconds_since(start);
                        row.log_cdf = est.log_value;
                        row.std_error = est.std_error;
                        if (std::isnan(est.log_value))
                            row.error = "NaN estimate";
                    }
                    catch (std::exception const& e)
                    {
                        row.error = e.what();
                    }
                    emit(row);
                }
            };

            for (auto strategy : spec.strategies)
            {
                for (auto p : spec.ps)
                {
                    for (auto m : spec.ms)
                    {
                        ResultRow proto = base;
                        proto.method = "vecchia";
                        proto.m = m;
                        proto.p = p;
                        proto.strategy = to_string(strategy);
                        proto.n_points = spec.vecchia_points;

                        std::optional<CondSetPlan> plan;
                        std::string plan_error;
                        auto start = Clock::now();
                        try
                        {
                            plan = build_plan(locs, cov, {m, p, strategy, OrderingKind::Lexicographic, spec.seed});
                        }
                        catch (std::exception const& e)
                        {
                            plan_error = e.what();
                        }
                        proto.plan_seconds = seconds_since(start);

                        run_method(proto, [&](QmcConfig const& qmc) {
                            if (!plan)
                                throw std::runtime_error(plan_error);
                            return vecchia_log_cdf(*upper, locs, cov, *plan, qmc, spec.workers);
                        });
                    }
                }
            }

            for (auto n_points : spec.qmc_sizes)
            {
                ResultRow proto = base;
                proto.method = "qmc";
                proto.n_points = n_points;
                std::optional<Eigen::MatrixXd> sigma;
                run_method(proto, [&](QmcConfig const& qmc) {
                    if (locs.size() > spec.max_qmc_dim)
                    {
                        throw std::runtime_error("dimension exceeds max_qmc_dim "
                                                 + std::to_string(spec.max_qmc_dim));
                    }
                    if (!sigma)
                        sigma = build_covariance(locs, cov);
                    return qmc_mvn_cdf(*upper, *sigma, qmc);
                });
            }
        }
    }
    return n_rows;
}

//---------------------------------------------------------------------------//
// SCALING
//---------------------------------------------------------------------------//

ScalingSummary cmd_scaling(ScalingOptions const& opts, std::ostream& out)
{
    if (opts.workers.empty() || opts.repeats < 1)
        throw UsageError("scaling needs at least one worker count and repeat");
    for (auto w : opts.workers)
    {
        if (w < 1)
            throw UsageError("worker counts must be >= 1");
    }
    opts.qmc.validate();

    auto const cov = CovarianceSpec::isotropic(opts.rho);
    auto const locs = make_grid(opts.grid.n_side, opts.grid.spacing);
    Eigen::VectorXd upper = scenario_bounds(locs, cov, derive_seed(opts.seed, field_tag));
    auto start = Clock::now();
    auto plan = build_plan(locs, cov, opts.plan);
    double const plan_seconds = seconds_since(start);

    QmcConfig qmc = opts.qmc;
    qmc.seed = opts.seed;
    unsigned const hardware = std::max(1u, std::thread::hardware_concurrency());

    struct Run
    {
        unsigned workers;
        std::size_t repeat;
        LogProbEstimate est;
        double seconds;
    };
    std::vector<Run> runs;
    for (auto w : opts.workers)
    {
        if (w > hardware)
        {
            std::clog << "warning: " << w << " workers exceed the " << hardware
                      << " available hardware threads\n";
        }
        for (std::size_t r = 0; r < opts.repeats; ++r)
        {
            start = Clock::now();
            auto est = vecchia_log_cdf(upper, locs, cov, plan, qmc, w);
            runs.push_back({w, r, est, seconds_since(start)});
        }
    }

    ScalingSummary summary;
    for (auto const& run : runs)
    {
        summary.identical = summary.identical
                            && run.est.log_value == runs.front().est.log_value
                            && run.est.std_error == runs.front().est.std_error;
    }
    for (auto w : opts.workers)
    {
        std::vector<double> times;
        for (auto const& run : runs)
        {
            if (run.workers == w)
                times.push_back(run.seconds);
        }
        std::sort(times.begin(), times.end());
        auto const k = times.size();
        summary.median_seconds.push_back(k % 2 ? times[k / 2]
                                               : 0.5 * (times[k / 2 - 1] + times[k / 2]));
    }
    auto baseline_pos = std::find(opts.workers.begin(), opts.workers.end(), 1u);
    double const baseline = summary.median_seconds[static_cast<std::size_t>(
        baseline_pos == opts.workers.end() ? 0 : baseline_pos - opts.workers.begin())];

    out << "grid,dim,m,p,workers,repeat,log_cdf,std_error,wall_time_seconds,"
           "plan_seconds,speedup,identical,oversubscribed\n";
    for (auto const& run : runs)
    {
        auto pos = static_cast<std::size_t>(
            std::find(opts.workers.begin(), opts.workers.end(), run.workers)
            - opts.workers.begin());
        double const speedup = baseline / summary.median_seconds[pos];
        out << opts.grid.n_side << ',' << locs.size() << ',' << opts.plan.m << ','
            << opts.plan.p << ',' << run.workers << ',' << run.repeat << ','
            << format_double(run.est.log_value) << ','
            << format_double(run.est.std_error) << ','
            << format_double(opts.record_timing ? run.seconds : 0) << ','
            << format_double(opts.record_timing ? plan_seconds : 0) << ','
            << format_double(opts.record_timing ? speedup : 0) << ','
            << (summary.identical ? 1 : 0) << ',' << (run.workers > hardware ? 1 : 0)
            << '\n';
    }
    if (!summary.identical)
        throw NumericalFailure("log CDF differs across worker counts");
    return summary;
}

//---------------------------------------------------------------------------//
// FIT
//---------------------------------------------------------------------------//

FitInputs load_fit_inputs(std::filesystem::path const& stations_csv,
                          std::filesystem::path const& observations_csv)
{
    auto stations = read_stations(stations_csv);
    auto obs = read_observations(observations_csv);

    std::map<std::string, Location> by_id;
    for (std::size_t i = 0; i < stations.size(); ++i)
    {
        if (!by_id.emplace(stations[i].id, stations[i].loc).second)
        {
            throw DataError(stations_csv.string() + ": row " + std::to_string(i + 2)
                            + ": duplicate station id '" + stations[i].id + "'");
        }
    }

    FitInputs inputs;
    inputs.missing_fraction = obs.missing_fraction();
    std::set<std::string> seen;
    std::vector<Eigen::Index> keep;
    for (std::size_t c = 0; c < obs.station_ids.size(); ++c)
    {
        auto const& id = obs.station_ids[c];
        if (!seen.insert(id).second)
        {
            throw DataError(observations_csv.string() + ": row 1, column "
                            + std::to_string(c + 2) + ": duplicate station id '" + id
                            + "'");
        }
        auto it = by_id.find(id);
        if (it == by_id.end())
        {
            throw DataError(observations_csv.string() + ": row 1, column "
                            + std::to_string(c + 2) + ": station '" + id
                            + "' is not in " + stations_csv.string());
        }
        auto col = static_cast<Eigen::Index>(c);
        if (obs.values.rows() == 0 || obs.values.col(col).array().isNaN().all())
        {
            std::clog << "warning: station '" << id
                      << "' has no observations and is dropped\n";
            inputs.dropped_stations.push_back(id);
            continue;
        }
        keep.push_back(col);
        inputs.station_ids.push_back(id);
        inputs.locs.push_back(it->second);
    }
    if (keep.empty())
        throw DataError(observations_csv.string() + ": no station has observations");

    inputs.raw.resize(obs.values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
        inputs.raw.col(static_cast<Eigen::Index>(k)) = obs.values.col(keep[k]);
    return inputs;
}

nlohmann::json cmd_fit(std::filesystem::path const& stations_csv,
                       std::filesystem::path const& observations_csv,
                       FitConfig const& cfg)
{
    cfg.validate();
    auto inputs = load_fit_inputs(stations_csv, observations_csv);
    auto uniform = rank_transform(inputs.raw);
    auto data = make_dataset(inputs.locs, uniform, cfg.threshold);

    auto result = fit(data, cfg);
    if (!std::isfinite(result.loglik))
        throw NumericalFailure("log-likelihood at the estimate is not finite");

    auto j = fit_result_to_json(result, cfg);
    j["missing_fraction"] = inputs.missing_fraction;
    j["n_times"] = inputs.raw.rows();
    j["station_ids"] = inputs.station_ids;
    j["dropped_stations"] = inputs.dropped_stations;
    return j;
}

//---------------------------------------------------------------------------//
// CHI MAP
//---------------------------------------------------------------------------//

MixtureParams params_from_any_json(nlohmann::json const& j)
{
    if (j.contains("psi_hat"))
        return params_from_json(j.at("psi_hat"));
    return params_from_json(j);
}

void cmd_chimap(ChiMapOptions const& opts, std::ostream& out)
{
    if (!(opts.u > 0 && opts.u < 1))
        throw UsageError("u must lie in (0, 1)");
    if (!(opts.step > 0) || !(opts.extent >= 0))
        throw UsageError("chimap needs step > 0 and extent >= 0");
    opts.params.validate();

    MixtureModel model(opts.params, opts.quad);
    auto const n = static_cast<std::size_t>(std::llround(2 * opts.extent / opts.step)) + 1;
    std::vector<Location> points;
    for (std::size_t row = 0; row < n; ++row)
    {
        for (std::size_t col = 0; col < n; ++col)
        {
            points.push_back({opts.reference.x - opts.extent + col * opts.step,
                              opts.reference.y - opts.extent + row * opts.step});
        }
    }
    std::vector<double> chi(points.size());
    parallel_for(points.size(), opts.workers, [&](std::size_t i) {
        chi[i] = chi_u(opts.reference, points[i], opts.u, model);
    });

    out << "x,y,chi\n";
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        out << format_double(points[i].x) << ',' << format_double(points[i].y) << ','
            << format_double(chi[i]) << '\n';
    }
}

//---------------------------------------------------------------------------//
// COMMAND LINE
//---------------------------------------------------------------------------//

namespace
{
struct CovarianceArgs
{
    double rho = 1;
    double phi = 0;
    double aspect = 1;

    void add_to(CLI::App& sub)
    {
        sub.add_option("--rho", rho, "Range parameter")->capture_default_str();
        sub.add_option("--phi", phi, "Rotation angle in [0, pi)")->capture_default_str();
        sub.add_option("--aspect", aspect, "Aspect ratio >= 1")->capture_default_str();
    }

    CovarianceSpec spec() const
    {
        if (phi == 0 && aspect == 1)
            return CovarianceSpec::isotropic(rho);
        return CovarianceSpec::anisotropic(rho, phi, aspect);
    }
};

void write_text(std::filesystem::path const& path, std::string const& text, std::ostream& out)
{
    if (path.empty())
    {
        out << text;
        return;
    }
    auto file = open_output(path);
    file << text;
    if (!file)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Vecchia approximations of Gaussian CDFs and scale-mixture extremes"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::filesystem::path out_path;
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_option("--workers", workers, "Worker threads (0 = all cores)")
        ->capture_default_str();
    app.add_option("--out", out_path, "Output file (stdout when omitted)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate a Gaussian field on a grid");
    SimulateOptions sim_opts;
    CovarianceArgs sim_cov;
    sim->add_option("--grid", sim_opts.grid.n_side, "Grid side length")->capture_default_str();
    sim->add_option("--spacing", sim_opts.grid.spacing)->capture_default_str();
    sim_cov.add_to(*sim);
    sim->add_option("--replicates", sim_opts.replicates, "Scale-mixture replicates to draw");
    sim->add_option("--beta", sim_opts.beta)->capture_default_str();
    sim->add_option("--gamma", sim_opts.gamma)->capture_default_str();
    sim->add_option("--stations", sim_opts.stations_out, "Station CSV for mixture data");
    sim->add_option("--observations", sim_opts.observations_out,
                    "Observation CSV for mixture data");

    // cdf
    auto* cdf = app.add_subcommand("cdf", "One Vecchia or direct QMC log-CDF evaluation");
    CdfOptions cdf_opts;
    CovarianceArgs cdf_cov;
    std::string cdf_strategy = "nearest";
    std::string cdf_ordering = "lexicographic";
    std::size_t cdf_rep = 0;
    cdf->add_option("--grid", cdf_opts.grid.n_side)->capture_default_str();
    cdf->add_option("--spacing", cdf_opts.grid.spacing)->capture_default_str();
    cdf_cov.add_to(*cdf);
    cdf->add_option("--method", cdf_opts.method, "vecchia or qmc")->capture_default_str();
    cdf->add_option("--m", cdf_opts.plan.m)->capture_default_str();
    cdf->add_option("--p", cdf_opts.plan.p)->capture_default_str();
    cdf->add_option("--strategy", cdf_strategy)->capture_default_str();
    cdf->add_option("--ordering", cdf_ordering)->capture_default_str();
    cdf->add_option("--n-points", cdf_opts.qmc.n_points)->capture_default_str();
    cdf->add_option("--n-shifts", cdf_opts.qmc.n_shifts)->capture_default_str();
    cdf->add_option("--replication", cdf_rep, "Replication id (selects the QMC seed)");
    cdf->add_option("--plan-out", cdf_opts.plan_out, "Write the plan as JSON");

    // simstudy
    auto* study = app.add_subcommand("simstudy", "Crossed Vecchia vs QMC study");
    std::filesystem::path study_spec;
    bool study_no_timing = false;
    study->add_option("--spec", study_spec, "ExperimentSpec JSON (defaults when omitted)");
    study->add_flag("--no-timing", study_no_timing, "Write zero timings");

    // scaling
    auto* scale = app.add_subcommand("scaling", "Time the Vecchia CDF across worker counts");
    ScalingOptions scale_opts;
    std::string scale_strategy = "nearest";
    bool scale_no_timing = false;
    scale->add_option("--grid", scale_opts.grid.n_side)->capture_default_str();
    scale->add_option("--spacing", scale_opts.grid.spacing)->capture_default_str();
    scale->add_option("--rho", scale_opts.rho)->capture_default_str();
    scale->add_option("--m", scale_opts.plan.m)->capture_default_str();
    scale->add_option("--p", scale_opts.plan.p)->capture_default_str();
    scale->add_option("--strategy", scale_strategy)->capture_default_str();
    scale->add_option("--n-points", scale_opts.qmc.n_points)->capture_default_str();
    scale->add_option("--n-shifts", scale_opts.qmc.n_shifts)->capture_default_str();
    scale->add_option("--worker-counts", scale_opts.workers, "Comma-separated list")
        ->delimiter(',')
        ->capture_default_str();
    scale->add_option("--repeats", scale_opts.repeats)->capture_default_str();
    scale->add_flag("--no-timing", scale_no_timing, "Write zero timings");

    // fit
    auto* fitcmd = app.add_subcommand("fit", "Censored-likelihood fit of the scale mixture");
    std::filesystem::path fit_stations, fit_obs, fit_config;
    fitcmd->add_option("--stations", fit_stations, "Station CSV")->required();
    fitcmd->add_option("--observations", fit_obs, "Observation CSV")->required();
    fitcmd->add_option("--config", fit_config, "FitConfig JSON")->required();

    // chimap
    auto* chimap = app.add_subcommand("chimap", "Tail dependence around a reference site");
    ChiMapOptions chi_opts;
    std::filesystem::path chi_psi;
    CovarianceArgs chi_cov;
    double chi_beta = 0.5;
    double chi_gamma = 1.0;
    std::vector<double> chi_ref{0, 0};
    chimap->add_option("--psi", chi_psi, "Parameter or fit result JSON");
    chimap->add_option("--beta", chi_beta)->capture_default_str();
    chimap->add_option("--gamma", chi_gamma)->capture_default_str();
    chi_cov.add_to(*chimap);
    chimap->add_option("--ref", chi_ref, "Reference location x,y")
        ->delimiter(',')
        ->expected(2);
    chimap->add_option("--u", chi_opts.u)->capture_default_str();
    chimap->add_option("--extent", chi_opts.extent)->capture_default_str();
    chimap->add_option("--step", chi_opts.step)->capture_default_str();
    chimap->add_option("--nodes", chi_opts.quad.n_nodes)->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int const code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try
    {
        if (*sim)
        {
            sim_opts.spec = sim_cov.spec();
            sim_opts.seed = seed;
            sim_opts.out = out_path;
            if (out_path.empty() && sim_opts.replicates == 0)
                throw UsageError("simulate needs --out or --replicates");
            cmd_simulate(sim_opts);
        }
        else if (*cdf)
        {
            cdf_opts.spec = cdf_cov.spec();
            cdf_opts.plan.strategy = neighbor_strategy_from_string(cdf_strategy);
            cdf_opts.plan.ordering = ordering_kind_from_string(cdf_ordering);
            cdf_opts.plan.seed = seed;
            cdf_opts.seed = seed;
            cdf_opts.workers = workers;
            auto row = run_cdf(cdf_opts, cdf_rep);
            write_text(out_path, result_header() + "\n" + format_row(row) + "\n", out);
        }
        else if (*study)
        {
            ExperimentSpec spec;
            if (!study_spec.empty())
                spec = experiment_from_json(read_json(study_spec));
            if (app.count("--seed"))
                spec.seed = seed;
            if (app.count("--workers"))
                spec.workers = workers;
            if (study_no_timing)
                spec.record_timing = false;
            if (out_path.empty())
            {
                cmd_simstudy(spec, out);
            }
            else
            {
                auto file = open_output(out_path);
                cmd_simstudy(spec, file);
            }
        }
        else if (*scale)
        {
            scale_opts.plan.strategy = neighbor_strategy_from_string(scale_strategy);
            scale_opts.plan.seed = seed;
            scale_opts.seed = seed;
            scale_opts.record_timing = !scale_no_timing;
            std::ostringstream buffer;
            try
            {
                cmd_scaling(scale_opts, buffer);
            }
            catch (NumericalFailure const&)
            {
                write_text(out_path, buffer.str(), out);
                throw;
            }
            write_text(out_path, buffer.str(), out);
        }
        else if (*fitcmd)
        {
            auto cfg = fit_config_from_json(read_json(fit_config));
            if (app.count("--seed"))
                cfg.seed = seed;
            if (app.count("--workers"))
                cfg.lik.workers = workers;
            auto j = cmd_fit(fit_stations, fit_obs, cfg);
            write_text(out_path, j.dump(2) + "\n", out);
        }
        else if (*chimap)
        {
            if (!chi_psi.empty())
            {
                chi_opts.params = params_from_any_json(read_json(chi_psi));
            }
            else
            {
                chi_opts.params = {chi_beta, chi_gamma, chi_cov.spec()};
            }
            chi_opts.reference = {chi_ref.at(0), chi_ref.at(1)};
            chi_opts.workers = workers;
            std::ostringstream buffer;
            cmd_chimap(chi_opts, buffer);
            write_text(out_path, buffer.str(), out);
        }
    }
    catch (...)
    {
        return report_exception(err);
    }
    return exit_ok;
}

}  // namespace vcdf::cli
