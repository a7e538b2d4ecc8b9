#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcdf/covariance.hpp"
#include "vcdf/inference.hpp"
#include "vcdf/vecchia.hpp"

namespace vcdf::cli
{
//! Bad arguments or configuration; exit code 1.
class UsageError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! A computation produced an unusable result; exit code 2.
class NumericalFailure : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int
{
    exit_ok = 0,
    exit_usage = 1,
    exit_numerical = 2
};

//! Map the exception in flight to an exit code, printing it to err.
int report_exception(std::ostream& err);

//---------------------------------------------------------------------------//
// SHARED PIECES
//---------------------------------------------------------------------------//

struct GridSpec
{
    std::size_t n_side = 15;
    double spacing = 1.0;
};

//! Bound vector used for a scenario: one GP draw seeded by the scenario.
Eigen::VectorXd scenario_bounds(std::span<Location const> locs,
                                CovarianceSpec const& spec,
                                std::uint64_t seed);

struct ResultRow
{
    std::size_t grid = 0;
    std::size_t dim = 0;
    double rho = 0;
    std::string method;  // "vecchia" or "qmc"
    std::size_t m = 0;
    std::size_t p = 0;
    std::string strategy;
    std::uint64_t n_points = 0;
    std::size_t replication = 0;
    double log_cdf = 0;
    double std_error = 0;
    double wall_time_seconds = 0;
    double plan_seconds = 0;
    unsigned workers = 1;
    std::string error;
};

std::string result_header();
std::string format_row(ResultRow const& row);

//---------------------------------------------------------------------------//
// SIMULATE
//---------------------------------------------------------------------------//

struct SimulateOptions
{
    GridSpec grid;
    CovarianceSpec spec;
    std::uint64_t seed = 1;
    std::filesystem::path out;
    //! Non-zero: also draw this many scale-mixture replicates.
    std::size_t replicates = 0;
    double beta = 0.5;
    double gamma = 1.0;
    std::filesystem::path stations_out;
    std::filesystem::path observations_out;
};

//! Writes `station_id,x,y,value` for one GP draw, plus optional mixture data.
void cmd_simulate(SimulateOptions const& opts);

//---------------------------------------------------------------------------//
// CDF
//---------------------------------------------------------------------------//

struct CdfOptions
{
    GridSpec grid;
    CovarianceSpec spec;
    std::string method = "vecchia";
    PlanSettings plan;
    QmcConfig qmc;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::filesystem::path plan_out;
};

ResultRow run_cdf(CdfOptions const& opts, std::size_t replication = 0);

//---------------------------------------------------------------------------//
// SIMULATION STUDY
//---------------------------------------------------------------------------//

struct ExperimentSpec
{
    std::vector<std::size_t> grids{15, 30, 50, 75, 100};
    std::vector<double> rhos{1, 5};
    std::vector<std::size_t> ms{5, 10, 30, 50};
    std::vector<std::size_t> ps{1};
    std::vector<NeighborStrategy> strategies{NeighborStrategy::NearestPerElement};
    //! Lattice sizes for the direct QMC methods.
    std::vector<std::uint64_t> qmc_sizes{499, 3607};
    //! Lattice size used inside every Vecchia term.
    std::uint64_t vecchia_points = 499;
    std::uint32_t n_shifts = 10;
    std::size_t replications = 5;
    //! Direct QMC above this dimension is recorded as an error row.
    std::size_t max_qmc_dim = 2500;
    bool record_timing = true;
    std::uint64_t seed = 1;
    unsigned workers = 1;

    void validate() const;
};

ExperimentSpec experiment_from_json(nlohmann::json const& j);
nlohmann::json experiment_to_json(ExperimentSpec const& spec);

//! Runs the crossed design, writing rows to out as they finish.
std::size_t cmd_simstudy(ExperimentSpec const& spec, std::ostream& out);

//---------------------------------------------------------------------------//
// SCALING
//---------------------------------------------------------------------------//

struct ScalingOptions
{
    GridSpec grid{50, 1.0};
    double rho = 1;
    PlanSettings plan{10, 1};
    QmcConfig qmc;
    std::vector<unsigned> workers{1};
    std::size_t repeats = 3;
    bool record_timing = true;
    std::uint64_t seed = 1;
};

struct ScalingSummary
{
    bool identical = true;
    std::vector<double> median_seconds;  // per worker count
};

//! Throws NumericalFailure when outputs differ across worker counts.
ScalingSummary cmd_scaling(ScalingOptions const& opts, std::ostream& out);

//---------------------------------------------------------------------------//
// FIT
//---------------------------------------------------------------------------//

struct FitInputs
{
    std::vector<std::string> station_ids;
    std::vector<Location> locs;
    Eigen::MatrixXd raw;  // T x D, NaN missing
    std::vector<std::string> dropped_stations;
    double missing_fraction = 0;
};

//! Joins stations and observations and drops all-missing stations.
FitInputs load_fit_inputs(std::filesystem::path const& stations_csv,
                          std::filesystem::path const& observations_csv);

nlohmann::json cmd_fit(std::filesystem::path const& stations_csv,
                       std::filesystem::path const& observations_csv,
                       FitConfig const& cfg);

//---------------------------------------------------------------------------//
// CHI MAP
//---------------------------------------------------------------------------//

struct ChiMapOptions
{
    MixtureParams params;
    Location reference;
    double u = 0.95;
    double extent = 5;
    double step = 0.5;
    QuadratureConfig quad;
    unsigned workers = 1;
};

//! Accepts a bare parameter object or a fit result containing psi_hat.
MixtureParams params_from_any_json(nlohmann::json const& j);

void cmd_chimap(ChiMapOptions const& opts, std::ostream& out);

//---------------------------------------------------------------------------//
//! Parse and run a full command line; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vcdf::cli
