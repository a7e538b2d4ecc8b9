#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "scalemix.hpp"

namespace vcdf
{
//---------------------------------------------------------------------------//
// DATA
//---------------------------------------------------------------------------//

struct Dataset
{
    std::vector<Location> locs;
    std::vector<Replicate> replicates;
    double missing_fraction = 0;
};

//! Censor a uniform-scale T x D matrix (NaN = missing) at the threshold.
Dataset make_dataset(std::vector<Location> locs,
                     Eigen::MatrixXd const& uniform,
                     double threshold);

//! Raw T x D draws of R_t * W_t(s) with independent replicates.
Eigen::MatrixXd simulate_mixture(std::span<Location const> locs,
                                 MixtureParams const& params,
                                 std::size_t n_replicates,
                                 std::uint64_t seed);

//---------------------------------------------------------------------------//
// PARAMETER TRANSFORMS
//---------------------------------------------------------------------------//

/*!
 * Unconstrained coordinates: (log beta, log rho) for the isotropic model,
 * followed by (logit(phi / pi), log(A - 1)) when anisotropic.
 */
Eigen::VectorXd transform_params(MixtureParams const& psi);

//! Inverse of transform_params; kind and gamma come from the template.
MixtureParams untransform_params(Eigen::VectorXd const& v,
                                 MixtureParams const& like);

//---------------------------------------------------------------------------//
// NELDER-MEAD
//---------------------------------------------------------------------------//

struct NelderMeadOptions
{
    std::size_t max_iter = 500;
    //! Stop when both simplex diameter and function spread fall below this.
    double tol = 1e-6;
    double initial_step = 0.5;
    bool restart = false;
    bool keep_trace = false;
};

struct NelderMeadStep
{
    std::size_t iteration = 0;
    double best_value = 0;
    Eigen::VectorXd best_point;
};

struct NelderMeadResult
{
    Eigen::VectorXd x;
    double value = 0;
    std::size_t n_evals = 0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<NelderMeadStep> trace;
};

using Objective = std::function<double(Eigen::VectorXd const&)>;

/*!
 * Minimize with reflection 1, expansion 2, contraction 0.5, shrink 0.5.
 * Non-finite objective values are treated as +inf.
 */
NelderMeadResult nelder_mead(Objective const& objective,
                             Eigen::VectorXd const& init,
                             NelderMeadOptions const& opts);

//---------------------------------------------------------------------------//
// LIKELIHOOD AND FITTING
//---------------------------------------------------------------------------//

struct FitConfig
{
    MixtureParams init;
    std::size_t max_iter = 300;
    double tol = 1e-4;
    double initial_step = 0.5;
    bool restart = true;
    bool keep_trace = true;
    std::uint64_t seed = 1;
    double threshold = 0.95;
    LikelihoodConfig lik;

    void validate() const;
};

struct LoglikSummary
{
    double value = 0;
    std::size_t n_dropped = 0;
    double std_error = 0;
};

/*!
 * Sum of per-replicate censored log-likelihoods. Every replicate uses the
 * same QMC seed (cfg.seed), so the result is a deterministic function of psi.
 * Replicates whose likelihood underflows are dropped and counted.
 */
LoglikSummary full_loglik_detail(MixtureParams const& psi,
                                 Dataset const& data,
                                 FitConfig const& cfg);

double full_loglik(MixtureParams const& psi, Dataset const& data, FitConfig const& cfg);

struct FitResult
{
    MixtureParams psi_hat;
    double loglik = 0;
    std::size_t n_evals = 0;
    std::size_t n_dropped = 0;
    bool converged = false;
    double wall_seconds = 0;
    std::vector<NelderMeadStep> trace;
};

FitResult fit(Dataset const& data, FitConfig const& cfg);

//---------------------------------------------------------------------------//
// SERIALIZATION
//---------------------------------------------------------------------------//

inline constexpr int schema_version = 1;

nlohmann::json params_to_json(MixtureParams const& p);
MixtureParams params_from_json(nlohmann::json const& j);
nlohmann::json fit_config_to_json(FitConfig const& cfg);
FitConfig fit_config_from_json(nlohmann::json const& j);
nlohmann::json fit_result_to_json(FitResult const& result, FitConfig const& cfg);

}  // namespace vcdf
