#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"
#include "mvn.hpp"
#include "vecchia.hpp"

namespace vcdf
{
//---------------------------------------------------------------------------//
// MODEL PARAMETERS
//---------------------------------------------------------------------------//

/*!
 * Scale mixture X(s) = R * W(s) with W a unit-variance exponential Gaussian
 * process and R >= 1 drawn from
 *
 *   F_R(r) = 1 - exp(-gamma (r^beta - 1) / beta)   beta > 0
 *   F_R(r) = 1 - r^(-gamma)                        beta = 0
 *
 * beta > 0 gives asymptotic independence, beta = 0 asymptotic dependence.
 */
struct MixtureParams
{
    double beta = 0.5;
    double gamma = 1.0;
    CovarianceSpec cov;

    void validate() const;
};

double mixing_cdf(double r, MixtureParams const& params);
double mixing_pdf(double r, MixtureParams const& params);
//! Closed-form inverse of the mixing CDF; +inf at u = 1.
double mixing_quantile(double u, MixtureParams const& params);

//---------------------------------------------------------------------------//
// RADIAL QUADRATURE
//---------------------------------------------------------------------------//

struct QuadratureConfig
{
    std::size_t n_nodes = 100;

    void validate() const;
};

//! Gauss-Legendre nodes and weights on (0, 1); weights sum to one.
struct UnitRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

//! Cached per node count; safe to call concurrently.
UnitRule const& gauss_legendre_unit(std::size_t n_nodes);

/*!
 * Radii r_k = F_R^{-1}(u_k) at the Gauss-Legendre nodes in u = F_R(r).
 *
 * Any integral over R becomes sum_k w_k h(r_k), since f_R(r) dr = du.
 */
class MixtureModel
{
  public:
    MixtureModel(MixtureParams const& params, QuadratureConfig const& quad);

    MixtureParams const& params() const { return params_; }
    std::span<double const> radii() const { return radii_; }
    std::span<double const> log_weights() const { return log_weights_; }

    double marginal_cdf(double x) const;
    double marginal_pdf(double x) const;
    double marginal_log_pdf(double x) const;
    //! Bracketed Newton/bisection; throws if no bracket is found.
    double marginal_quantile(double prob) const;

  private:
    MixtureParams params_;
    std::vector<double> radii_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
};

double marginal_cdf(double x, MixtureParams const& params, QuadratureConfig const& quad);
double marginal_pdf(double x, MixtureParams const& params, QuadratureConfig const& quad);
double marginal_quantile(double prob,
                         MixtureParams const& params,
                         QuadratureConfig const& quad);

//---------------------------------------------------------------------------//
// DATA PREPARATION
//---------------------------------------------------------------------------//

//! Missing observations are NaN.
bool is_missing(double v);

/*!
 * Per column, rank / (T_obs + 1) over the observed entries with averaged
 * ranks for ties. Missing entries stay NaN.
 */
Eigen::MatrixXd rank_transform(Eigen::MatrixXd const& data);

/*!
 * One time point on the uniform scale.
 *
 * Values at or below the threshold are censored; the rest exceed.
 */
struct Replicate
{
    Eigen::VectorXd values;  // NaN when missing
    IndexList observed;
    IndexList censored_idx;
    IndexList exceed_idx;
    double threshold = 0.95;

    static Replicate from_uniform(Eigen::VectorXd const& u, double threshold);
};

//---------------------------------------------------------------------------//
// CENSORED LIKELIHOOD
//---------------------------------------------------------------------------//

struct LikelihoodConfig
{
    PlanSettings plan;
    QmcConfig qmc;
    QuadratureConfig quad;
    unsigned workers = 1;
};

enum class CensoringCase
{
    AllCensored,
    AllExceed,
    Mixed,
    Empty
};

struct ReplicateLogLik
{
    double value = 0;
    //! Conservative: radial nodes are treated as perfectly correlated.
    double std_error = 0;
    CensoringCase kind = CensoringCase::Empty;
    bool underflow = false;
};

/*!
 * log G(x) = log int Phi_D(x / r; Sigma) f_R(r) dr with the Gaussian CDF
 * replaced by its Vecchia approximation.
 */
LogProbEstimate log_joint_cdf(Eigen::VectorXd const& x,
                              std::span<Location const> locs,
                              MixtureModel const& model,
                              LikelihoodConfig const& cfg);

//! log g(x) with the Gaussian density replaced by its Vecchia approximation.
double log_joint_pdf(Eigen::VectorXd const& x,
                     std::span<Location const> locs,
                     MixtureModel const& model,
                     LikelihoodConfig const& cfg);

/*!
 * log of the partial derivative of G with respect to x_I (exceed_idx), with
 * the censored Gaussian CDF term approximated by Vecchia.
 */
LogProbEstimate log_partial_cdf(Eigen::VectorXd const& x,
                                std::span<std::size_t const> exceed_idx,
                                std::span<Location const> locs,
                                MixtureModel const& model,
                                LikelihoodConfig const& cfg);

ReplicateLogLik censored_loglik_replicate_detail(Replicate const& rep,
                                                 std::span<Location const> locs,
                                                 MixtureModel const& model,
                                                 LikelihoodConfig const& cfg);

double censored_loglik_replicate(Replicate const& rep,
                                 std::span<Location const> locs,
                                 MixtureParams const& params,
                                 LikelihoodConfig const& cfg);

//---------------------------------------------------------------------------//
// TAIL DEPENDENCE
//---------------------------------------------------------------------------//

//! (1 - 2u + joint) / (1 - u) clamped to [0, 1], joint = P(U_a <= u, U_b <= u).
double chi_from_joint(double u, double joint);

/*!
 * chi_u = P(U_a > u | U_b > u) on the marginal uniform scale, computed as
 * (1 - 2u + G_2(q, q)) / (1 - u) with q the marginal u-quantile. The
 * bivariate Gaussian CDF inside G_2 is evaluated in closed form.
 */
double chi_u(Location const& a, Location const& b, double u, MixtureModel const& model);

double chi_u(Location const& a,
             Location const& b,
             double u,
             MixtureParams const& params,
             QuadratureConfig const& quad);

}  // namespace vcdf
