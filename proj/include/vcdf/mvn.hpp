#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"

namespace vcdf
{
//! Raised when a Cholesky pivot falls below tolerance.
class NotPositiveDefinite : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// UNIVARIATE NORMAL
//---------------------------------------------------------------------------//

double std_normal_cdf(double x);
double std_normal_log_pdf(double x);
//! Inverse standard normal CDF (Wichura AS241); +/-inf at 1 and 0.
double std_normal_quantile(double p);
//! P(Z_1 <= h, Z_2 <= h) for standard normals with correlation corr, via Owen's T.
double std_bvn_cdf_diagonal(double h, double corr);
bool is_prime(std::uint64_t n);

//---------------------------------------------------------------------------//
// DENSE GAUSSIAN ALGEBRA
//---------------------------------------------------------------------------//

Eigen::MatrixXd cholesky(Eigen::MatrixXd const& sigma);

double mvn_logpdf(Eigen::VectorXd const& x,
                  Eigen::VectorXd const& mu,
                  Eigen::MatrixXd const& sigma);

//! Log-density with a precomputed lower Cholesky factor and zero mean.
double mvn_logpdf_chol(Eigen::VectorXd const& x, Eigen::MatrixXd const& chol);

struct ConditionalGaussian
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/*!
 * Moments of the free components given the conditioned components equal
 * cond_values, for a zero-mean Gaussian with covariance sigma.
 */
ConditionalGaussian conditional_gaussian(Eigen::MatrixXd const& sigma,
                                         std::span<std::size_t const> cond_idx,
                                         std::span<std::size_t const> free_idx,
                                         Eigen::VectorXd const& cond_values);

//---------------------------------------------------------------------------//
// QUASI-MONTE CARLO CDF
//---------------------------------------------------------------------------//

struct QmcConfig
{
    std::uint64_t n_points = 499;
    std::uint32_t n_shifts = 10;
    std::uint64_t seed = 1;

    void validate() const;
};

struct LogProbEstimate
{
    double log_value = 0;
    double std_error = 0;
    std::uint64_t n_points_used = 0;
};

/*!
 * A Gaussian orthant problem in integration order, ready to evaluate at any
 * positive rescaling of its bounds.
 *
 * Variables are sorted by ascending standardized bound. Positive rescaling
 * preserves that order, so one factorization serves every radius of a
 * scale-mixture integral.
 */
class QmcProblem
{
  public:
    QmcProblem() = default;
    QmcProblem(Eigen::VectorXd const& upper, Eigen::MatrixXd const& sigma);

    std::size_t dim() const { return bounds_.size(); }
    bool degenerate() const { return degenerate_; }

    //! Estimate log P(X < upper * scale) with the randomized lattice rule.
    LogProbEstimate estimate(QmcConfig const& cfg, double scale = 1.0) const;

  private:
    std::vector<double> bounds_;  // sorted, unscaled
    std::vector<double> chol_;    // row-major lower factor in sorted order
    bool degenerate_ = false;
};

LogProbEstimate qmc_mvn_cdf(Eigen::VectorXd const& upper,
                            Eigen::MatrixXd const& sigma,
                            QmcConfig const& cfg);

//---------------------------------------------------------------------------//
// SIMULATION
//---------------------------------------------------------------------------//

//! Standard normal draws z_i = Phi^{-1}(u(seed, i)), i < n.
Eigen::VectorXd counter_normals(std::uint64_t seed, std::size_t n);

Eigen::VectorXd simulate_gp(std::span<Location const> locs,
                            CovarianceSpec const& spec,
                            std::uint64_t seed);

}  // namespace vcdf
