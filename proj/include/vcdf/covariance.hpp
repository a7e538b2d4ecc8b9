#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vcdf
{
using IndexList = std::vector<std::size_t>;

//! Planar observation site (abstract units, no geodesy).
struct Location
{
    double x = 0;
    double y = 0;

    friend bool operator==(Location const&, Location const&) = default;
};

enum class CovarianceKind
{
    IsotropicExponential,
    AnisotropicExponential
};

//---------------------------------------------------------------------------//
/*!
 * Unit-variance exponential covariance with geometric anisotropy.
 *
 * Correlation between two sites is exp(-h / rho) where h is the anisotropic
 * distance: the separation is rotated by -phi and its second rotated
 * component stretched by the aspect ratio. Level sets of the correlation are
 * ellipses whose major axis points along angle phi.
 */
struct CovarianceSpec
{
    double rho = 1;
    double phi = 0;
    double aspect = 1;
    CovarianceKind kind = CovarianceKind::IsotropicExponential;

    static CovarianceSpec isotropic(double rho);
    static CovarianceSpec anisotropic(double rho, double phi, double aspect);

    //! Throws std::invalid_argument when the parameters are out of domain.
    void validate() const;

    double correlation(double distance) const;
};

double mahalanobis_distance(Location const& a,
                            Location const& b,
                            CovarianceSpec const& spec);

enum class DuplicatePolicy
{
    Warn,
    Reject
};

//! Index pairs (i < j) of coincident locations.
std::vector<std::pair<std::size_t, std::size_t>>
find_duplicate_locations(std::span<Location const> locs);

Eigen::MatrixXd build_covariance(std::span<Location const> locs,
                                 CovarianceSpec const& spec,
                                 DuplicatePolicy policy = DuplicatePolicy::Warn);

//! Covariance among the listed sites only.
Eigen::MatrixXd build_covariance(std::span<Location const> locs,
                                 std::span<std::size_t const> idx,
                                 CovarianceSpec const& spec);

//! n_side^2 sites, row-major: index row*n_side + col at (col, row) * spacing.
std::vector<Location> make_grid(std::size_t n_side, double spacing = 1.0);

/*!
 * The min(m, |candidates|) candidates closest to the target, ascending by
 * anisotropic distance. Ties go to the smaller index.
 */
IndexList nearest_neighbors(std::span<Location const> locs,
                            std::size_t target,
                            std::span<std::size_t const> candidates,
                            std::size_t m,
                            CovarianceSpec const& spec);

}  // namespace vcdf
