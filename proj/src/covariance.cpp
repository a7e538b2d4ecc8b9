#include "vcdf/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace vcdf
{
CovarianceSpec CovarianceSpec::isotropic(double rho)
{
    CovarianceSpec spec{rho, 0.0, 1.0, CovarianceKind::IsotropicExponential};
    spec.validate();
    return spec;
}

CovarianceSpec
CovarianceSpec::anisotropic(double rho, double phi, double aspect)
{
    CovarianceSpec spec{rho, phi, aspect, CovarianceKind::AnisotropicExponential};
    spec.validate();
    return spec;
}

void CovarianceSpec::validate() const
{
    if (!(rho > 0) || !std::isfinite(rho))
        throw std::invalid_argument("covariance range must be positive");
    if (!(phi >= 0 && phi < std::numbers::pi))
        throw std::invalid_argument("rotation angle must lie in [0, pi)");
    if (!(aspect >= 1) || !std::isfinite(aspect))
        throw std::invalid_argument("aspect ratio must be >= 1");
    if (kind == CovarianceKind::IsotropicExponential
        && (phi != 0 || aspect != 1))
    {
        throw std::invalid_argument(
            "isotropic covariance requires phi = 0 and aspect = 1");
    }
}

double CovarianceSpec::correlation(double distance) const
{
    return std::exp(-distance / rho);
}

double mahalanobis_distance(Location const& a,
                            Location const& b,
                            CovarianceSpec const& spec)
{
    double const dx = a.x - b.x;
    double const dy = a.y - b.y;
    if (spec.kind == CovarianceKind::IsotropicExponential)
        return std::hypot(dx, dy);

    // Inverse rotation, then stretch the minor direction.
    double const c = std::cos(spec.phi);
    double const s = std::sin(spec.phi);
    double const along = c * dx + s * dy;
    double const across = -s * dx + c * dy;
    return std::hypot(along, spec.aspect * across);
}

std::vector<std::pair<std::size_t, std::size_t>>
find_duplicate_locations(std::span<Location const> locs)
{
    std::vector<std::size_t> order(locs.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    auto key_less = [&](std::size_t i, std::size_t j) {
        return std::tie(locs[i].x, locs[i].y, i)
               < std::tie(locs[j].x, locs[j].y, j);
    };
    std::sort(order.begin(), order.end(), key_less);

    std::vector<std::pair<std::size_t, std::size_t>> dups;
    for (std::size_t k = 0; k < order.size(); ++k)
    {
        for (std::size_t l = k + 1;
             l < order.size() && locs[order[l]] == locs[order[k]];
             ++l)
        {
            dups.emplace_back(std::min(order[k], order[l]),
                              std::max(order[k], order[l]));
        }
    }
    return dups;
}

Eigen::MatrixXd build_covariance(std::span<Location const> locs,
                                 CovarianceSpec const& spec,
                                 DuplicatePolicy policy)
{
    spec.validate();
    if (locs.empty())
        throw std::invalid_argument("covariance needs at least one location");

    auto dups = find_duplicate_locations(locs);
    if (!dups.empty())
    {
        std::string msg = "duplicate locations " + std::to_string(dups[0].first)
                          + " and " + std::to_string(dups[0].second)
                          + " make the covariance singular";
        if (policy == DuplicatePolicy::Reject)
            throw std::invalid_argument(msg);
        std::clog << "warning: " << msg << '\n';
    }

    auto const n = static_cast<Eigen::Index>(locs.size());
    Eigen::MatrixXd sigma(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        sigma(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j)
        {
            double v = spec.correlation(mahalanobis_distance(locs[i], locs[j], spec));
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

Eigen::MatrixXd build_covariance(std::span<Location const> locs,
                                 std::span<std::size_t const> idx,
                                 CovarianceSpec const& spec)
{
    auto const n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd sigma(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        sigma(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j)
        {
            double v = spec.correlation(
                mahalanobis_distance(locs[idx[i]], locs[idx[j]], spec));
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

std::vector<Location> make_grid(std::size_t n_side, double spacing)
{
    if (n_side == 0)
        throw std::invalid_argument("grid needs at least one point per side");
    if (!(spacing > 0))
        throw std::invalid_argument("grid spacing must be positive");

    std::vector<Location> locs;
    locs.reserve(n_side * n_side);
    for (std::size_t row = 0; row < n_side; ++row)
    {
        for (std::size_t col = 0; col < n_side; ++col)
        {
            locs.push_back({static_cast<double>(col) * spacing,
                            static_cast<double>(row) * spacing});
        }
    }
    return locs;
}

IndexList nearest_neighbors(std::span<Location const> locs,
                            std::size_t target,
                            std::span<std::size_t const> candidates,
                            std::size_t m,
                            CovarianceSpec const& spec)
{
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(candidates.size());
    for (std::size_t c : candidates)
    {
        if (c == target)
            throw std::invalid_argument("target cannot be its own neighbor");
        scored.emplace_back(mahalanobis_distance(locs[target], locs[c], spec), c);
    }

    std::size_t const keep = std::min(m, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end());

    IndexList result(keep);
    for (std::size_t i = 0; i < keep; ++i)
        result[i] = scored[i].second;
    return result;
}

}  // namespace vcdf
