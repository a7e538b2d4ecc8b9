#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "covariance.hpp"
#include "mvn.hpp"

namespace vcdf
{
//---------------------------------------------------------------------------//
// CONDITIONING-SET PLANS
//---------------------------------------------------------------------------//

enum class NeighborStrategy
{
    NearestPerElement,  //!< m nearest predecessors per element, unioned
    RandomShared,       //!< m random predecessors shared by the block
    RandomPerElement    //!< m random predecessors per element, unioned
};

enum class OrderingKind
{
    Lexicographic,  //!< by (y, x), then index
    Random,
    MaxMin
};

struct PlanSettings
{
    std::size_t m = 30;
    std::size_t p = 1;
    NeighborStrategy strategy = NeighborStrategy::NearestPerElement;
    OrderingKind ordering = OrderingKind::Lexicographic;
    std::uint64_t seed = 0;
};

/*!
 * Variable ordering, block partition and per-block conditioning sets.
 *
 * Blocks and conditioning sets hold location indices. Conditioning sets only
 * reference elements of earlier blocks, so the product of block terms is a
 * truncated telescoping factorization.
 */
struct CondSetPlan
{
    IndexList ordering;
    std::vector<IndexList> blocks;
    std::vector<IndexList> cond_sets;
    NeighborStrategy strategy = NeighborStrategy::NearestPerElement;
    OrderingKind ordering_kind = OrderingKind::Lexicographic;
    std::size_t m = 1;
    std::size_t p = 1;
    std::uint64_t seed = 0;

    std::size_t dim() const { return ordering.size(); }
    std::size_t num_blocks() const { return blocks.size(); }

    //! Throws std::invalid_argument if any structural invariant fails.
    void validate() const;
};

IndexList order_locations(std::span<Location const> locs,
                          OrderingKind kind,
                          std::uint64_t seed);

CondSetPlan build_plan(std::span<Location const> locs,
                       CovarianceSpec const& spec,
                       PlanSettings const& settings);

CondSetPlan build_plan(std::span<Location const> locs,
                       CovarianceSpec const& spec,
                       std::size_t m,
                       std::size_t p,
                       NeighborStrategy strategy,
                       std::uint64_t seed);

char const* to_string(NeighborStrategy s);
NeighborStrategy neighbor_strategy_from_string(std::string const& s);
char const* to_string(OrderingKind k);
OrderingKind ordering_kind_from_string(std::string const& s);

nlohmann::json plan_to_json(CondSetPlan const& plan);
CondSetPlan plan_from_json(nlohmann::json const& j);

//---------------------------------------------------------------------------//
// COVARIANCE ACCESS
//---------------------------------------------------------------------------//

/*!
 * Non-owning access to covariance submatrices, either generated on demand
 * from locations or sliced from a dense matrix. The referenced data must
 * outlive the source.
 */
class CovarianceSource
{
  public:
    CovarianceSource(std::span<Location const> locs, CovarianceSpec const& spec);
    explicit CovarianceSource(Eigen::MatrixXd const& sigma);

    std::size_t dim() const;
    Eigen::MatrixXd submatrix(std::span<std::size_t const> idx) const;

  private:
    struct FromLocations
    {
        std::span<Location const> locs;
        CovarianceSpec spec;
    };
    std::variant<FromLocations, Eigen::MatrixXd const*> impl_;
};

//---------------------------------------------------------------------------//
// VECCHIA CDF AND PDF
//---------------------------------------------------------------------------//

struct TermResult
{
    std::size_t block_id = 0;
    LogProbEstimate log_numerator;
    std::optional<LogProbEstimate> log_denominator;

    double log_value() const;
    double variance() const;
};

struct BlockRange
{
    std::size_t begin = 0;
    std::size_t end = 0;
};

//! Terms for blocks [range.begin, range.end), evaluated serially.
std::vector<TermResult> evaluate_terms(CondSetPlan const& plan,
                                       Eigen::VectorXd const& upper,
                                       CovarianceSource const& cov,
                                       QmcConfig const& cfg,
                                       BlockRange range);

std::vector<TermResult> evaluate_terms(CondSetPlan const& plan,
                                       Eigen::VectorXd const& upper,
                                       std::span<Location const> locs,
                                       CovarianceSpec const& spec,
                                       QmcConfig const& cfg,
                                       BlockRange range);

//! Sum of term log-values in block order; root-sum-square standard error.
LogProbEstimate reduce_terms(std::span<TermResult const> terms);

LogProbEstimate vecchia_log_cdf(Eigen::VectorXd const& upper,
                                CovarianceSource const& cov,
                                CondSetPlan const& plan,
                                QmcConfig const& cfg,
                                unsigned workers = 1);

LogProbEstimate vecchia_log_cdf(Eigen::VectorXd const& upper,
                                std::span<Location const> locs,
                                CovarianceSpec const& spec,
                                CondSetPlan const& plan,
                                QmcConfig const& cfg,
                                unsigned workers = 1);

double vecchia_log_pdf(Eigen::VectorXd const& x,
                       CovarianceSource const& cov,
                       CondSetPlan const& plan);

double vecchia_log_pdf(Eigen::VectorXd const& x,
                       std::span<Location const> locs,
                       CovarianceSpec const& spec,
                       CondSetPlan const& plan);

/*!
 * Vecchia log-CDF at bounds upper * scale for many positive scales.
 *
 * Every block's sorted Cholesky factors are computed once at construction;
 * each evaluation then only runs the lattice rule. Seeds per term are the
 * same for every scale.
 */
class VecchiaCdfEvaluator
{
  public:
    VecchiaCdfEvaluator(Eigen::VectorXd const& upper,
                        CovarianceSource const& cov,
                        CondSetPlan const& plan);

    LogProbEstimate evaluate(QmcConfig const& cfg,
                             double scale = 1.0,
                             unsigned workers = 1) const;

    std::size_t num_terms() const { return terms_.size(); }

  private:
    struct Term
    {
        QmcProblem numerator;
        std::optional<QmcProblem> denominator;
    };
    std::vector<Term> terms_;
};

/*!
 * Vecchia log-density at x * scale for many scales.
 *
 * Each conditional term is Gaussian with a mean linear in x, so the total is
 * constant_part - 0.5 * quadratic_part * scale^2.
 */
class VecchiaPdfEvaluator
{
  public:
    VecchiaPdfEvaluator(Eigen::VectorXd const& x,
                        CovarianceSource const& cov,
                        CondSetPlan const& plan);

    double evaluate(double scale = 1.0) const
    {
        return constant_ - 0.5 * quadratic_ * scale * scale;
    }

  private:
    double constant_ = 0;
    double quadratic_ = 0;
};

}  // namespace vcdf
