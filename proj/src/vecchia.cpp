#include "vcdf/vecchia.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "vcdf/parallel.hpp"
#include "vcdf/rng.hpp"

namespace vcdf
{
namespace
{
constexpr double inf = std::numeric_limits<double>::infinity();

//! Uniform integer in [0, n) from 64 random bits.
std::uint64_t bounded(std::uint64_t bits, std::uint64_t n)
{
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits) * n) >> 64);
}

/*!
 * Floyd's sampling of k distinct positions from [0, n), in ascending order.
 */
IndexList sample_without_replacement(CounterRng const& rng,
                                     std::uint64_t stream,
                                     std::size_t n,
                                     std::size_t k)
{
    k = std::min(k, n);
    std::unordered_set<std::size_t> chosen;
    IndexList result;
    result.reserve(k);
    std::uint64_t counter = 0;
    for (std::size_t j = n - k; j < n; ++j)
    {
        auto t = static_cast<std::size_t>(
            bounded(rng.bits(stream, counter++), j + 1));
        std::size_t pick = chosen.count(t) ? j : t;
        chosen.insert(pick);
        result.push_back(pick);
    }
    std::sort(result.begin(), result.end());
    return result;
}

void append_unique(IndexList& dst,
                   std::unordered_set<std::size_t>& seen,
                   IndexList const& src)
{
    for (auto i : src)
    {
        if (seen.insert(i).second)
            dst.push_back(i);
    }
}

Eigen::VectorXd gather(Eigen::VectorXd const& v, std::span<std::size_t const> idx)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(idx[i])];
    return out;
}

IndexList concat(IndexList const& a, IndexList const& b)
{
    IndexList out(a);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

void check_dims(Eigen::VectorXd const& v,
                CovarianceSource const& cov,
                CondSetPlan const& plan)
{
    if (static_cast<std::size_t>(v.size()) != plan.dim()
        || cov.dim() != plan.dim())
    {
        throw std::invalid_argument(
            "vector, covariance and plan dimensions disagree");
    }
}

}  // namespace

//---------------------------------------------------------------------------//
// PLANS
//---------------------------------------------------------------------------//

void CondSetPlan::validate() const
{
    std::size_t const d = ordering.size();
    std::vector<std::size_t> position(d, d);
    for (std::size_t k = 0; k < d; ++k)
    {
        if (ordering[k] >= d || position[ordering[k]] != d)
            throw std::invalid_argument("plan ordering is not a permutation");
        position[ordering[k]] = k;
    }
    if (cond_sets.size() != blocks.size())
        throw std::invalid_argument("plan needs one conditioning set per block");
    if (m == 0 || p == 0)
        throw std::invalid_argument("plan m and p must be positive");

    std::size_t next = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b)
    {
        if (blocks[b].empty() || blocks[b].size() > p)
            throw std::invalid_argument("plan block size out of range");
        for (auto i : blocks[b])
        {
            if (i >= d || position[i] != next++)
            {
                throw std::invalid_argument(
                    "plan blocks are not consecutive runs of the ordering");
            }
        }
        std::size_t const block_start = next - blocks[b].size();
        std::size_t const cap = strategy == NeighborStrategy::RandomShared
                                    ? m
                                    : m * blocks[b].size();
        if (cond_sets[b].size() > cap)
            throw std::invalid_argument("plan conditioning set too large");
        std::unordered_set<std::size_t> seen;
        for (auto c : cond_sets[b])
        {
            if (c >= d || position[c] >= block_start)
            {
                throw std::invalid_argument(
                    "conditioning index does not precede its block");
            }
            if (!seen.insert(c).second)
                throw std::invalid_argument("duplicate conditioning index");
        }
    }
    if (next != d)
        throw std::invalid_argument("plan blocks do not cover every index");
}

IndexList order_locations(std::span<Location const> locs,
                          OrderingKind kind,
                          std::uint64_t seed)
{
    IndexList order(locs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    switch (kind)
    {
        case OrderingKind::Lexicographic:
            std::sort(order.begin(), order.end(), [&](auto a, auto b) {
                return std::tie(locs[a].y, locs[a].x, a)
                       < std::tie(locs[b].y, locs[b].x, b);
            });
            break;
        case OrderingKind::Random: {
            CounterRng rng(derive_seed(seed, 0x6f72646572ULL));
            for (std::size_t i = order.size(); i > 1; --i)
            {
                auto j = static_cast<std::size_t>(bounded(rng.bits(0, i), i));
                std::swap(order[i - 1], order[j]);
            }
            break;
        }
        case OrderingKind::MaxMin: {
            if (locs.empty())
                break;
            double cx = 0, cy = 0;
            for (auto const& l : locs)
            {
                cx += l.x;
                cy += l.y;
            }
            cx /= static_cast<double>(locs.size());
            cy /= static_cast<double>(locs.size());
            auto dist = [&](std::size_t i, double x, double y) {
                return std::hypot(locs[i].x - x, locs[i].y - y);
            };
            std::size_t first = 0;
            for (std::size_t i = 1; i < locs.size(); ++i)
            {
                if (dist(i, cx, cy) < dist(first, cx, cy))
                    first = i;
            }
            std::vector<double> min_dist(locs.size(), inf);
            std::vector<bool> taken(locs.size(), false);
            order.clear();
            std::size_t cur = first;
            for (std::size_t k = 0; k < locs.size(); ++k)
            {
                order.push_back(cur);
                taken[cur] = true;
                std::size_t best = locs.size();
                for (std::size_t i = 0; i < locs.size(); ++i)
                {
                    if (taken[i])
                        continue;
                    min_dist[i] = std::min(min_dist[i],
                                           dist(i, locs[cur].x, locs[cur].y));
                    if (best == locs.size() || min_dist[i] > min_dist[best])
                        best = i;
                }
                cur = best;
            }
            break;
        }
    }
    return order;
}

CondSetPlan build_plan(std::span<Location const> locs,
                       CovarianceSpec const& spec,
                       PlanSettings const& settings)
{
    if (locs.empty())
        throw std::invalid_argument("plan needs at least one location");
    if (settings.m == 0 || settings.p == 0)
        throw std::invalid_argument("plan m and p must be positive");
    spec.validate();

    CondSetPlan plan;
    plan.strategy = settings.strategy;
    plan.ordering_kind = settings.ordering;
    plan.m = settings.m;
    plan.p = settings.p;
    plan.seed = settings.seed;
    plan.ordering = order_locations(locs, settings.ordering, settings.seed);

    std::size_t const d = locs.size();
    CounterRng rng(derive_seed(settings.seed, 0x636f6e64ULL));
    for (std::size_t start = 0; start < d; start += settings.p)
    {
        std::size_t const stop = std::min(d, start + settings.p);
        std::size_t const b = plan.blocks.size();
        IndexList block(plan.ordering.begin() + static_cast<std::ptrdiff_t>(start),
                        plan.ordering.begin() + static_cast<std::ptrdiff_t>(stop));
        std::span<std::size_t const> preds(plan.ordering.data(), start);

        IndexList cond;
        std::unordered_set<std::size_t> seen;
        auto pick_random = [&](std::uint64_t stream) {
            IndexList picked;
            for (auto pos : sample_without_replacement(rng, stream, start, settings.m))
                picked.push_back(preds[pos]);
            return picked;
        };
        switch (settings.strategy)
        {
            case NeighborStrategy::NearestPerElement:
                for (auto i : block)
                    append_unique(cond, seen,
                                  nearest_neighbors(locs, i, preds, settings.m, spec));
                break;
            case NeighborStrategy::RandomShared:
                cond = pick_random(derive_seed(b, 0));
                break;
            case NeighborStrategy::RandomPerElement:
                for (std::size_t k = 0; k < block.size(); ++k)
                    append_unique(cond, seen, pick_random(derive_seed(b, k + 1)));
                break;
        }
        plan.blocks.push_back(std::move(block));
        plan.cond_sets.push_back(std::move(cond));
    }
    return plan;
}

CondSetPlan build_plan(std::span<Location const> locs,
                       CovarianceSpec const& spec,
                       std::size_t m,
                       std::size_t p,
                       NeighborStrategy strategy,
                       std::uint64_t seed)
{
    PlanSettings settings;
    settings.m = m;
    settings.p = p;
    settings.strategy = strategy;
    settings.seed = seed;
    return build_plan(locs, spec, settings);
}

char const* to_string(NeighborStrategy s)
{
    switch (s)
    {
        case NeighborStrategy::NearestPerElement:
            return "nearest";
        case NeighborStrategy::RandomShared:
            return "random_shared";
        case NeighborStrategy::RandomPerElement:
            return "random_per_element";
    }
    return "?";
}

NeighborStrategy neighbor_strategy_from_string(std::string const& s)
{
    for (auto v : {NeighborStrategy::NearestPerElement,
                   NeighborStrategy::RandomShared,
                   NeighborStrategy::RandomPerElement})
    {
        if (s == to_string(v))
            return v;
    }
    throw std::invalid_argument("unknown neighbor strategy '" + s + "'");
}

char const* to_string(OrderingKind k)
{
    switch (k)
    {
        case OrderingKind::Lexicographic:
            return "lexicographic";
        case OrderingKind::Random:
            return "random";
        case OrderingKind::MaxMin:
            return "maxmin";
    }
    return "?";
}

OrderingKind ordering_kind_from_string(std::string const& s)
{
    for (auto v :
         {OrderingKind::Lexicographic, OrderingKind::Random, OrderingKind::MaxMin})
    {
        if (s == to_string(v))
            return v;
    }
    throw std::invalid_argument("unknown ordering '" + s + "'");
}

nlohmann::json plan_to_json(CondSetPlan const& plan)
{
    return {
        {"ordering", plan.ordering},
        {"blocks", plan.blocks},
        {"cond_sets", plan.cond_sets},
        {"strategy", to_string(plan.strategy)},
        {"ordering_kind", to_string(plan.ordering_kind)},
        {"m", plan.m},
        {"p", plan.p},
        {"seed", plan.seed},
    };
}

CondSetPlan plan_from_json(nlohmann::json const& j)
{
    CondSetPlan plan;
    j.at("ordering").get_to(plan.ordering);
    j.at("blocks").get_to(plan.blocks);
    j.at("cond_sets").get_to(plan.cond_sets);
    plan.strategy = neighbor_strategy_from_string(j.at("strategy").get<std::string>());
    plan.ordering_kind = ordering_kind_from_string(
        j.value("ordering_kind", std::string{"lexicographic"}));
    j.at("m").get_to(plan.m);
    j.at("p").get_to(plan.p);
    j.at("seed").get_to(plan.seed);
    plan.validate();
    return plan;
}

//---------------------------------------------------------------------------//
// COVARIANCE SOURCE
//---------------------------------------------------------------------------//

CovarianceSource::CovarianceSource(std::span<Location const> locs,
                                   CovarianceSpec const& spec)
    : impl_{FromLocations{locs, spec}}
{
    spec.validate();
}

CovarianceSource::CovarianceSource(Eigen::MatrixXd const& sigma)
    : impl_{&sigma}
{
    if (sigma.rows() != sigma.cols())
        throw std::invalid_argument("covariance must be square");
}

std::size_t CovarianceSource::dim() const
{
    if (auto const* src = std::get_if<FromLocations>(&impl_))
        return src->locs.size();
    return static_cast<std::size_t>(std::get<Eigen::MatrixXd const*>(impl_)->rows());
}

Eigen::MatrixXd CovarianceSource::submatrix(std::span<std::size_t const> idx) const
{
    if (auto const* src = std::get_if<FromLocations>(&impl_))
        return build_covariance(src->locs, idx, src->spec);
    std::vector<Eigen::Index> eidx(idx.begin(), idx.end());
    return (*std::get<Eigen::MatrixXd const*>(impl_))(eidx, eidx);
}

//---------------------------------------------------------------------------//
// CDF TERMS
//---------------------------------------------------------------------------//

double TermResult::log_value() const
{
    if (log_numerator.log_value == -inf)
        return -inf;
    return log_numerator.log_value
           - (log_denominator ? log_denominator->log_value : 0.0);
}

double TermResult::variance() const
{
    double v = log_numerator.std_error * log_numerator.std_error;
    if (log_denominator)
        v += log_denominator->std_error * log_denominator->std_error;
    return v;
}

namespace
{
QmcConfig term_config(QmcConfig cfg, std::size_t block, int tag)
{
    cfg.seed = derive_seed(cfg.seed, block, static_cast<std::uint64_t>(tag));
    return cfg;
}

TermResult evaluate_term(CondSetPlan const& plan,
                         Eigen::VectorXd const& upper,
                         CovarianceSource const& cov,
                         QmcConfig const& cfg,
                         std::size_t b)
{
    TermResult term;
    term.block_id = b;
    IndexList idx = concat(plan.blocks[b], plan.cond_sets[b]);
    term.log_numerator = QmcProblem(gather(upper, idx), cov.submatrix(idx))
                             .estimate(term_config(cfg, b, 0));
    auto const& cond = plan.cond_sets[b];
    if (!cond.empty())
    {
        term.log_denominator = QmcProblem(gather(upper, cond), cov.submatrix(cond))
                                   .estimate(term_config(cfg, b, 1));
    }
    return term;
}

}  // namespace

std::vector<TermResult> evaluate_terms(CondSetPlan const& plan,
                                       Eigen::VectorXd const& upper,
                                       CovarianceSource const& cov,
                                       QmcConfig const& cfg,
                                       BlockRange range)
{
    check_dims(upper, cov, plan);
    cfg.validate();
    if (range.begin > range.end || range.end > plan.num_blocks())
        throw std::invalid_argument("block range outside plan");

    std::vector<TermResult> out;
    out.reserve(range.end - range.begin);
    for (std::size_t b = range.begin; b < range.end; ++b)
        out.push_back(evaluate_term(plan, upper, cov, cfg, b));
    return out;
}

std::vector<TermResult> evaluate_terms(CondSetPlan const& plan,
                                       Eigen::VectorXd const& upper,
                                       std::span<Location const> locs,
                                       CovarianceSpec const& spec,
                                       QmcConfig const& cfg,
                                       BlockRange range)
{
    return evaluate_terms(plan, upper, CovarianceSource(locs, spec), cfg, range);
}

LogProbEstimate reduce_terms(std::span<TermResult const> terms)
{
    LogProbEstimate total;
    double var = 0;
    for (auto const& t : terms)
    {
        total.log_value += t.log_value();
        var += t.variance();
        total.n_points_used += t.log_numerator.n_points_used;
        if (t.log_denominator)
            total.n_points_used += t.log_denominator->n_points_used;
    }
    if (std::isnan(total.log_value))
        total.log_value = -inf;
    total.std_error = std::sqrt(var);
    return total;
}

LogProbEstimate vecchia_log_cdf(Eigen::VectorXd const& upper,
                                CovarianceSource const& cov,
                                CondSetPlan const& plan,
                                QmcConfig const& cfg,
                                unsigned workers)
{
    check_dims(upper, cov, plan);
    cfg.validate();
    std::vector<TermResult> terms(plan.num_blocks());
    parallel_for(terms.size(), workers, [&](std::size_t b) {
        terms[b] = evaluate_term(plan, upper, cov, cfg, b);
    });
    return reduce_terms(terms);
}

LogProbEstimate vecchia_log_cdf(Eigen::VectorXd const& upper,
                                std::span<Location const> locs,
                                CovarianceSpec const& spec,
                                CondSetPlan const& plan,
                                QmcConfig const& cfg,
                                unsigned workers)
{
    return vecchia_log_cdf(upper, CovarianceSource(locs, spec), plan, cfg, workers);
}

VecchiaCdfEvaluator::VecchiaCdfEvaluator(Eigen::VectorXd const& upper,
                                         CovarianceSource const& cov,
                                         CondSetPlan const& plan)
{
    check_dims(upper, cov, plan);
    terms_.reserve(plan.num_blocks());
    for (std::size_t b = 0; b < plan.num_blocks(); ++b)
    {
        IndexList idx = concat(plan.blocks[b], plan.cond_sets[b]);
        Term term{QmcProblem(gather(upper, idx), cov.submatrix(idx)), std::nullopt};
        auto const& cond = plan.cond_sets[b];
        if (!cond.empty())
            term.denominator = QmcProblem(gather(upper, cond), cov.submatrix(cond));
        terms_.push_back(std::move(term));
    }
}

LogProbEstimate VecchiaCdfEvaluator::evaluate(QmcConfig const& cfg,
                                              double scale,
                                              unsigned workers) const
{
    cfg.validate();
    std::vector<TermResult> results(terms_.size());
    parallel_for(terms_.size(), workers, [&](std::size_t b) {
        auto& r = results[b];
        r.block_id = b;
        r.log_numerator = terms_[b].numerator.estimate(term_config(cfg, b, 0), scale);
        if (terms_[b].denominator)
        {
            r.log_denominator = terms_[b].denominator->estimate(
                term_config(cfg, b, 1), scale);
        }
    });
    return reduce_terms(results);
}

//---------------------------------------------------------------------------//
// PDF
//---------------------------------------------------------------------------//

VecchiaPdfEvaluator::VecchiaPdfEvaluator(Eigen::VectorXd const& x,
                                         CovarianceSource const& cov,
                                         CondSetPlan const& plan)
{
    check_dims(x, cov, plan);
    double const log_2pi = std::log(2 * std::numbers::pi);
    for (std::size_t b = 0; b < plan.num_blocks(); ++b)
    {
        auto const& block = plan.blocks[b];
        auto const& cond = plan.cond_sets[b];
        IndexList idx = concat(cond, block);
        Eigen::MatrixXd sub = cov.submatrix(idx);

        IndexList cond_pos(cond.size());
        IndexList free_pos(block.size());
        std::iota(cond_pos.begin(), cond_pos.end(), std::size_t{0});
        std::iota(free_pos.begin(), free_pos.end(), cond.size());
        auto cg = conditional_gaussian(sub, cond_pos, free_pos, gather(x, cond));

        Eigen::MatrixXd l = cholesky(cg.cov);
        Eigen::VectorXd z
            = l.triangularView<Eigen::Lower>().solve(gather(x, block) - cg.mean);
        constant_ += -0.5 * static_cast<double>(block.size()) * log_2pi
                     - l.diagonal().array().log().sum();
        quadratic_ += z.squaredNorm();
    }
}

double vecchia_log_pdf(Eigen::VectorXd const& x,
                       CovarianceSource const& cov,
                       CondSetPlan const& plan)
{
    return VecchiaPdfEvaluator(x, cov, plan).evaluate();
}

double vecchia_log_pdf(Eigen::VectorXd const& x,
                       std::span<Location const> locs,
                       CovarianceSpec const& spec,
                       CondSetPlan const& plan)
{
    return vecchia_log_pdf(x, CovarianceSource(locs, spec), plan);
}

}  // namespace vcdf
