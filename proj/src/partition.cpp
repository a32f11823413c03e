#include "fedup/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

// Split n items into counts proportional to p, exactly summing to n.
// Largest fractional remainder wins the leftovers, ties to the lower id.
std::vector<std::size_t> largest_remainder_counts(const std::vector<double>& p, std::size_t n) {
    const std::size_t k = p.size();
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> frac(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = p[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        frac[i] = {exact - std::floor(exact), i};
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t j = 0; assigned < n; ++j, ++assigned) counts[frac[j % k].second] += 1;
    return counts;
}

void repair_empty_clients(std::vector<std::vector<std::size_t>>& assignment) {
    for (;;) {
        std::size_t empty = assignment.size();
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i].empty()) {
                empty = i;
                break;
            }
        }
        if (empty == assignment.size()) return;
        std::size_t largest = 0;
        for (std::size_t i = 1; i < assignment.size(); ++i)
            if (assignment[i].size() > assignment[largest].size()) largest = i;
        if (assignment[largest].size() <= 1)
            throw UsageError("partition: not enough samples to give every client one");
        assignment[empty].push_back(assignment[largest].back());
        assignment[largest].pop_back();
    }
}

}  // namespace

PartitionPlan partition(const Dataset& d, PartitionScheme scheme, int client_count, double alpha,
                        std::uint64_t seed) {
    if (client_count < 2) throw UsageError("partition: client_count must be >= 2");
    if (static_cast<std::size_t>(client_count) > d.size())
        throw UsageError("partition: client_count exceeds sample count");
    if (scheme == PartitionScheme::dirichlet && alpha <= 0.0)
        throw UsageError("partition: alpha must be > 0");

    PartitionPlan plan;
    plan.client_count = client_count;
    plan.scheme = scheme;
    plan.alpha = alpha;
    plan.seed = seed;
    plan.assignment.resize(client_count);

    auto rng = make_rng(seed);
    const std::size_t k = static_cast<std::size_t>(client_count);

    if (scheme == PartitionScheme::iid) {
        auto idx = shuffled_indices(d.size(), rng);
        const std::size_t base = d.size() / k;
        const std::size_t rem = d.size() % k;
        std::size_t at = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t take = base + (i < rem ? 1 : 0);
            plan.assignment[i].assign(idx.begin() + at, idx.begin() + at + take);
            at += take;
        }
        return plan;
    }

    // Dirichlet: group sample indices by class, ascending class order.
    std::vector<std::vector<std::size_t>> by_class(d.num_classes);
    for (std::size_t i = 0; i < d.size(); ++i) by_class[d.labels[i]].push_back(i);

    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (auto& cls : by_class) {
        if (cls.empty()) continue;
        std::shuffle(cls.begin(), cls.end(), rng);
        std::vector<double> p(k);
        double total = 0.0;
        for (auto& v : p) {
            v = gamma(rng);
            total += v;
        }
        if (total <= 0.0) {
            std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(k));
        } else {
            for (auto& v : p) v /= total;
        }
        const auto counts = largest_remainder_counts(p, cls.size());
        std::size_t at = 0;
        for (std::size_t i = 0; i < k; ++i) {
            plan.assignment[i].insert(plan.assignment[i].end(), cls.begin() + at,
                                      cls.begin() + at + counts[i]);
            at += counts[i];
        }
    }
    repair_empty_clients(plan.assignment);
    return plan;
}

}  // namespace fedup
