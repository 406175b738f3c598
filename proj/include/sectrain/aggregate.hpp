#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sectrain/corpus.hpp"
#include "sectrain/util/rng.hpp"
#include "sectrain/util/utf8.hpp"

namespace sectrain::aggregate {

/// Budget estimate: ceil(1.3 * whitespace tokens).
inline std::size_t estimate_tokens(std::string_view text) noexcept {
    return (13 * utf8::word_count(text) + 9) / 10;
}

// ---------------------------------------------------------------------------
// Vector helpers

inline double norm(std::span<const double> x) noexcept {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline std::vector<double> normalized(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    const double n = norm(x);
    if (n > 0.0) {
        for (double& v : out) v /= n;
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
    return out;
}

inline double dense_dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double dense_cosine(std::span<const double> a, std::span<const double> b) noexcept {
    const double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dense_dot(a, b) / (na * nb);
}

inline double sq_cos_dist(std::span<const double> a, std::span<const double> b) noexcept {
    const double d = std::max(0.0, 1.0 - dense_dot(a, b));
    return d * d;
}

// ---------------------------------------------------------------------------
// Hierarchical clustering

struct ClusterTree {
    /// assignment[level][record] -> cluster id at that level (level 0 is the coarsest split)
    std::vector<std::vector<std::size_t>> assignment;
    /// parent[level][cluster] -> cluster id one level up (level 0 parents are all 0, the root)
    std::vector<std::vector<std::size_t>> parent;

    std::size_t levels() const noexcept { return assignment.size(); }
    std::size_t cluster_count(std::size_t level) const noexcept { return parent[level].size(); }
    const std::vector<std::size_t>& leaves() const { return assignment.back(); }
};

/// Sum over clusters of the norm of the summed unit vectors (spherical k-means objective).
inline double spherical_objective(const std::vector<std::vector<double>>& unit,
                                  const std::vector<std::size_t>& members,
                                  const std::vector<std::size_t>& labels, std::size_t k) {
    const std::size_t d = unit.empty() ? 0 : unit.front().size();
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    for (std::size_t m = 0; m < members.size(); ++m) {
        for (std::size_t j = 0; j < d; ++j) sums[labels[m]][j] += unit[members[m]][j];
    }
    double total = 0.0;
    for (const auto& s : sums) total += norm(s);
    return total;
}

/**
 * Seeded spherical k-means over `members` (indices into `unit`).
 *
 * Greedy k-means++ seeding on squared cosine distance, at most `max_iter`
 * Lloyd rounds.
 * Returns labels in [0, k') with empty clusters dropped and labels ordered by
 * first member.
 */
inline std::vector<std::size_t> spherical_kmeans(const std::vector<std::vector<double>>& unit,
                                                 const std::vector<std::size_t>& members, std::size_t k,
                                                 Rng& rng, std::size_t max_iter = 50) {
    const std::size_t n = members.size();
    std::vector<std::size_t> labels(n, 0);
    if (n == 0 || k <= 1) return labels;

    // greedy k-means++: squared cosine distance, a few sampled trials per center
    std::vector<std::vector<double>> centers;
    centers.push_back(unit[members[rng.below(n)]]);
    std::vector<double> closest(n);
    for (std::size_t m = 0; m < n; ++m) closest[m] = sq_cos_dist(unit[members[m]], centers[0]);
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    while (centers.size() < k) {
        const double total = std::accumulate(closest.begin(), closest.end(), 0.0);
        if (total <= 0.0) break;
        std::size_t best_pick = n;
        double best_potential = 0.0;
        std::vector<double> best_closest;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            double target = rng.uniform() * total;
            std::size_t pick = n;
            for (std::size_t m = 0; m < n; ++m) {
                if (closest[m] <= 0.0) continue;
                pick = m;
                if (target < closest[m]) break;
                target -= closest[m];
            }
            std::vector<double> cand(n);
            double potential = 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                cand[m] = std::min(closest[m], sq_cos_dist(unit[members[m]], unit[members[pick]]));
                potential += cand[m];
            }
            if (best_pick == n || potential < best_potential) {
                best_pick = pick;
                best_potential = potential;
                best_closest = std::move(cand);
            }
        }
        centers.push_back(unit[members[best_pick]]);
        closest = std::move(best_closest);
    }

    const std::size_t d = unit[members.front()].size();
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t m = 0; m < n; ++m) {
            std::size_t best = 0;
            double best_sim = -2.0;
            for (std::size_t c = 0; c < centers.size(); ++c) {
                const double s = dense_dot(unit[members[m]], centers[c]);
                if (s > best_sim) {
                    best_sim = s;
                    best = c;
                }
            }
            changed = changed || iter == 0 || labels[m] != best;
            labels[m] = best;
        }
        if (!changed) break;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            std::vector<double> sum(d, 0.0);
            for (std::size_t m = 0; m < n; ++m) {
                if (labels[m] != c) continue;
                for (std::size_t j = 0; j < d; ++j) sum[j] += unit[members[m]][j];
            }
            if (norm(sum) > 0.0) centers[c] = normalized(sum);
        }
    }

    std::vector<std::size_t> relabel(centers.size(), SIZE_MAX);
    std::size_t next = 0;
    for (auto& l : labels) {
        if (relabel[l] == SIZE_MAX) relabel[l] = next++;
        l = relabel[l];
    }
    return labels;
}

/**
 * Recursive spherical k-means: every cluster at one level is split into at
 * most `branching` children at the next. A cluster with fewer than
 * `branching` members, or whose split does not raise the objective, stays
 * whole. Cluster ids at each level are assigned in parent order, then child
 * order.
 */
inline ClusterTree cluster_hierarchical(std::span<const std::vector<double>> embeddings, std::size_t levels,
                                        std::size_t branching, std::uint64_t seed, std::size_t max_iter = 50) {
    if (levels == 0) throw std::invalid_argument("levels must be >= 1");
    if (branching < 2) throw std::invalid_argument("branching must be >= 2");
    const std::size_t n = embeddings.size();
    for (const auto& e : embeddings) {
        if (e.size() != embeddings.front().size()) throw std::invalid_argument("embeddings differ in dimension");
    }
    std::vector<std::vector<double>> unit;
    unit.reserve(n);
    for (const auto& e : embeddings) unit.push_back(normalized(e));

    ClusterTree tree;
    std::vector<std::vector<std::size_t>> groups;
    if (n > 0) {
        groups.emplace_back(n);
        for (std::size_t i = 0; i < n; ++i) groups.back()[i] = i;
    }
    for (std::size_t level = 0; level < levels; ++level) {
        std::vector<std::size_t> assign(n, 0);
        std::vector<std::size_t> parents;
        std::vector<std::vector<std::size_t>> next_groups;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& members = groups[g];
            std::vector<std::size_t> labels(members.size(), 0);
            std::size_t k = 1;
            if (members.size() >= branching) {
                Rng rng(derive_seed(seed, (level << 32) ^ g));
                auto split = spherical_kmeans(unit, members, branching, rng, max_iter);
                const std::size_t k_split = *std::max_element(split.begin(), split.end()) + 1;
                const std::vector<std::size_t> whole(members.size(), 0);
                const double before = spherical_objective(unit, members, whole, 1);
                const double after = spherical_objective(unit, members, split, k_split);
                if (k_split > 1 && after > before * (1.0 + 1e-12) + 1e-12) {
                    labels = std::move(split);
                    k = k_split;
                }
            }
            const std::size_t base = next_groups.size();
            next_groups.resize(base + k);
            parents.resize(base + k, level == 0 ? 0 : g);
            for (std::size_t m = 0; m < members.size(); ++m) {
                assign[members[m]] = base + labels[m];
                next_groups[base + labels[m]].push_back(members[m]);
            }
        }
        if (n == 0) parents.push_back(0);
        tree.assignment.push_back(std::move(assign));
        tree.parent.push_back(std::move(parents));
        groups = std::move(next_groups);
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Context windows

struct WindowItem {
    std::string id;
    SourceCategory category = SourceCategory::open_external;
    std::size_t tokens = 0;
    std::optional<std::vector<double>> embedding;
    double score = 0.0;  // informativeness
};

struct TrainingSequence {
    std::vector<std::string> ids;
    std::size_t budget = 0;
    std::size_t tokens = 0;
    std::vector<double> scores;  // parallel to ids
    std::map<std::string, std::size_t> diversity;  // source_category histogram

    bool operator==(const TrainingSequence&) const = default;
};

struct WindowResult {
    std::vector<TrainingSequence> windows;
    std::vector<std::string> oversized;  // items that alone exceed the budget
};

/// Recency-weighted category novelty: 1 minus the category's share of the
/// window, where the k-th most recent member weighs 2^-k.
inline double category_novelty(const std::vector<SourceCategory>& window_categories, SourceCategory c) {
    double total = 0.0, mine = 0.0, w = 1.0;
    for (auto it = window_categories.rbegin(); it != window_categories.rend(); ++it, w *= 0.5) {
        total += w;
        if (*it == c) mine += w;
    }
    return total > 0.0 ? 1.0 - mine / total : 1.0;
}

/**
 * Greedy complementarity-aware window assembly.
 *
 * Each window starts from a seeded random remaining item. The next item is
 * the one that fits the remaining budget and maximizes
 *   (1 - diversity_weight) * cos(item, window centroid)
 *     + diversity_weight * category_novelty(item)
 * with ties to the earliest item. A window closes when nothing fits.
 */
inline WindowResult build_context_windows(std::span<const WindowItem> items, std::size_t budget,
                                          double diversity_weight, std::uint64_t seed) {
    if (!(diversity_weight >= 0.0 && diversity_weight <= 1.0)) {
        throw std::invalid_argument("diversity_weight must lie in [0, 1]");
    }
    if (budget == 0) throw std::invalid_argument("budget must be positive");
    WindowResult out;
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].tokens > budget) {
            out.oversized.push_back(items[i].id);
        } else {
            remaining.push_back(i);
        }
    }
    std::size_t dim = 0;
    for (const auto& it : items) {
        if (it.embedding) dim = std::max(dim, it.embedding->size());
    }
    std::vector<std::vector<double>> unit(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        unit[i] = items[i].embedding ? normalized(*items[i].embedding) : std::vector<double>(dim, 0.0);
    }

    Rng rng(seed);
    while (!remaining.empty()) {
        const std::size_t pick = rng.below(remaining.size());
        std::vector<std::size_t> window = {remaining[pick]};
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
        std::size_t used = items[window.front()].tokens;
        std::vector<double> centroid = unit[window.front()];
        std::vector<SourceCategory> cats = {items[window.front()].category};

        for (;;) {
            std::size_t best = remaining.size();
            double best_score = 0.0;
            for (std::size_t r = 0; r < remaining.size(); ++r) {
                const auto& item = items[remaining[r]];
                if (used + item.tokens > budget) continue;
                const double sim = dense_cosine(unit[remaining[r]], centroid);
                const double score = (1.0 - diversity_weight) * sim +
                                     diversity_weight * category_novelty(cats, item.category);
                if (best == remaining.size() || score > best_score) {
                    best = r;
                    best_score = score;
                }
            }
            if (best == remaining.size()) break;
            const std::size_t chosen = remaining[best];
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
            window.push_back(chosen);
            used += items[chosen].tokens;
            for (std::size_t j = 0; j < centroid.size() && j < unit[chosen].size(); ++j) centroid[j] += unit[chosen][j];
            cats.push_back(items[chosen].category);
        }

        TrainingSequence seq;
        seq.budget = budget;
        seq.tokens = used;
        for (const auto i : window) {
            seq.ids.push_back(items[i].id);
            seq.scores.push_back(items[i].score);
            ++seq.diversity[std::string(to_string(items[i].category))];
        }
        out.windows.push_back(std::move(seq));
    }
    return out;
}

/// Stable sort by score, highest first.
inline TrainingSequence reorder_by_informativeness(const TrainingSequence& seq, std::span<const double> scores) {
    if (scores.size() != seq.ids.size()) {
        throw std::invalid_argument("score count " + std::to_string(scores.size()) + " != record count " +
                                    std::to_string(seq.ids.size()));
    }
    std::vector<std::size_t> order(seq.ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    TrainingSequence out = seq;
    for (std::size_t k = 0; k < order.size(); ++k) {
        out.ids[k] = seq.ids[order[k]];
        out.scores[k] = scores[order[k]];
    }
    return out;
}

inline TrainingSequence reorder_by_informativeness(const TrainingSequence& seq) {
    return reorder_by_informativeness(seq, seq.scores);
}

inline json to_json(const TrainingSequence& s) {
    json j = json::object();
    j["record_ids"] = s.ids;
    j["scores"] = s.scores;
    j["tokens"] = s.tokens;
    j["budget"] = s.budget;
    json d = json::object();
    for (const auto& [k, v] : s.diversity) d[k] = v;
    j["diversity"] = std::move(d);
    return j;
}

}  // namespace sectrain::aggregate
