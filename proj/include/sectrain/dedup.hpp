#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sectrain/corpus.hpp"
#include "sectrain/util/hash.hpp"
#include "sectrain/util/utf8.hpp"

namespace sectrain::dedup {

struct DropEntry {
    std::string id;
    std::string duplicate_of;
    std::string reason;

    bool operator==(const DropEntry&) const = default;
};

// ---------------------------------------------------------------------------
// Exact (document hash) tier

struct ExactDedupResult {
    std::vector<CorpusRecord> kept;
    std::vector<DropEntry> dropped;
};

/// Keeps the first occurrence of each byte-identical text.
inline ExactDedupResult exact_dedup(std::vector<CorpusRecord> records) {
    ExactDedupResult out;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;  // -> indices into out.kept
    for (auto& r : records) {
        auto& bucket = by_hash[fnv1a64(r.text)];
        const auto hit = std::find_if(bucket.begin(), bucket.end(),
                                      [&](std::size_t k) { return out.kept[k].text == r.text; });
        if (hit != bucket.end()) {
            out.dropped.push_back({r.id, out.kept[*hit].id, "exact_duplicate"});
            continue;
        }
        bucket.push_back(out.kept.size());
        out.kept.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// MinHash tier

struct MinHashSignature {
    std::vector<std::uint64_t> hashes;
    std::size_t shingle_width = 0;
    std::uint64_t seed = 0;

    /// Fraction of agreeing positions; estimates shingle-set Jaccard.
    double similarity(const MinHashSignature& other) const {
        if (hashes.size() != other.hashes.size() || shingle_width != other.shingle_width || seed != other.seed) {
            throw std::invalid_argument("signatures built with different parameters");
        }
        if (hashes.empty()) return 0.0;
        std::size_t agree = 0;
        for (std::size_t i = 0; i < hashes.size(); ++i) agree += hashes[i] == other.hashes[i];
        return static_cast<double>(agree) / static_cast<double>(hashes.size());
    }

    bool operator==(const MinHashSignature&) const = default;
};

class ShingleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Hashes of every w-token shingle (lowercased, whitespace-split tokens).
inline std::vector<std::uint64_t> shingle_hashes(std::string_view text, std::size_t w) {
    if (w == 0) throw std::invalid_argument("shingle width must be positive");
    const auto tokens = utf8::lower_tokens(text);
    if (tokens.size() < w) throw ShingleError("too short to shingle");
    std::vector<std::uint64_t> out;
    out.reserve(tokens.size() - w + 1);
    for (std::size_t i = 0; i + w <= tokens.size(); ++i) {
        std::uint64_t h = kFnvOffset;
        for (std::size_t k = 0; k < w; ++k) {
            if (k) h = fnv1a64("\x1f", h);
            h = fnv1a64(tokens[i + k], h);
        }
        out.push_back(h);
    }
    return out;
}

inline MinHashSignature minhash_signature(std::string_view text, std::size_t w, std::size_t num_hashes,
                                          std::uint64_t seed) {
    if (num_hashes == 0) throw std::invalid_argument("hash count must be positive");
    const auto shingles = shingle_hashes(text, w);
    MinHashSignature sig{std::vector<std::uint64_t>(num_hashes, std::numeric_limits<std::uint64_t>::max()), w,
                         seed};
    for (std::size_t j = 0; j < num_hashes; ++j) {
        const std::uint64_t salt = splitmix64(seed * 0x2545F4914F6CDD1DULL + j);
        std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
        for (const auto s : shingles) m = std::min(m, splitmix64(s ^ salt));
        sig.hashes[j] = m;
    }
    return sig;
}

struct NearDuplicateCluster {
    std::vector<std::size_t> members;  // ascending input positions
    std::size_t keeper = 0;            // lowest member
};

struct LshResult {
    std::vector<NearDuplicateCluster> clusters;
    std::vector<std::size_t> droppable;  // ascending
    std::size_t candidate_pairs = 0;
    std::size_t confirmed_pairs = 0;
};

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

/**
 * Banded LSH over MinHash signatures.
 *
 * Pairs colliding in any band are confirmed by signature agreement
 * >= `threshold`; clusters are connected components of confirmed pairs.
 * The lowest input position in each cluster is kept.
 */
inline LshResult lsh_near_duplicates(std::span<const MinHashSignature> sigs, std::size_t bands, std::size_t rows,
                                     double threshold) {
    LshResult out;
    if (sigs.empty()) return out;
    const std::size_t h = sigs.front().hashes.size();
    if (bands * rows != h) {
        throw std::invalid_argument("bands*rows (" + std::to_string(bands * rows) + ") != hash count (" +
                                    std::to_string(h) + ")");
    }
    for (const auto& s : sigs) {
        if (s.hashes.size() != h) throw std::invalid_argument("signatures differ in length");
    }

    std::vector<std::uint64_t> pairs;
    for (std::size_t b = 0; b < bands; ++b) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < sigs.size(); ++i) {
            std::uint64_t key = splitmix64(b + 1);
            for (std::size_t r = 0; r < rows; ++r) key = hash_combine(key, sigs[i].hashes[b * rows + r]);
            buckets[key].push_back(i);
        }
        for (const auto& [_, members] : buckets) {
            for (std::size_t x = 0; x < members.size(); ++x) {
                for (std::size_t y = x + 1; y < members.size(); ++y) {
                    pairs.push_back((static_cast<std::uint64_t>(members[x]) << 32) | members[y]);
                }
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    out.candidate_pairs = pairs.size();

    detail::DisjointSets sets(sigs.size());
    for (const auto p : pairs) {
        const std::size_t a = p >> 32, b = p & 0xffffffffULL;
        if (sigs[a].similarity(sigs[b]) >= threshold) {
            ++out.confirmed_pairs;
            sets.unite(a, b);
        }
    }

    std::unordered_map<std::size_t, std::size_t> root_to_cluster;
    std::vector<NearDuplicateCluster> clusters;
    for (std::size_t i = 0; i < sigs.size(); ++i) {
        const auto root = sets.find(i);
        auto [it, inserted] = root_to_cluster.try_emplace(root, clusters.size());
        if (inserted) clusters.push_back({{}, i});
        clusters[it->second].members.push_back(i);
    }
    for (auto& c : clusters) {
        if (c.members.size() < 2) continue;
        out.droppable.insert(out.droppable.end(), c.members.begin() + 1, c.members.end());
        out.clusters.push_back(std::move(c));
    }
    std::sort(out.droppable.begin(), out.droppable.end());
    return out;
}

// ---------------------------------------------------------------------------
// Feature-space tier

/// Sparse nonnegative code in a `dim`-dimensional feature space.
struct SparseFeatureVector {
    std::vector<std::uint32_t> indices;  // strictly increasing
    std::vector<double> values;          // positive
    std::uint32_t dim = 0;

    std::size_t nnz() const noexcept { return indices.size(); }
    bool operator==(const SparseFeatureVector&) const = default;
};

inline double squared_norm(const SparseFeatureVector& v) noexcept {
    double s = 0.0;
    for (double x : v.values) s += x * x;
    return s;
}

inline double dot(const SparseFeatureVector& a, const SparseFeatureVector& b) noexcept {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) {
            ++i;
        } else if (a.indices[i] > b.indices[j]) {
            ++j;
        } else {
            s += a.values[i++] * b.values[j++];
        }
    }
    return s;
}

/// Cosine similarity; 0 when either vector is empty.
inline double cosine(const SparseFeatureVector& a, const SparseFeatureVector& b) noexcept {
    const double na = squared_norm(a), nb = squared_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
}

/// Dense-to-sparse encoder. A trained TopK sparse autoencoder plugs in here.
class SparseEncoder {
public:
    virtual ~SparseEncoder() = default;
    virtual SparseFeatureVector encode(std::span<const double> embedding) const = 0;
};

/**
 * @brief Seeded random-projection TopK encoder.
 *
 * Projects onto dim/2 Rademacher directions; feature 2k carries the positive
 * part of projection k and feature 2k+1 the negative part, so every value is
 * a positive magnitude and opposite vectors land on disjoint supports. Keeps
 * the `k_active` largest features (ties to the lower index).
 */
class RandomProjectionEncoder final : public SparseEncoder {
public:
    RandomProjectionEncoder(std::size_t input_dim, std::uint32_t dim = 65536, std::size_t k_active = 64,
                            std::uint64_t seed = 0)
        : input_dim_(input_dim), dim_(dim), k_active_(k_active), seed_(seed) {
        if (input_dim == 0) throw std::invalid_argument("input dimension must be positive");
        if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("feature dimension must be even and >= 2");
        if (k_active == 0) throw std::invalid_argument("k_active must be positive");
    }

    std::size_t input_dim() const noexcept { return input_dim_; }

    SparseFeatureVector encode(std::span<const double> x) const override {
        if (x.size() != input_dim_) {
            throw std::invalid_argument("embedding dimension " + std::to_string(x.size()) + " != expected " +
                                        std::to_string(input_dim_));
        }
        const std::size_t directions = dim_ / 2;
        const std::size_t blocks = (input_dim_ + 63) / 64;
        std::vector<std::pair<double, std::uint32_t>> active;  // (value, feature index)
        active.reserve(directions);
        for (std::size_t k = 0; k < directions; ++k) {
            double p = 0.0;
            for (std::size_t blk = 0; blk < blocks; ++blk) {
                const std::uint64_t bits = splitmix64(hash_combine(seed_, k * blocks + blk));
                const std::size_t end = std::min(input_dim_, (blk + 1) * 64);
                for (std::size_t j = blk * 64; j < end; ++j) {
                    p += ((bits >> (j - blk * 64)) & 1U) ? x[j] : -x[j];
                }
            }
            if (p > 0.0) {
                active.emplace_back(p, static_cast<std::uint32_t>(2 * k));
            } else if (p < 0.0) {
                active.emplace_back(-p, static_cast<std::uint32_t>(2 * k + 1));
            }
        }
        const auto by_strength = [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        };
        const std::size_t keep = std::min(k_active_, active.size());
        std::partial_sort(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(keep), active.end(),
                          by_strength);
        active.resize(keep);
        std::sort(active.begin(), active.end(), [](const auto& a, const auto& b) { return a.second < b.second; });

        SparseFeatureVector v;
        v.dim = dim_;
        for (const auto& [value, index] : active) {
            v.indices.push_back(index);
            v.values.push_back(value);
        }
        return v;
    }

private:
    std::size_t input_dim_;
    std::uint32_t dim_;
    std::size_t k_active_;
    std::uint64_t seed_;
};

inline SparseFeatureVector encode_sparse_features(std::span<const double> embedding, std::uint32_t dim,
                                                  std::size_t k_active, std::uint64_t seed) {
    return RandomProjectionEncoder(embedding.size(), dim, k_active, seed).encode(embedding);
}

struct GraphEdge {
    std::size_t a = 0;
    std::size_t b = 0;  // a < b
    double weight = 0.0;
};

/// Nodes are input positions; an edge joins every pair with cosine >= tau.
struct NeighborhoodGraph {
    std::size_t nodes = 0;
    double tau = 0.0;
    std::vector<GraphEdge> edges;
};

inline NeighborhoodGraph build_neighborhood_graph(std::span<const SparseFeatureVector> vectors, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
    NeighborhoodGraph g{vectors.size(), tau, {}};
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) {
            const double c = cosine(vectors[i], vectors[j]);
            if (c >= tau) g.edges.push_back({i, j, c});
        }
    }
    return g;
}

struct FeatureDedupResult {
    std::vector<std::size_t> retained;  // ascending
    std::vector<std::size_t> removed;   // in removal order
    std::size_t edges = 0;
};

/**
 * Density-aware pruning over the cosine neighborhood graph.
 *
 * Local density is the weighted degree over surviving neighbors. While any
 * edge survives, the densest node is removed; among equal densities the
 * highest position goes first so earlier records are kept. Only the removed
 * node's neighbors are rescored. Sums run over neighbors in ascending order.
 */
inline FeatureDedupResult prune_graph(const NeighborhoodGraph& g) {
    const std::size_t n = g.nodes;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const auto& e : g.edges) {
        adj[e.a].emplace_back(e.b, e.weight);
        adj[e.b].emplace_back(e.a, e.weight);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());

    std::vector<bool> alive(n, true);
    std::vector<double> density(n, 0.0);
    std::vector<std::size_t> degree(n, 0);
    const auto rescore = [&](std::size_t i) {
        double s = 0.0;
        std::size_t d = 0;
        for (const auto& [j, w] : adj[i]) {
            if (alive[j]) {
                s += w;
                ++d;
            }
        }
        density[i] = s;
        degree[i] = d;
    };
    for (std::size_t i = 0; i < n; ++i) rescore(i);

    FeatureDedupResult out;
    out.edges = g.edges.size();
    for (;;) {
        std::size_t victim = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i] || degree[i] == 0) continue;
            if (victim == n || density[i] >= density[victim]) victim = i;
        }
        if (victim == n) break;
        alive[victim] = false;
        out.removed.push_back(victim);
        for (const auto& [j, _] : adj[victim]) {
            if (alive[j]) rescore(j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (alive[i]) out.retained.push_back(i);
    }
    return out;
}

inline FeatureDedupResult feature_dedup(std::span<const SparseFeatureVector> vectors, double tau) {
    return prune_graph(build_neighborhood_graph(vectors, tau));
}

}  // namespace sectrain::dedup
