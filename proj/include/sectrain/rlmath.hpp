#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sectrain/util/rng.hpp"

namespace sectrain::rlmath {

/// (r - mean) / population std; all zeros when the rewards are constant.
inline std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.empty()) throw std::invalid_argument("empty reward group");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> out(rewards.size(), 0.0);
    if (sd == 0.0) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

struct GrpoConfig {
    double epsilon = 0.2;
    double kl_coef = 0.0;
    double pass_low = 0.10;
    double pass_high = 0.95;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
        if (!(kl_coef >= 0.0)) throw std::invalid_argument("kl_coef must be nonnegative");
        if (!(pass_low >= 0.0 && pass_low < pass_high && pass_high <= 1.0)) {
            throw std::invalid_argument("need 0 <= pass_low < pass_high <= 1");
        }
    }
};

enum class MaskDecision { keep, drop_low, drop_high };

inline const char* to_string(MaskDecision d) noexcept {
    switch (d) {
        case MaskDecision::keep: return "keep";
        case MaskDecision::drop_low: return "drop_low";
        case MaskDecision::drop_high: return "drop_high";
    }
    return "?";
}

inline MaskDecision difficulty_mask_rate(double pass_rate, const GrpoConfig& config = {}) {
    if (pass_rate < config.pass_low) return MaskDecision::drop_low;
    if (pass_rate > config.pass_high) return MaskDecision::drop_high;
    return MaskDecision::keep;
}

inline MaskDecision difficulty_mask(std::size_t pass_count, std::size_t group_size, const GrpoConfig& config = {}) {
    if (group_size == 0 || pass_count > group_size) throw std::invalid_argument("need 0 <= pass_count <= G, G >= 1");
    return difficulty_mask_rate(static_cast<double>(pass_count) / static_cast<double>(group_size), config);
}

/// Per-token exp(d) - d - 1 with d = ref - policy.
inline std::vector<double> kl_penalty(std::span<const double> policy_logprobs, std::span<const double> ref_logprobs) {
    if (policy_logprobs.size() != ref_logprobs.size()) throw std::invalid_argument("logprob length mismatch");
    std::vector<double> out(policy_logprobs.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        const double d = ref_logprobs[t] - policy_logprobs[t];
        out[t] = std::expm1(d) - d;
    }
    return out;
}

struct GrpoResponse {
    double advantage = 0.0;
    std::vector<double> ratios;            // per-token importance ratios
    std::vector<double> policy_logprobs;   // optional unless kl_coef > 0
    std::vector<double> ref_logprobs;
};

struct GrpoLoss {
    double loss = 0.0;
    double surrogate = 0.0;  // mean over responses of the per-token-mean clipped objective
    double kl = 0.0;         // mean over responses of the summed per-token KL
    std::vector<bool> clipped;
};

inline double clip(double x, double lo, double hi) noexcept { return std::min(std::max(x, lo), hi); }

/// Clipped per-token objective min(rho*A, clip(rho)*A).
inline double clipped_objective(double rho, double advantage, double epsilon) noexcept {
    return std::min(rho * advantage, clip(rho, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

/**
 * loss = -(mean_i surrogate_i - kl_coef * mean_i KL_i)
 *
 * surrogate_i averages the clipped objective over the tokens of response i;
 * KL_i sums the per-token estimates. A response counts as clipped when the
 * clipped branch was active at any token.
 */
inline GrpoLoss grpo_loss(std::span<const GrpoResponse> group, const GrpoConfig& config) {
    config.validate();
    if (group.empty()) throw std::invalid_argument("empty group");
    GrpoLoss out;
    out.clipped.assign(group.size(), false);
    for (std::size_t i = 0; i < group.size(); ++i) {
        const auto& r = group[i];
        if (r.ratios.empty()) throw std::invalid_argument("response " + std::to_string(i) + " has no tokens");
        double s = 0.0;
        for (double rho : r.ratios) {
            if (!(rho > 0.0)) throw std::invalid_argument("importance ratio must be positive");
            const double unclipped = rho * r.advantage;
            const double obj = clipped_objective(rho, r.advantage, config.epsilon);
            if (obj < unclipped) out.clipped[i] = true;
            s += obj;
        }
        out.surrogate += s / static_cast<double>(r.ratios.size());
        if (config.kl_coef > 0.0 || !r.policy_logprobs.empty() || !r.ref_logprobs.empty()) {
            if (r.policy_logprobs.size() != r.ratios.size() || r.ref_logprobs.size() != r.ratios.size()) {
                throw std::invalid_argument("response " + std::to_string(i) + ": token length mismatch");
            }
            const auto kl = kl_penalty(r.policy_logprobs, r.ref_logprobs);
            out.kl += std::accumulate(kl.begin(), kl.end(), 0.0);
        }
    }
    const double g = static_cast<double>(group.size());
    out.surrogate /= g;
    out.kl /= g;
    out.loss = -(out.surrogate - config.kl_coef * out.kl);
    return out;
}

struct DivergenceMask {
    std::size_t index = 0;
    std::vector<bool> chosen;
    std::vector<bool> rejected;
    bool diverged = true;  // false for identical sequences (masks all false)
};

inline DivergenceMask branch_divergence_mask(std::span<const std::int64_t> chosen,
                                             std::span<const std::int64_t> rejected) {
    if (chosen.empty() || rejected.empty()) throw std::invalid_argument("sequences must be nonempty");
    DivergenceMask m;
    const std::size_t n = std::min(chosen.size(), rejected.size());
    while (m.index < n && chosen[m.index] == rejected[m.index]) ++m.index;
    m.chosen.assign(chosen.size(), false);
    m.rejected.assign(rejected.size(), false);
    if (m.index == n && chosen.size() == rejected.size()) {
        m.diverged = false;
        return m;
    }
    for (std::size_t t = m.index; t < chosen.size(); ++t) m.chosen[t] = true;
    for (std::size_t t = m.index; t < rejected.size(); ++t) m.rejected[t] = true;
    return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/**
 * Gradient surgery: each task gradient is projected, in a seeded random order
 * over the other tasks, onto the normal plane of every original gradient it
 * conflicts with. Zero-norm partners are skipped.
 */
inline std::vector<std::vector<double>> pcgrad(const std::vector<std::vector<double>>& grads, std::uint64_t seed) {
    if (grads.size() < 2) throw std::invalid_argument("pcgrad needs at least two tasks");
    for (const auto& g : grads) {
        if (g.size() != grads.front().size()) throw std::invalid_argument("gradient dimension mismatch");
    }
    std::vector<double> sq(grads.size());
    for (std::size_t j = 0; j < grads.size(); ++j) sq[j] = dot(grads[j], grads[j]);
    Rng rng(seed);
    std::vector<std::vector<double>> out = grads;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < grads.size(); ++j) {
            if (j != i) order.push_back(j);
        }
        rng.shuffle(order);
        auto& g = out[i];
        for (const auto j : order) {
            if (sq[j] == 0.0) continue;
            const double d = dot(g, grads[j]);
            if (d >= 0.0) continue;
            const double c = d / sq[j];
            for (std::size_t k = 0; k < g.size(); ++k) g[k] -= c * grads[j][k];
        }
    }
    return out;
}

}  // namespace sectrain::rlmath
