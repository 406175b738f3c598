#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sectrain::schedule {

struct MixingSchedule {
    double alpha_min = 0.05;  // placeholder default
    double alpha_max = 0.30;  // placeholder default
    double total_steps = 1000.0;
    double tau_warm = 100.0;

    void validate() const {
        if (!(alpha_min >= 0.0 && alpha_min <= alpha_max && alpha_max <= 1.0)) {
            throw std::invalid_argument("need 0 <= alpha_min <= alpha_max <= 1");
        }
        if (!(total_steps > 0.0)) throw std::invalid_argument("total_steps must be positive");
        if (!(tau_warm > 0.0)) throw std::invalid_argument("tau_warm must be positive");
    }
};

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Agentic-data proportion at step t: a sigmoid ramp centred on the midpoint.
inline double agentic_mix_weight(double t, const MixingSchedule& s) {
    s.validate();
    if (!(t >= 0.0 && t <= s.total_steps)) {
        throw std::out_of_range("step " + std::to_string(t) + " outside [0, " + std::to_string(s.total_steps) + "]");
    }
    return s.alpha_min + (s.alpha_max - s.alpha_min) * sigmoid((t - s.total_steps / 2.0) / s.tau_warm);
}

/// Piecewise-constant maximum sequence length.
class LengthSchedule {
public:
    struct Stage {
        std::int64_t until_step;
        std::int64_t max_tokens;
    };

    explicit LengthSchedule(std::vector<Stage> stages) : stages_(std::move(stages)) {
        if (stages_.empty()) throw std::invalid_argument("length schedule needs at least one stage");
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            if (stages_[i].max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
            if (i == 0) continue;
            if (stages_[i].until_step <= stages_[i - 1].until_step) {
                throw std::invalid_argument("stages not sorted by until_step");
            }
            if (stages_[i].max_tokens < stages_[i - 1].max_tokens) {
                throw std::invalid_argument("stages not monotone in max_tokens");
            }
        }
    }

    std::int64_t operator()(std::int64_t t) const {
        for (const auto& s : stages_) {
            if (t <= s.until_step) return s.max_tokens;
        }
        throw std::out_of_range("step " + std::to_string(t) + " beyond final stage");
    }

    const std::vector<Stage>& stages() const noexcept { return stages_; }
    std::int64_t last_step() const noexcept { return stages_.back().until_step; }

private:
    std::vector<Stage> stages_;
};

inline std::int64_t length_schedule(std::int64_t t, const LengthSchedule& s) { return s(t); }

struct ReplayState {
    double decay_rate = 0.0;  // per-step forgetting constant
    double last_trained = 0.0;

    double retention(double now) const { return std::exp(-decay_rate * (now - last_trained)); }
};

/// Sampling weights proportional to forgotten mass 1 - exp(-lambda * dt); uniform when nothing is forgotten.
inline std::vector<double> replay_weights(std::span<const ReplayState> states, double now) {
    if (states.empty()) throw std::invalid_argument("replay needs at least one state");
    std::vector<double> w;
    w.reserve(states.size());
    double total = 0.0;
    for (const auto& s : states) {
        if (!(s.decay_rate >= 0.0)) throw std::invalid_argument("decay_rate must be nonnegative");
        if (now < s.last_trained) throw std::invalid_argument("now precedes a last-trained step");
        w.push_back(-std::expm1(-s.decay_rate * (now - s.last_trained)));
        total += w.back();
    }
    if (total <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    for (double& x : w) x /= total;
    return w;
}

/// Easy-to-hard batch order: stable ascending sort of indices by complexity score.
inline std::vector<std::size_t> curriculum_order(std::span<const double> complexity) {
    std::vector<std::size_t> order(complexity.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return complexity[a] < complexity[b]; });
    return order;
}

}  // namespace sectrain::schedule
