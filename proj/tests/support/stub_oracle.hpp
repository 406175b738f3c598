#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sectrain/longctx.hpp"
#include "sectrain/oracles.hpp"

/// Entropy oracle with a fixed profile; a context maps to a fixed entropy at every position.
class StubOracle final : public sectrain::EntropyOracle {
public:
    explicit StubOracle(std::vector<double> profile) : profile_(std::move(profile)) {}

    void on_context(const std::string& passage, double entropy) {
        after_[sectrain::longctx::candidate_context(passage)] = entropy;
    }

    std::vector<double> entropy_profile(std::string_view) const override { return profile_; }

    double entropy_at(std::string_view context, std::string_view, std::size_t position) const override {
        if (context.empty()) return profile_.at(position);
        return after_.at(std::string(context));
    }

private:
    std::vector<double> profile_;
    std::map<std::string, double> after_;
};

/// An `after` whose computed reduction from `before` is exactly `target`,
/// searched within a few hundred ulps of the real-valued answer.
inline std::optional<double> after_for_exact_reduction(double before, double target) {
    const double guess = before * (1.0 - target);
    double up = guess, down = guess;
    for (int i = 0; i < 512; ++i) {
        if (sectrain::longctx::relative_reduction(before, down) == target) return down;
        if (sectrain::longctx::relative_reduction(before, up) == target) return up;
        down = std::nextafter(down, 0.0);
        up = std::nextafter(up, before);
    }
    return std::nullopt;
}
