#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sectrain/corpus.hpp"
#include "sectrain/oracles.hpp"
#include "sectrain/util/utf8.hpp"

namespace sectrain::quality {

// ---------------------------------------------------------------------------
// Heuristic filter

struct FilterThresholds {
    std::size_t min_len = 64;         // code points
    std::size_t max_len = 1'000'000;  // code points
    std::set<std::string> allowed_languages;  // empty: any language
    std::optional<double> max_perplexity;     // unset: no perplexity check
};

struct FilterVerdict {
    bool keep = true;
    std::string reason;  // empty when kept

    static FilterVerdict pass() { return {}; }
    static FilterVerdict drop(std::string why) { return {false, std::move(why)}; }
    bool operator==(const FilterVerdict&) const = default;
};

/// Checks run in order length, language, perplexity; the first failure names the drop.
inline FilterVerdict heuristic_filter(const CorpusRecord& record, const FilterThresholds& t,
                                      const LanguageOracle* language = nullptr,
                                      const PerplexityOracle* perplexity = nullptr) {
    if (t.min_len > t.max_len) throw std::invalid_argument("min_len exceeds max_len");
    const std::size_t len = utf8::codepoint_count(record.text);
    if (len < t.min_len) return FilterVerdict::drop("too_short");
    if (len > t.max_len) return FilterVerdict::drop("too_long");
    if (!t.allowed_languages.empty()) {
        if (!language) throw std::invalid_argument("language filter requires a language oracle");
        if (!t.allowed_languages.contains(language->identify(record.text))) return FilterVerdict::drop("language");
    }
    if (t.max_perplexity) {
        if (!perplexity) throw std::invalid_argument("perplexity filter requires a perplexity oracle");
        if (perplexity->perplexity(record.text) > *t.max_perplexity) return FilterVerdict::drop("perplexity");
    }
    return FilterVerdict::pass();
}

/// q-th quantile (0..1) by linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Composite quality score

enum Dimension : std::size_t { alignment = 0, response_quality = 1, complexity = 2, safety = 3 };

inline constexpr std::array<const char*, 4> kDimensionNames = {"alignment", "response_quality", "complexity",
                                                               "safety"};

struct QualityScore {
    DimensionScores scores{};
    std::array<double, 4> weights{};
    double q = 0.0;
};

inline constexpr double kWeightTolerance = 1e-9;

inline void validate_weights(const std::array<double, 4>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightTolerance) {
        throw std::invalid_argument("weights not normalized (sum " + std::to_string(sum) + ")");
    }
}

/// Q = sum_k weight_k * score_k.
inline QualityScore composite_quality(const DimensionScores& scores, const std::array<double, 4>& weights) {
    validate_weights(weights);
    for (std::size_t k = 0; k < 4; ++k) {
        if (!(scores[k] >= 0.0 && scores[k] <= 1.0)) {
            throw std::invalid_argument(std::string("score out of range for ") + kDimensionNames[k]);
        }
    }
    QualityScore out{scores, weights, 0.0};
    for (std::size_t k = 0; k < 4; ++k) out.q += weights[k] * scores[k];
    out.q = std::clamp(out.q, 0.0, 1.0);
    return out;
}

/// Parses "a,b,c,d".
inline std::array<double, 4> parse_weights(const std::string& text) {
    std::array<double, 4> w{};
    std::size_t k = 0, start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (k >= 4) throw std::invalid_argument("expected four weights");
        std::size_t used = 0;
        try {
            w[k++] = std::stod(piece, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad weight '" + piece + "'");
        }
        if (used != piece.size()) throw std::invalid_argument("bad weight '" + piece + "'");
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (k != 4) throw std::invalid_argument("expected four weights");
    validate_weights(w);
    return w;
}

/// Judge backed by a table of precomputed scores keyed by record id.
class TableJudge final : public QualityJudge {
public:
    TableJudge() = default;
    explicit TableJudge(std::map<std::string, DimensionScores> table) : table_(std::move(table)) {}

    /// JSON lines: {"id": ..., "alignment": x, "response_quality": x, "complexity": x, "safety": x}
    static TableJudge from_file(const std::filesystem::path& path) {
        std::map<std::string, DimensionScores> table;
        for (const auto& row : read_jsonl(path)) {
            DimensionScores s{};
            for (std::size_t k = 0; k < 4; ++k) s[k] = row.at(kDimensionNames[k]).get<double>();
            table[row.at("id").get<std::string>()] = s;
        }
        return TableJudge(std::move(table));
    }

    std::optional<DimensionScores> score(const CorpusRecord& record) const override {
        const auto it = table_.find(record.id);
        if (it == table_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::map<std::string, DimensionScores> table_;
};

}  // namespace sectrain::quality
