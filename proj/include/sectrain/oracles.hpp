#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sectrain {

struct CorpusRecord;

// Plug-in points for model-backed judgements. Every pipeline stage runs
// against these interfaces; the shipped baselines are model-free.

class LanguageOracle {
public:
    virtual ~LanguageOracle() = default;
    /// ISO-639-1 style code, or "und" when no language is recognized.
    virtual std::string identify(std::string_view text) const = 0;
};

class PerplexityOracle {
public:
    virtual ~PerplexityOracle() = default;
    virtual double perplexity(std::string_view text) const = 0;
};

/// Per-position next-token entropy in nats. Positions are oracle-defined
/// token indices into the document.
class EntropyOracle {
public:
    virtual ~EntropyOracle() = default;
    virtual std::vector<double> entropy_profile(std::string_view doc) const = 0;
    /// Entropy at `position` of `doc` when `context` is placed before it.
    virtual double entropy_at(std::string_view context, std::string_view doc, std::size_t position) const = 0;
    /// Batched form of entropy_at over ascending positions.
    virtual std::vector<double> entropies_at(std::string_view context, std::string_view doc,
                                             std::span<const std::size_t> positions) const {
        std::vector<double> out;
        out.reserve(positions.size());
        for (const auto p : positions) out.push_back(entropy_at(context, doc, p));
        return out;
    }
};

/// Four judge scores in [0,1]: alignment, response quality, complexity, safety.
using DimensionScores = std::array<double, 4>;

class QualityJudge {
public:
    virtual ~QualityJudge() = default;
    virtual std::optional<DimensionScores> score(const CorpusRecord& record) const = 0;
};

}  // namespace sectrain
