#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sectrain/aggregate.hpp"
#include "sectrain/corpus.hpp"
#include "sectrain/oracles.hpp"
#include "sectrain/util/rng.hpp"
#include "sectrain/util/utf8.hpp"

namespace sectrain::longctx {

inline const std::string kSeparator = "\n\n<|context_sep|>\n\n";

struct EntropyAnchor {
    std::size_t position = 0;  // oracle token index (byte offset for the character model)
    double entropy = 0.0;      // nats
    std::string context;       // preceding text window

    bool operator==(const EntropyAnchor&) const = default;
};

struct ThresholdPolicy {
    double c = 1.0;              // threshold = mean + c * stddev
    std::size_t max_anchors = 0; // 0: unlimited; otherwise keep the highest-entropy ones
    std::size_t context_bytes = 64;
};

/// Positions whose entropy strictly exceeds mean + c * population stddev.
inline std::vector<std::size_t> threshold_positions(std::span<const double> profile, double c) {
    std::vector<std::size_t> out;
    if (profile.empty()) return out;
    const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end());
    if (*lo == *hi) return out;  // constant profile: nothing exceeds its own mean
    double mean = 0.0;
    for (double e : profile) mean += e;
    mean /= static_cast<double>(profile.size());
    double var = 0.0;
    for (double e : profile) var += (e - mean) * (e - mean);
    const double threshold = mean + c * std::sqrt(var / static_cast<double>(profile.size()));
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (profile[i] > threshold) out.push_back(i);
    }
    return out;
}

inline std::vector<EntropyAnchor> find_entropy_anchors(std::string_view doc, const EntropyOracle& oracle,
                                                       const ThresholdPolicy& policy = {}) {
    if (doc.empty()) throw std::invalid_argument("empty document");
    const auto profile = oracle.entropy_profile(doc);
    auto positions = threshold_positions(profile, policy.c);
    if (policy.max_anchors && positions.size() > policy.max_anchors) {
        std::stable_sort(positions.begin(), positions.end(),
                         [&](std::size_t a, std::size_t b) { return profile[a] > profile[b]; });
        positions.resize(policy.max_anchors);
        std::sort(positions.begin(), positions.end());
    }
    std::vector<EntropyAnchor> out;
    out.reserve(positions.size());
    for (const auto p : positions) {
        const std::size_t end = utf8::floor_boundary(doc, std::min(p, doc.size()));
        const std::size_t begin = utf8::floor_boundary(doc, end > policy.context_bytes ? end - policy.context_bytes : 0);
        out.push_back({p, profile[p], std::string(doc.substr(begin, end - begin))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verification

struct Passage {
    std::string id;
    std::string text;
};

struct VerifiedDependency {
    std::size_t anchor_position = 0;
    std::string candidate_id;
    double entropy_before = 0.0;
    double entropy_after = 0.0;
    double reduction = 0.0;  // (before - after) / before

    bool operator==(const VerifiedDependency&) const = default;
};

/// One line of the dependency audit: every (anchor, candidate) pair scored.
struct AuditEntry {
    std::size_t anchor_position = 0;
    std::string candidate_id;
    double entropy_before = 0.0;
    double entropy_after = 0.0;
    double reduction = 0.0;
    bool retained = false;
    std::string reason;  // empty when retained
};

struct VerificationResult {
    std::vector<VerifiedDependency> verified;
    std::vector<AuditEntry> audit;
};

/// Context placed in front of the document when scoring a candidate.
inline std::string candidate_context(std::string_view passage) { return std::string(passage) + kSeparator; }

inline double relative_reduction(double before, double after) noexcept { return (before - after) / before; }

/**
 * Scores every candidate at every anchor and keeps the pairs whose relative
 * entropy reduction is strictly above `min_reduction`. Anchors with zero
 * entropy are skipped as already certain.
 */
inline VerificationResult verify_candidates(std::string_view doc, std::span<const EntropyAnchor> anchors,
                                            std::span<const Passage> candidates, const EntropyOracle& oracle,
                                            double min_reduction = 0.40) {
    if (!(min_reduction >= 0.0 && min_reduction < 1.0)) throw std::invalid_argument("min_reduction must lie in [0, 1)");
    VerificationResult out;
    if (anchors.empty()) return out;
    std::vector<std::size_t> positions;
    for (const auto& a : anchors) positions.push_back(a.position);
    if (!std::is_sorted(positions.begin(), positions.end())) throw std::invalid_argument("anchors must be sorted");
    const auto before = oracle.entropies_at("", doc, positions);
    for (const auto& cand : candidates) {
        const auto after = oracle.entropies_at(candidate_context(cand.text), doc, positions);
        for (std::size_t k = 0; k < positions.size(); ++k) {
            AuditEntry e{positions[k], cand.id, before[k], after[k], 0.0, false, {}};
            if (before[k] < 0.0 || after[k] < 0.0) throw std::domain_error("oracle returned negative entropy");
            if (before[k] == 0.0) {
                e.reason = "anchor already certain";
            } else {
                e.reduction = relative_reduction(before[k], after[k]);
                if (e.reduction > min_reduction) {
                    e.retained = true;
                    out.verified.push_back({e.anchor_position, e.candidate_id, e.entropy_before, e.entropy_after,
                                            e.reduction});
                } else {
                    e.reason = "insufficient reduction";
                }
            }
            out.audit.push_back(std::move(e));
        }
    }
    std::stable_sort(out.verified.begin(), out.verified.end(),
                     [](const auto& a, const auto& b) { return a.anchor_position < b.anchor_position; });
    return out;
}

inline VerificationResult verify_candidates(std::string_view doc, const EntropyAnchor& anchor,
                                            std::span<const Passage> candidates, const EntropyOracle& oracle,
                                            double min_reduction = 0.40) {
    return verify_candidates(doc, std::span<const EntropyAnchor>(&anchor, 1), candidates, oracle, min_reduction);
}

// ---------------------------------------------------------------------------
// Assembly

enum class Placement { prepend, append };

inline Placement parse_placement(std::string_view s) {
    if (s == "prepend") return Placement::prepend;
    if (s == "append") return Placement::append;
    throw std::invalid_argument("unknown placement '" + std::string(s) + "'");
}

/// Passages referenced by `verified`, each once, in first-reference order.
inline std::vector<Passage> referenced_passages(std::span<const VerifiedDependency> verified,
                                                std::span<const Passage> pool) {
    std::vector<Passage> out;
    for (const auto& v : verified) {
        if (std::any_of(out.begin(), out.end(), [&](const auto& p) { return p.id == v.candidate_id; })) continue;
        const auto it = std::find_if(pool.begin(), pool.end(), [&](const auto& p) { return p.id == v.candidate_id; });
        if (it == pool.end()) throw std::invalid_argument("unknown candidate '" + v.candidate_id + "'");
        out.push_back(*it);
    }
    return out;
}

/**
 * Shuffles `passages` with `seed` and joins them to `doc` on the chosen side,
 * one separator between neighbours.
 */
inline CorpusRecord synthesize_long_doc(const CorpusRecord& doc, std::span<const Passage> passages,
                                        Placement placement, std::uint64_t seed) {
    if (passages.empty()) throw std::invalid_argument("no verified passages");
    std::vector<std::size_t> order(passages.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    CorpusRecord out = doc;
    std::string text;
    std::string ids;
    if (placement == Placement::append) text = doc.text;
    for (const auto i : order) {
        if (placement == Placement::append) text += kSeparator;
        text += passages[i].text;
        if (placement == Placement::prepend) text += kSeparator;
        if (!ids.empty()) ids += ',';
        ids += passages[i].id;
    }
    if (placement == Placement::prepend) text += doc.text;
    out.text = std::move(text);
    out.metadata["synthesis"] = "entropy";
    out.metadata["placement"] = placement == Placement::prepend ? "prepend" : "append";
    out.metadata["passages"] = ids;
    return out;
}

/// Paragraphs of `text` and the exact whitespace between them.
struct MetaChunks {
    std::vector<std::string> chunks;
    std::vector<std::string> gaps;  // gaps[i] sits between chunks[i] and chunks[i + 1]
    std::string lead, tail;         // whitespace before the first and after the last chunk
};

/// Splits on blank lines.
inline MetaChunks split_meta_chunks(std::string_view text) {
    MetaChunks out;
    std::size_t pos = 0;
    const auto blank_run_end = [&](std::size_t p) {
        // p points at '\n'; returns the end of the blank-line run or npos if none
        std::size_t q = p + 1;
        bool blank = false;
        for (;;) {
            std::size_t r = q;
            while (r < text.size() && (text[r] == ' ' || text[r] == '\t')) ++r;
            if (r < text.size() && text[r] == '\n') {
                blank = true;
                q = r + 1;
            } else {
                break;
            }
        }
        return blank ? q : std::string_view::npos;
    };
    std::size_t start = 0;
    while (start < text.size() && (text[start] == '\n' || text[start] == ' ' || text[start] == '\t')) ++start;
    out.lead = std::string(text.substr(0, start));
    pos = start;
    std::size_t chunk_start = start;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) break;
        const auto end = blank_run_end(nl);
        if (end == std::string_view::npos) {
            pos = nl + 1;
            continue;
        }
        if (end >= text.size()) {
            out.chunks.emplace_back(text.substr(chunk_start, nl - chunk_start));
            out.tail = std::string(text.substr(nl));
            return out;
        }
        out.chunks.emplace_back(text.substr(chunk_start, nl - chunk_start));
        out.gaps.emplace_back(text.substr(nl, end - nl));
        chunk_start = pos = end;
    }
    std::size_t stop = text.size();
    while (stop > chunk_start && (text[stop - 1] == '\n' || text[stop - 1] == ' ' || text[stop - 1] == '\t')) --stop;
    if (stop > chunk_start) out.chunks.emplace_back(text.substr(chunk_start, stop - chunk_start));
    out.tail = std::string(text.substr(stop));
    return out;
}

struct InterleaveResult {
    std::string text;
    std::vector<std::string> inserted;  // distractor ids in insertion order
    std::size_t length = 0;             // whitespace tokens
};

/**
 * Places distractors round-robin into the gaps between consecutive meta-chunks
 * (after the only chunk when there is one), in distractor order, while the
 * running length stays within `target_length` whitespace tokens. Stops at the
 * first distractor that does not fit.
 */
inline InterleaveResult interleave_hard_negatives(const MetaChunks& doc, std::span<const Passage> distractors,
                                                  std::size_t target_length) {
    if (doc.chunks.empty()) throw std::invalid_argument("document has no meta-chunks");
    std::size_t length = 0;
    for (const auto& c : doc.chunks) length += utf8::word_count(c);
    if (target_length < length) {
        throw std::invalid_argument("target_length " + std::to_string(target_length) + " below document length " +
                                    std::to_string(length));
    }
    const std::size_t slots = std::max<std::size_t>(1, doc.chunks.size() - 1);
    std::vector<std::vector<std::size_t>> placed(slots);
    InterleaveResult out;
    for (std::size_t k = 0; k < distractors.size(); ++k) {
        const std::size_t n = utf8::word_count(distractors[k].text);
        if (length + n > target_length) break;
        length += n;
        placed[k % slots].push_back(k);
        out.inserted.push_back(distractors[k].id);
    }
    out.length = length;
    out.text = doc.lead;
    for (std::size_t i = 0; i < doc.chunks.size(); ++i) {
        out.text += doc.chunks[i];
        const bool last = i + 1 == doc.chunks.size();
        if (i < slots && !placed[i].empty()) {
            const std::string gap = last ? std::string("\n\n") : doc.gaps[i];
            for (const auto k : placed[i]) {
                out.text += gap;
                out.text += distractors[k].text;
            }
        }
        if (!last) out.text += doc.gaps[i];
    }
    out.text += doc.tail;
    return out;
}

inline CorpusRecord interleave_hard_negatives(const CorpusRecord& doc, std::span<const Passage> distractors,
                                              std::size_t target_length) {
    auto r = interleave_hard_negatives(split_meta_chunks(doc.text), distractors, target_length);
    CorpusRecord out = doc;
    out.text = std::move(r.text);
    if (!r.inserted.empty()) {
        std::string ids;
        for (const auto& id : r.inserted) ids += (ids.empty() ? "" : ",") + id;
        out.metadata["synthesis"] = "nextlong";
        out.metadata["distractors"] = ids;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Retrieval

/// Indices of the k pool entries most cosine-similar to `query`, skipping
/// `exclude`; ties go to the lower index.
inline std::vector<std::size_t> cosine_top_k(std::span<const double> query,
                                             std::span<const std::vector<double>> pool, std::size_t k,
                                             std::size_t exclude = SIZE_MAX) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i == exclude || pool[i].size() != query.size()) continue;
        scored.emplace_back(aggregate::dense_cosine(query, pool[i]), i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < scored.size() && j < k; ++j) out.push_back(scored[j].second);
    return out;
}

inline json to_json(const AuditEntry& e) {
    json j = json::object();
    j["anchor_position"] = e.anchor_position;
    j["candidate_id"] = e.candidate_id;
    j["entropy_before"] = e.entropy_before;
    j["entropy_after"] = e.entropy_after;
    j["reduction"] = e.reduction;
    j["retained"] = e.retained;
    if (!e.reason.empty()) j["reason"] = e.reason;
    return j;
}

}  // namespace sectrain::longctx
