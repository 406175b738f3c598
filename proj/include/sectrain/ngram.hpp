#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sectrain/oracles.hpp"
#include "sectrain/reference_text.hpp"

namespace sectrain {

/**
 * @brief Order-3 character model with add-one smoothing.
 *
 * Bytes map onto a fixed 98-symbol alphabet: printable ASCII, LF, TAB and one
 * bucket for everything else. Each prediction conditions on the two previous
 * symbols (start-of-text padded).
 *
 * Counts come from two places: the background training text, and (for
 * entropy queries) the sequence being scored up to the predicted position,
 * weighted by `cache_weight`. The in-sequence counts are what let a passage
 * placed in front of a document change the entropy at a later position.
 * Perplexity uses the background counts only.
 */
class CharNgramModel final : public PerplexityOracle, public EntropyOracle {
public:
    static constexpr std::size_t kAlphabet = 98;
    static constexpr std::size_t kPad = kAlphabet;  // context-only symbol
    static constexpr std::size_t kContexts = (kAlphabet + 1) * (kAlphabet + 1);
    static constexpr double kDefaultCacheWeight = 100.0;

    explicit CharNgramModel(double cache_weight = kDefaultCacheWeight)
        : cache_weight_(cache_weight), counts_(kContexts * kAlphabet, 0.0), totals_(kContexts, 0.0) {
        if (!(cache_weight >= 0.0)) throw std::invalid_argument("cache_weight must be nonnegative");
    }

    /// Model trained on the built-in English reference text.
    static CharNgramModel english(double cache_weight = kDefaultCacheWeight) {
        CharNgramModel m(cache_weight);
        m.train(reference::kEnglish);
        return m;
    }

    static constexpr std::size_t symbol(unsigned char b) noexcept {
        if (b >= 0x20 && b <= 0x7E) return b - 0x20;
        if (b == '\n') return 95;
        if (b == '\t') return 96;
        return 97;
    }

    void train(std::string_view text) {
        std::size_t a = kPad, b = kPad;
        for (unsigned char c : text) {
            const std::size_t s = symbol(c);
            const std::size_t ctx = a * (kAlphabet + 1) + b;
            counts_[ctx * kAlphabet + s] += 1.0;
            totals_[ctx] += 1.0;
            a = b;
            b = s;
        }
    }

    double cache_weight() const noexcept { return cache_weight_; }

    double log_prob(std::size_t ctx, std::size_t s) const noexcept {
        return std::log((counts_[ctx * kAlphabet + s] + 1.0) / (totals_[ctx] + static_cast<double>(kAlphabet)));
    }

    double perplexity(std::string_view text) const override {
        if (text.empty()) return 1.0;
        double sum = 0.0;
        std::size_t a = kPad, b = kPad;
        for (unsigned char c : text) {
            const std::size_t s = symbol(c);
            sum += log_prob(a * (kAlphabet + 1) + b, s);
            a = b;
            b = s;
        }
        return std::exp(-sum / static_cast<double>(text.size()));
    }

    std::vector<double> entropy_profile(std::string_view doc) const override {
        std::vector<std::size_t> all(doc.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return entropies_at("", doc, all);
    }

    double entropy_at(std::string_view context, std::string_view doc, std::size_t position) const override {
        if (position >= doc.size()) throw std::out_of_range("entropy position outside document");
        const std::size_t pos[1] = {position};
        return entropies_at(context, doc, pos).front();
    }

    /// Entropies at sorted `positions` of `doc` with `context` in front.
    std::vector<double> entropies_at(std::string_view context, std::string_view doc,
                                     std::span<const std::size_t> positions) const override {
        if (!std::is_sorted(positions.begin(), positions.end())) {
            throw std::invalid_argument("positions must be sorted");
        }
        std::vector<double> out;
        out.reserve(positions.size());
        std::unordered_map<std::size_t, std::array<double, kAlphabet>> cache;
        std::size_t a = kPad, b = kPad;
        std::size_t next = 0;
        const std::size_t total = context.size() + doc.size();
        for (std::size_t i = 0; i < total && next < positions.size(); ++i) {
            const unsigned char c =
                i < context.size() ? static_cast<unsigned char>(context[i])
                                   : static_cast<unsigned char>(doc[i - context.size()]);
            const std::size_t ctx = a * (kAlphabet + 1) + b;
            const bool in_doc = i >= context.size();
            while (in_doc && next < positions.size() && positions[next] == i - context.size()) {
                out.push_back(entropy_for(ctx, cache));
                ++next;
            }
            const std::size_t s = symbol(c);
            cache[ctx][s] += 1.0;
            a = b;
            b = s;
        }
        if (out.size() != positions.size()) throw std::out_of_range("entropy position outside document");
        return out;
    }

private:
    double entropy_for(std::size_t ctx,
                       const std::unordered_map<std::size_t, std::array<double, kAlphabet>>& cache) const {
        const double* bg = &counts_[ctx * kAlphabet];
        const auto it = cache.find(ctx);
        std::array<double, kAlphabet> n{};
        double total = 0.0;
        for (std::size_t s = 0; s < kAlphabet; ++s) {
            n[s] = bg[s] + (it != cache.end() ? cache_weight_ * it->second[s] : 0.0);
            total += n[s];
        }
        const double denom = total + static_cast<double>(kAlphabet);
        double h = 0.0;
        for (std::size_t s = 0; s < kAlphabet; ++s) {
            const double p = (n[s] + 1.0) / denom;
            h -= p * std::log(p);
        }
        return h;
    }

    double cache_weight_;
    std::vector<double> counts_;
    std::vector<double> totals_;
};

/**
 * @brief Character-trigram language identifier.
 *
 * Compares the trigram frequency vector of the input against per-language
 * profiles by cosine similarity. Returns "und" below `min_similarity`.
 */
class TrigramLanguageClassifier final : public LanguageOracle {
public:
    explicit TrigramLanguageClassifier(double min_similarity = 0.25) : min_similarity_(min_similarity) {}

    static TrigramLanguageClassifier builtin(double min_similarity = 0.25) {
        TrigramLanguageClassifier c(min_similarity);
        c.train("en", reference::kEnglish);
        c.train("de", reference::kGerman);
        c.train("fr", reference::kFrench);
        c.train("es", reference::kSpanish);
        return c;
    }

    void train(const std::string& lang, std::string_view text) {
        auto& profile = profiles_[lang];
        for (const auto& [g, n] : trigrams(text)) profile[g] += n;
    }

    std::string identify(std::string_view text) const override {
        const auto counts = trigrams(text);
        double norm = 0.0;
        for (const auto& [_, n] : counts) norm += n * n;
        if (norm == 0.0) return "und";
        std::string best = "und";
        double best_sim = min_similarity_;
        for (const auto& [lang, profile] : profiles_) {
            double dot = 0.0, pnorm = 0.0;
            for (const auto& [_, n] : profile) pnorm += n * n;
            for (const auto& [g, n] : counts) {
                const auto it = profile.find(g);
                if (it != profile.end()) dot += n * it->second;
            }
            const double sim = dot / (std::sqrt(norm) * std::sqrt(pnorm));
            if (sim >= best_sim) {
                best_sim = sim;
                best = lang;
            }
        }
        return best;
    }

private:
    static std::map<std::string, double> trigrams(std::string_view text) {
        std::string folded = " ";
        for (unsigned char c : text) {
            if (c >= 'A' && c <= 'Z') {
                folded.push_back(static_cast<char>(c - 'A' + 'a'));
            } else if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
                if (folded.back() != ' ') folded.push_back(' ');
            } else {
                folded.push_back(static_cast<char>(c));
            }
        }
        if (folded.back() != ' ') folded.push_back(' ');
        std::map<std::string, double> out;
        for (std::size_t i = 0; i + 3 <= folded.size(); ++i) out[folded.substr(i, 3)] += 1.0;
        return out;
    }

    double min_similarity_;
    std::map<std::string, std::map<std::string, double>> profiles_;
};

}  // namespace sectrain
