#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sectrain::rewards {

class FormatError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string strip_spaces(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

inline std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

inline bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::string strip_zeros(std::string_view digits) {
    const auto nz = digits.find_first_not_of('0');
    return nz == std::string_view::npos ? "0" : std::string(digits.substr(nz));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CWE

struct CweId {
    std::string value;  // "CWE-<digits>"
    bool operator==(const CweId&) const = default;
};

/// Accepts "CWE-79", "cwe- 79", "CWE79"; strips leading zeros.
inline CweId parse_cwe(std::string_view text) {
    const auto s = detail::upper(detail::strip_spaces(text));
    if (s.rfind("CWE", 0) != 0) throw FormatError("not a CWE id: '" + std::string(text) + "'");
    std::string_view rest = std::string_view(s).substr(3);
    if (!rest.empty() && rest.front() == '-') rest.remove_prefix(1);
    if (!detail::all_digits(rest)) throw FormatError("not a CWE id: '" + std::string(text) + "'");
    return {"CWE-" + detail::strip_zeros(rest)};
}

/// Last well-formed CWE id in free text.
inline std::optional<CweId> extract_cwe(std::string_view text) {
    std::optional<CweId> last;
    const auto s = detail::upper(std::string(text));
    for (std::size_t at = s.find("CWE"); at != std::string::npos; at = s.find("CWE", at + 1)) {
        if (at > 0 && std::isalnum(static_cast<unsigned char>(s[at - 1]))) continue;
        std::size_t p = at + 3;
        while (p < s.size() && s[p] == ' ') ++p;
        if (p < s.size() && s[p] == '-') ++p;
        while (p < s.size() && s[p] == ' ') ++p;
        const std::size_t d = p;
        while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p]))) ++p;
        if (p == d) continue;
        if (p < s.size() && std::isalpha(static_cast<unsigned char>(s[p]))) continue;
        last = CweId{"CWE-" + detail::strip_zeros(std::string_view(s).substr(d, p - d))};
    }
    return last;
}

struct RewardResult {
    double reward = 0.0;
    bool format_error = false;
    std::size_t format_count = 0;  // malformed tokens dropped (ATE)
};

inline double reward_rcm(const CweId& pred, const CweId& gold) { return pred == gold ? 1.0 : 0.0; }

/// Raw prediction text: malformed output earns zero with the format flag.
inline RewardResult reward_rcm(std::string_view pred_text, const CweId& gold) {
    const auto pred = extract_cwe(pred_text);
    if (!pred) return {0.0, true, 0};
    return {reward_rcm(*pred, gold), false, 0};
}

// ---------------------------------------------------------------------------
// CVSS

inline constexpr std::array<const char*, 8> kCvssMetrics = {"AV", "AC", "PR", "UI", "S", "C", "I", "A"};

inline const std::map<std::string, std::string>& cvss_legal_values() {
    static const std::map<std::string, std::string> legal = {
        {"AV", "NALP"}, {"AC", "LH"}, {"PR", "NLH"}, {"UI", "NR"},
        {"S", "UC"},    {"C", "HLN"}, {"I", "HLN"},  {"A", "HLN"},
    };
    return legal;
}

struct CvssVector {
    std::string version;               // "3.0" or "3.1"
    std::array<char, 8> metrics{};     // in kCvssMetrics order
    std::optional<double> score;       // base score in [0, 10]

    char metric(std::string_view name) const {
        for (std::size_t i = 0; i < kCvssMetrics.size(); ++i) {
            if (name == kCvssMetrics[i]) return metrics[i];
        }
        throw std::invalid_argument("unknown metric " + std::string(name));
    }

    std::string to_string() const {
        std::string s = "CVSS:" + version;
        for (std::size_t i = 0; i < kCvssMetrics.size(); ++i) {
            s += '/';
            s += kCvssMetrics[i];
            s += ':';
            s += metrics[i];
        }
        return s;
    }

    bool operator==(const CvssVector&) const = default;
};

/// Parses "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H" (metrics in any order).
inline CvssVector parse_cvss_vector(std::string_view text, std::optional<double> score = std::nullopt) {
    std::string s(text);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    const auto first = s.find_first_not_of(" \t\n");
    s = first == std::string::npos ? "" : s.substr(first);
    CvssVector v;
    std::size_t slash = s.find('/');
    const std::string head = s.substr(0, slash);
    if (head == "CVSS:3.1" || head == "CVSS:3.0") {
        v.version = head.substr(5);
    } else {
        throw FormatError("bad version prefix '" + head + "'");
    }
    std::array<bool, 8> seen{};
    while (slash != std::string::npos) {
        const std::size_t next = s.find('/', slash + 1);
        const std::string token = s.substr(slash + 1, next == std::string::npos ? std::string::npos : next - slash - 1);
        slash = next;
        const auto colon = token.find(':');
        if (colon == std::string::npos) throw FormatError("malformed metric '" + token + "'");
        const std::string key = token.substr(0, colon);
        const std::string value = token.substr(colon + 1);
        const auto legal = cvss_legal_values().find(key);
        if (legal == cvss_legal_values().end()) throw FormatError("unknown metric " + key);
        const auto idx = static_cast<std::size_t>(
            std::find_if(kCvssMetrics.begin(), kCvssMetrics.end(), [&](const char* m) { return key == m; }) -
            kCvssMetrics.begin());
        if (seen[idx]) throw FormatError("duplicate metric " + key);
        if (value.size() != 1 || legal->second.find(value[0]) == std::string::npos) {
            throw FormatError("illegal value " + value + " for " + key);
        }
        seen[idx] = true;
        v.metrics[idx] = value[0];
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) throw FormatError(std::string("missing base metric ") + kCvssMetrics[i]);
    }
    if (score) {
        if (!(*score >= 0.0 && *score <= 10.0)) throw FormatError("score out of range");
        v.score = score;
    }
    return v;
}

inline constexpr double kScoreTolerance = 0.05;

/// gamma * [scores agree] + (1 - gamma) * fraction of matching base metrics.
inline double reward_vsp(const CvssVector& pred, const CvssVector& gold, double gamma = 0.5) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!gold.score) throw std::invalid_argument("gold vector has no score");
    const bool score_match = pred.score && std::abs(*pred.score - *gold.score) < kScoreTolerance;
    std::size_t matches = 0;
    for (std::size_t i = 0; i < kCvssMetrics.size(); ++i) matches += pred.metrics[i] == gold.metrics[i];
    return gamma * (score_match ? 1.0 : 0.0) +
           (1.0 - gamma) * static_cast<double>(matches) / static_cast<double>(kCvssMetrics.size());
}

/// Raw prediction: the last "CVSS:" vector in the text, with an optional score.
inline RewardResult reward_vsp(std::string_view pred_vector, std::optional<double> pred_score, const CvssVector& gold,
                               double gamma = 0.5) {
    std::optional<CvssVector> pred;
    for (auto at = pred_vector.rfind("CVSS:"); at != std::string_view::npos;
         at = at == 0 ? std::string_view::npos : pred_vector.rfind("CVSS:", at - 1)) {
        auto end = pred_vector.find_first_of(" \t\n\"',;)", at);
        auto candidate = pred_vector.substr(at, end == std::string_view::npos ? end : end - at);
        while (!candidate.empty() && candidate.back() == '.') candidate.remove_suffix(1);
        try {
            pred = parse_cvss_vector(candidate);
            break;
        } catch (const FormatError&) {
        }
    }
    if (!pred) return {0.0, true, 0};
    if (pred_score && *pred_score >= 0.0 && *pred_score <= 10.0) pred->score = pred_score;
    return {reward_vsp(*pred, gold, gamma), false, 0};
}

// ---------------------------------------------------------------------------
// ATT&CK techniques

using TechniqueSet = std::set<std::string>;

/// Canonical "T<digits>(.<digits>)?", uppercase T; nullopt when malformed.
inline std::optional<std::string> canonical_technique(std::string_view token) {
    auto s = detail::upper(detail::strip_spaces(token));
    if (s.size() < 2 || s[0] != 'T') return std::nullopt;
    const auto dot = s.find('.');
    const std::string_view main = std::string_view(s).substr(1, dot == std::string::npos ? std::string::npos : dot - 1);
    if (!detail::all_digits(main)) return std::nullopt;
    if (dot != std::string::npos && !detail::all_digits(std::string_view(s).substr(dot + 1))) return std::nullopt;
    return s;
}

struct ParsedTechniques {
    TechniqueSet set;
    std::size_t malformed = 0;
};

inline ParsedTechniques parse_techniques(const std::vector<std::string>& tokens) {
    ParsedTechniques out;
    for (const auto& t : tokens) {
        if (auto c = canonical_technique(t)) {
            out.set.insert(*c);
        } else {
            ++out.malformed;
        }
    }
    return out;
}

/// Technique ids found anywhere in free text.
inline TechniqueSet extract_techniques(std::string_view text) {
    TechniqueSet out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != 'T' || (i > 0 && std::isalnum(static_cast<unsigned char>(text[i - 1])))) continue;
        std::size_t p = i + 1;
        while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
        if (p == i + 1) continue;
        if (p + 1 < text.size() && text[p] == '.' && std::isdigit(static_cast<unsigned char>(text[p + 1]))) {
            ++p;
            while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
        }
        if (p < text.size() && std::isalpha(static_cast<unsigned char>(text[p]))) continue;
        out.insert(std::string(text.substr(i, p - i)));
        i = p - 1;
    }
    return out;
}

/// Set-level F1; 1 when both sets are empty.
inline double reward_ate(const TechniqueSet& pred, const TechniqueSet& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : pred) common += gold.count(t);
    return 2.0 * static_cast<double>(common) / static_cast<double>(pred.size() + gold.size());
}

inline RewardResult reward_ate(const std::vector<std::string>& pred_tokens, const TechniqueSet& gold) {
    const auto parsed = parse_techniques(pred_tokens);
    return {reward_ate(parsed.set, gold), parsed.malformed > 0, parsed.malformed};
}

}  // namespace sectrain::rewards
