#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sectrain/corpus.hpp"

namespace sectrain::quality {

inline const std::string kEmailPlaceholder = "⟨EMAIL⟩";
inline const std::string kPhonePlaceholder = "⟨PHONE⟩";
inline const std::string kBase64Marker = "⟨B64_TRUNCATED⟩";
inline const std::string kHexPlaceholder = "⟨HEX_TOKEN⟩";
inline const std::string kTrackingPlaceholder = "⟨TRACKING_PARAM⟩";

struct CustomRule {
    std::string name;
    std::string pattern;
    std::string placeholder;
    std::regex compiled;
};

/**
 * @brief Which sensitive spans to replace and how.
 *
 * Loaded from a JSON pattern file, e.g.
 * @code
 * {"email": true, "phone": true,
 *  "base64": {"min_length": 128, "keep_prefix": 64},
 *  "hex_token": {"min_length": 32, "require_key_context": true},
 *  "url_tracking": {"params": ["utm_*", "fbclid"]},
 *  "custom": [{"name": "asset", "pattern": "ACME-HOST-[0-9]+", "placeholder": "<ASSET>"}]}
 * @endcode
 */
struct ScrubRules {
    bool email = true;
    bool phone = true;
    bool base64 = true;
    std::size_t base64_min = 128;
    std::size_t base64_keep = 64;
    bool hex_token = true;
    std::size_t hex_min = 32;
    bool hex_require_key = true;
    bool url_tracking = true;
    std::vector<std::string> tracking_params = {"utm_*", "fbclid", "gclid", "dclid", "msclkid", "mc_cid",
                                                "mc_eid", "_ga", "_gl", "yclid", "igshid", "ref_src"};
    std::vector<CustomRule> custom;

    void add_custom(std::string name, std::string pattern, std::string placeholder) {
        std::regex re;
        try {
            re = std::regex(pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw std::invalid_argument("bad pattern for rule '" + name + "': " + e.what());
        }
        custom.push_back({std::move(name), std::move(pattern), std::move(placeholder), std::move(re)});
    }

    static ScrubRules from_json(const json& j) {
        ScrubRules r;
        const auto section = [&](const char* key, bool& enabled) -> const json* {
            if (!j.contains(key)) return nullptr;
            const auto& v = j.at(key);
            if (v.is_boolean()) {
                enabled = v.get<bool>();
                return nullptr;
            }
            enabled = v.value("enabled", true);
            return &v;
        };
        section("email", r.email);
        section("phone", r.phone);
        if (const auto* b = section("base64", r.base64)) {
            r.base64_min = b->value("min_length", r.base64_min);
            r.base64_keep = b->value("keep_prefix", r.base64_keep);
        }
        if (const auto* h = section("hex_token", r.hex_token)) {
            r.hex_min = h->value("min_length", r.hex_min);
            r.hex_require_key = h->value("require_key_context", r.hex_require_key);
        }
        if (const auto* u = section("url_tracking", r.url_tracking)) {
            if (u->contains("params")) r.tracking_params = u->at("params").get<std::vector<std::string>>();
        }
        if (j.contains("custom")) {
            for (const auto& c : j.at("custom")) {
                r.add_custom(c.at("name").get<std::string>(), c.at("pattern").get<std::string>(),
                             c.value("placeholder", "⟨" + c.at("name").get<std::string>() + "⟩"));
            }
        }
        if (r.base64_keep >= r.base64_min) throw std::invalid_argument("base64 keep_prefix must be < min_length");
        return r;
    }

    static ScrubRules from_file(const std::filesystem::path& path) {
        try {
            return from_json(json::parse(read_file(path)));
        } catch (const json::exception& e) {
            throw std::invalid_argument("bad scrub rules file '" + path.string() + "': " + e.what());
        }
    }
};

struct RedactionSpan {
    std::size_t start = 0;  // byte offsets into the original text
    std::size_t end = 0;
    std::string rule;
    bool operator==(const RedactionSpan&) const = default;
};

struct ScrubReport {
    std::vector<RedactionSpan> spans;
    std::string policy = "placeholder";
};

namespace detail {

struct Match {
    std::size_t start;
    std::size_t end;
    std::string rule;
    std::string replacement;
    std::size_t priority;
};

inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline void find_emails(std::string_view t, std::vector<Match>& out, std::size_t prio) {
    const auto local_char = [](char c) { return is_alnum(c) || c == '.' || c == '_' || c == '%' || c == '+' || c == '-'; };
    const auto domain_char = [](char c) { return is_alnum(c) || c == '.' || c == '-'; };
    std::size_t floor = 0;  // do not reach back into an earlier match
    for (std::size_t at = t.find('@'); at != std::string_view::npos; at = t.find('@', at + 1)) {
        std::size_t s = at;
        while (s > floor && local_char(t[s - 1])) --s;
        while (s < at && t[s] == '.') ++s;
        if (s == at) continue;
        std::size_t e = at + 1;
        while (e < t.size() && domain_char(t[e])) ++e;
        while (e > at + 1 && (t[e - 1] == '.' || t[e - 1] == '-')) --e;
        const auto domain = t.substr(at + 1, e - at - 1);
        const auto dot = domain.rfind('.');
        if (dot == std::string_view::npos || dot == 0) continue;
        const auto tld = domain.substr(dot + 1);
        if (tld.size() < 2 || !std::all_of(tld.begin(), tld.end(), [](char c) {
                return std::isalpha(static_cast<unsigned char>(c)) != 0;
            })) {
            continue;
        }
        out.push_back({s, e, "email", kEmailPlaceholder, prio});
        floor = e;
    }
}

inline void find_phones(std::string_view t, std::vector<Match>& out, std::size_t prio) {
    const auto body_char = [](char c) { return is_digit(c) || c == ' ' || c == '-' || c == '(' || c == ')'; };
    std::size_t i = 0;
    while (i < t.size()) {
        const char c = t[i];
        const bool can_start = c == '+' || c == '(' || is_digit(c);
        const bool bounded = i == 0 || !(is_alnum(t[i - 1]) || t[i - 1] == '-' || t[i - 1] == '.' ||
                                         t[i - 1] == '_' || t[i - 1] == '/' || t[i - 1] == ':' || t[i - 1] == '+');
        if (!can_start || !bounded) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        std::size_t last_digit = is_digit(c) ? i : std::string_view::npos;
        while (j < t.size() && body_char(t[j])) {
            if (t[j] == ' ' && j + 1 < t.size() && t[j + 1] == ' ') break;
            if (is_digit(t[j])) last_digit = j;
            ++j;
        }
        if (last_digit == std::string_view::npos) {
            i = j;
            continue;
        }
        const std::size_t end = last_digit + 1;
        std::size_t digits = 0, groups = 0;
        bool in_group = false;
        for (std::size_t k = i; k < end; ++k) {
            if (is_digit(t[k])) {
                ++digits;
                if (!in_group) ++groups;
                in_group = true;
            } else {
                in_group = false;
            }
        }
        const bool tail_ok = end == t.size() || !(is_alnum(t[end]) || t[end] == '_' ||
                                                  (t[end] == '.' && end + 1 < t.size() && is_digit(t[end + 1])));
        if (tail_ok && digits >= 10 && digits <= 15 && (c == '+' || groups >= 3)) {
            out.push_back({i, end, "phone", kPhonePlaceholder, prio});
        }
        i = std::max(end, i + 1);
    }
}

inline void find_base64(std::string_view t, const ScrubRules& r, std::vector<Match>& out, std::size_t prio) {
    const auto b64 = [](char c) { return is_alnum(c) || c == '+' || c == '/' || c == '-' || c == '_'; };
    std::size_t i = 0;
    while (i < t.size()) {
        if (!b64(t[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        bool digit = false, upper = false, lower = false;
        std::size_t separators = 0;  // path-like runs have many of these
        while (j < t.size() && b64(t[j])) {
            separators += t[j] == '/' || t[j] == '-' || t[j] == '_';
            digit |= is_digit(t[j]);
            upper |= std::isupper(static_cast<unsigned char>(t[j])) != 0;
            lower |= std::islower(static_cast<unsigned char>(t[j])) != 0;
            ++j;
        }
        std::size_t pad = 0;
        while (j < t.size() && t[j] == '=' && pad < 2) {
            ++j;
            ++pad;
        }
        if (j - i >= r.base64_min && digit && upper && lower && separators * 16 <= j - i) {
            out.push_back({i, j, "base64", std::string(t.substr(i, r.base64_keep)) + kBase64Marker, prio});
        }
        i = j;
    }
}

inline bool has_key_context(std::string_view t, std::size_t start) {
    std::size_t k = start;
    const auto skip = [&](auto pred) {
        while (k > 0 && pred(t[k - 1])) --k;
    };
    skip([](char c) { return c == '"' || c == '\''; });
    skip([](char c) { return c == ' ' || c == '\t'; });
    bool separated = false;
    if (k > 0 && (t[k - 1] == '=' || t[k - 1] == ':')) {
        --k;
        separated = true;
        skip([](char c) { return c == ' ' || c == '\t' || c == '"' || c == '\''; });
    }
    const std::size_t word_end = k;
    skip([](char c) { return is_alnum(c) || c == '_' || c == '-' || c == '.'; });
    std::string key(t.substr(k, word_end - k));
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!separated) return key == "bearer";
    for (const char* kw : {"session", "token", "sid", "auth", "cookie", "secret", "apikey", "api_key", "api-key",
                           "bearer", "csrf", "nonce"}) {
        if (key.find(kw) != std::string::npos) return true;
    }
    return false;
}

inline void find_hex_tokens(std::string_view t, const ScrubRules& r, std::vector<Match>& out, std::size_t prio) {
    std::size_t i = 0;
    while (i < t.size()) {
        if (!is_alnum(t[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        bool all_hex = true, digit = false, letter = false;
        while (j < t.size() && (is_alnum(t[j]) || t[j] == '_')) {
            all_hex &= is_hex(t[j]);
            digit |= is_digit(t[j]);
            letter |= !is_digit(t[j]);
            ++j;
        }
        if (all_hex && digit && letter && j - i >= r.hex_min && (!r.hex_require_key || has_key_context(t, i))) {
            out.push_back({i, j, "hex_token", kHexPlaceholder, prio});
        }
        i = j;
    }
}

inline bool tracking_param(std::string_view name, const std::vector<std::string>& patterns) {
    for (const auto& p : patterns) {
        if (!p.empty() && p.back() == '*') {
            if (name.starts_with(std::string_view(p).substr(0, p.size() - 1))) return true;
        } else if (name == p) {
            return true;
        }
    }
    return false;
}

inline void find_tracking(std::string_view t, const ScrubRules& r, std::vector<Match>& out, std::size_t prio) {
    const auto url_end = [&](std::size_t s) {
        while (s < t.size() && !std::isspace(static_cast<unsigned char>(t[s])) && t[s] != '"' && t[s] != '\'' &&
               t[s] != '<' && t[s] != '>') {
            ++s;
        }
        return s;
    };
    std::size_t pos = 0;
    while (true) {
        const auto http = t.find("http", pos);
        if (http == std::string_view::npos) break;
        const auto rest = t.substr(http);
        if (!rest.starts_with("http://") && !rest.starts_with("https://")) {
            pos = http + 4;
            continue;
        }
        const std::size_t end = url_end(http);
        const auto url = t.substr(http, end - http);
        const auto q = url.find('?');
        if (q != std::string_view::npos) {
            std::size_t p = http + q + 1;
            const std::size_t frag = t.substr(p, end - p).find('#');
            const std::size_t qend = frag == std::string_view::npos ? end : p + frag;
            while (p < qend) {
                std::size_t amp = t.substr(p, qend - p).find('&');
                const std::size_t pend = amp == std::string_view::npos ? qend : p + amp;
                const auto param = t.substr(p, pend - p);
                const auto eq = param.find('=');
                if (eq != std::string_view::npos && tracking_param(param.substr(0, eq), r.tracking_params)) {
                    out.push_back({p, pend, "url_tracking", kTrackingPlaceholder, prio});
                }
                p = pend + 1;
            }
        }
        pos = std::max(end, http + 4);
    }
}

inline void find_custom(std::string_view t, const CustomRule& rule, std::vector<Match>& out, std::size_t prio) {
    const std::string s(t);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), rule.compiled); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        if (m.length(0) == 0) continue;
        const auto start = static_cast<std::size_t>(m.position(0));
        out.push_back({start, start + static_cast<std::size_t>(m.length(0)), rule.name, rule.placeholder, prio});
    }
}

}  // namespace detail

/**
 * Replaces sensitive spans with typed placeholders.
 *
 * Matches from all rules are merged left to right; on overlap the earlier
 * start wins, then the longer span, then the earlier rule. Text outside the
 * reported spans is copied unchanged.
 */
inline std::pair<std::string, ScrubReport> scrub_sensitive(std::string_view text, const ScrubRules& rules) {
    std::vector<detail::Match> matches;
    std::size_t prio = 0;
    if (rules.url_tracking) detail::find_tracking(text, rules, matches, prio);
    ++prio;
    if (rules.email) detail::find_emails(text, matches, prio);
    ++prio;
    if (rules.base64) detail::find_base64(text, rules, matches, prio);
    ++prio;
    if (rules.hex_token) detail::find_hex_tokens(text, rules, matches, prio);
    ++prio;
    if (rules.phone) detail::find_phones(text, matches, prio);
    for (const auto& rule : rules.custom) detail::find_custom(text, rule, matches, ++prio);

    std::sort(matches.begin(), matches.end(), [](const auto& a, const auto& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.end != b.end) return a.end > b.end;
        return a.priority < b.priority;
    });

    std::pair<std::string, ScrubReport> result;
    auto& [out, report] = result;
    std::size_t cursor = 0;
    for (const auto& m : matches) {
        if (m.start < cursor) continue;
        out.append(text.substr(cursor, m.start - cursor));
        out.append(m.replacement);
        report.spans.push_back({m.start, m.end, m.rule});
        cursor = m.end;
    }
    out.append(text.substr(cursor));
    return result;
}

}  // namespace sectrain::quality
