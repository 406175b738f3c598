#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sectrain::utf8 {

constexpr char32_t kReplacement = 0xFFFD;

struct Decoded {
    char32_t cp = kReplacement;
    std::size_t length = 1;  // bytes consumed
    bool valid = false;
};

/// Decodes one code point at `pos`. Invalid or truncated sequences consume one byte.
inline Decoded decode(std::string_view s, std::size_t pos) noexcept {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char b0 = byte(pos);
    if (b0 < 0x80) return {b0, 1, true};

    std::size_t len;
    char32_t cp;
    char32_t min;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2; cp = b0 & 0x1F; min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3; cp = b0 & 0x0F; min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4; cp = b0 & 0x07; min = 0x10000;
    } else {
        return {};
    }
    if (pos + len > s.size()) return {};
    for (std::size_t i = 1; i < len; ++i) {
        const unsigned char b = byte(pos + i);
        if ((b & 0xC0) != 0x80) return {};
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {};
    return {cp, len, true};
}

inline void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_valid(std::string_view s) noexcept {
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode(s, i);
        if (!d.valid) return false;
        i += d.length;
    }
    return true;
}

/// Replaces every invalid byte sequence with U+FFFD.
inline std::string sanitize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode(s, i);
        if (d.valid) {
            out.append(s.substr(i, d.length));
        } else {
            append(out, kReplacement);
        }
        i += d.length;
    }
    return out;
}

inline std::size_t codepoint_count(std::string_view s) noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++n) i += decode(s, i).length;
    return n;
}

/// Largest index <= pos that starts a code point.
inline std::size_t floor_boundary(std::string_view s, std::size_t pos) noexcept {
    if (pos >= s.size()) return s.size();
    while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
    return pos;
}

/// White_Space property code points.
constexpr bool is_space(char32_t cp) noexcept {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

/// Lowercases ASCII letters and splits on Unicode whitespace.
inline std::vector<std::string> lower_tokens(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode(s, i);
        if (d.valid && is_space(d.cp)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else if (d.length == 1) {
            char c = s[i];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            current.push_back(c);
        } else {
            current.append(s.substr(i, d.length));
        }
        i += d.length;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

/// Number of whitespace-separated tokens.
inline std::size_t word_count(std::string_view s) noexcept {
    std::size_t n = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode(s, i);
        const bool space = d.valid && is_space(d.cp);
        if (!space && !in_word) ++n;
        in_word = !space;
        i += d.length;
    }
    return n;
}

}  // namespace sectrain::utf8
