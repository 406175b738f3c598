#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "sectrain/util/utf8.hpp"

namespace sectrain {

using json = nlohmann::ordered_json;

/// The five corpus source categories.
enum class SourceCategory { open_external, product, knowledge_doc, log, code };

inline constexpr std::string_view to_string(SourceCategory c) noexcept {
    switch (c) {
        case SourceCategory::open_external: return "open_external";
        case SourceCategory::product: return "product";
        case SourceCategory::knowledge_doc: return "knowledge_doc";
        case SourceCategory::log: return "log";
        case SourceCategory::code: return "code";
    }
    return "open_external";
}

inline std::optional<SourceCategory> parse_category(std::string_view s) noexcept {
    for (auto c : {SourceCategory::open_external, SourceCategory::product, SourceCategory::knowledge_doc,
                   SourceCategory::log, SourceCategory::code}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

/// One normalized training document.
struct CorpusRecord {
    std::string id;
    std::string text;
    SourceCategory category = SourceCategory::open_external;
    std::vector<std::string> anchors;
    std::map<std::string, std::string> metadata;
    std::optional<std::vector<double>> embedding;
    /// Top-level fields outside the schema, carried through untouched.
    json extra = json::object();

    bool operator==(const CorpusRecord&) const = default;
};

class RecordError : public std::runtime_error {
public:
    RecordError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline bool is_fence(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    line.remove_prefix(i);
    return line.starts_with("```") || line.starts_with("~~~");
}

inline std::string_view rstrip(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/**
 * Normalizes raw text into the canonical plain-text form.
 *
 * - invalid UTF-8 sequences become U+FFFD
 * - CRLF and lone CR become LF
 * - control characters other than LF and TAB are removed
 * - outside fenced code blocks: trailing spaces are trimmed and runs of more
 *   than two blank lines collapse to two
 * - leading and trailing blank lines are removed
 *
 * Lines inside ``` or ~~~ fences are kept byte-for-byte (after the encoding
 * fixes above).
 */
inline std::string normalize_text(std::string_view raw) {
    std::string clean;
    clean.reserve(raw.size());
    const std::string valid = utf8::sanitize(raw);
    for (std::size_t i = 0; i < valid.size(); ++i) {
        const char c = valid[i];
        if (c == '\r') {
            clean.push_back('\n');
            if (i + 1 < valid.size() && valid[i + 1] == '\n') ++i;
        } else if ((static_cast<unsigned char>(c) < 0x20 && c != '\n' && c != '\t') || c == 0x7F) {
            continue;
        } else {
            clean.push_back(c);
        }
    }

    std::vector<std::string_view> lines;
    for (std::size_t start = 0;;) {
        const auto nl = clean.find('\n', start);
        if (nl == std::string::npos) {
            lines.emplace_back(std::string_view(clean).substr(start));
            break;
        }
        lines.emplace_back(std::string_view(clean).substr(start, nl - start));
        start = nl + 1;
    }

    std::vector<std::string_view> out;
    out.reserve(lines.size());
    bool in_fence = false;
    int blank_run = 0;
    for (auto line : lines) {
        if (detail::is_fence(line)) {
            in_fence = !in_fence;
            blank_run = 0;
            out.push_back(line);
            continue;
        }
        if (in_fence) {
            out.push_back(line);
            continue;
        }
        line = detail::rstrip(line);
        if (line.empty()) {
            if (++blank_run > 2) continue;
        } else {
            blank_run = 0;
        }
        out.push_back(line);
    }

    std::size_t first = 0;
    std::size_t last = out.size();
    while (first < last && out[first].empty()) ++first;
    while (last > first && out[last - 1].empty()) --last;

    std::string result;
    for (std::size_t i = first; i < last; ++i) {
        if (i > first) result.push_back('\n');
        result.append(out[i]);
    }
    return result;
}

// ---------------------------------------------------------------------------
// JSON mapping

inline json to_json(const CorpusRecord& r) {
    json j = json::object();
    j["id"] = r.id;
    j["text"] = r.text;
    j["source_category"] = std::string(to_string(r.category));
    j["anchors"] = r.anchors;
    json meta = json::object();
    for (const auto& [k, v] : r.metadata) meta[k] = v;
    j["metadata"] = std::move(meta);
    if (r.embedding) j["embedding"] = *r.embedding;
    for (const auto& [k, v] : r.extra.items()) j[k] = v;
    return j;
}

inline CorpusRecord record_from_json(const json& j) {
    if (!j.is_object()) throw RecordError("record is not a JSON object");
    CorpusRecord r;
    for (const auto& [key, value] : j.items()) {
        if (key == "id") {
            if (!value.is_string()) throw RecordError("field 'id' must be a string");
            r.id = value.get<std::string>();
        } else if (key == "text") {
            if (!value.is_string()) throw RecordError("field 'text' must be a string");
            r.text = value.get<std::string>();
        } else if (key == "source_category") {
            if (!value.is_string()) throw RecordError("field 'source_category' must be a string");
            const auto c = parse_category(value.get<std::string>());
            if (!c) throw RecordError("unknown source_category '" + value.get<std::string>() + "'");
            r.category = *c;
        } else if (key == "anchors") {
            if (!value.is_array()) throw RecordError("field 'anchors' must be an array");
            for (const auto& a : value) {
                if (!a.is_string()) throw RecordError("anchors must be strings");
                r.anchors.push_back(a.get<std::string>());
            }
        } else if (key == "metadata") {
            if (!value.is_object()) throw RecordError("field 'metadata' must be an object");
            for (const auto& [mk, mv] : value.items()) {
                if (!mv.is_string()) throw RecordError("metadata value for '" + mk + "' must be a string");
                r.metadata[mk] = mv.get<std::string>();
            }
        } else if (key == "embedding") {
            if (value.is_null()) continue;
            if (!value.is_array()) throw RecordError("field 'embedding' must be an array");
            std::vector<double> e;
            e.reserve(value.size());
            for (const auto& x : value) {
                if (!x.is_number()) throw RecordError("embedding entries must be numbers");
                e.push_back(x.get<double>());
            }
            r.embedding = std::move(e);
        } else {
            r.extra[key] = value;
        }
    }
    if (r.id.empty()) throw RecordError("missing or empty 'id'");
    if (r.text.empty()) throw RecordError("missing or empty 'text'");
    return r;
}

// ---------------------------------------------------------------------------
// Line-oriented I/O

/**
 * @brief Streams records from a JSON-lines file.
 *
 * Validates id uniqueness and a corpus-wide embedding dimension as it goes.
 * Any malformed line raises RecordError carrying the 1-based line number.
 */
class RecordReader {
public:
    explicit RecordReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw RecordError("cannot open record file '" + path.string() + "'");
    }

    std::optional<CorpusRecord> next() {
        std::string line;
        do {
            if (!std::getline(in_, line)) return std::nullopt;
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
        } while (line.empty());
        CorpusRecord r;
        try {
            r = record_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw RecordError(std::string("malformed JSON: ") + e.what(), line_no_);
        } catch (const RecordError& e) {
            throw RecordError(e.what(), line_no_);
        }
        if (!seen_.insert(r.id).second) throw RecordError("duplicate id '" + r.id + "'", line_no_);
        if (r.embedding) {
            if (!dim_) {
                dim_ = r.embedding->size();
            } else if (*dim_ != r.embedding->size()) {
                throw RecordError("embedding dimension " + std::to_string(r.embedding->size()) +
                                      " differs from corpus dimension " + std::to_string(*dim_),
                                  line_no_);
            }
        }
        return r;
    }

    std::optional<std::size_t> embedding_dim() const noexcept { return dim_; }

private:
    std::ifstream in_;
    std::size_t line_no_ = 0;
    std::unordered_set<std::string> seen_;
    std::optional<std::size_t> dim_;
};

inline std::vector<CorpusRecord> read_records(const std::filesystem::path& path) {
    RecordReader reader(path);
    std::vector<CorpusRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

/// Writes `content` to a sibling temp file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("cannot write '" + path.string() + "': " + ec.message());
}

inline std::string to_jsonl(const std::vector<CorpusRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

inline void write_records(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
    write_file_atomic(path, to_jsonl(records));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parses a JSON-lines file of arbitrary objects.
inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw RecordError(std::string("malformed JSON: ") + e.what(), n);
        }
    }
    return out;
}

}  // namespace sectrain
