#pragma once

// Synthetic security corpus with planted redundancy and noise.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sectrain/corpus.hpp"
#include "sectrain/util/rng.hpp"
#include "sectrain/util/utf8.hpp"

namespace fixture {

using sectrain::json;

struct Spec {
    std::size_t topics = 5;
    std::size_t per_topic = 14;   // ordinary documents per topic
    std::size_t exact_dups = 6;
    std::size_t near_clusters = 4;  // each: base plus two one-token variants
    std::size_t paraphrases = 5;    // new text, embedding within cos ~0.999 of a base doc
    std::size_t too_short = 5;
    std::size_t low_quality = 6;
    std::size_t with_contacts = 7;  // base docs carrying an email and a phone number
    std::size_t dim = 32;
    double noise = 0.08;
    std::uint64_t seed = 2024;

    std::size_t total() const {
        return topics * per_topic + exact_dups + 2 * near_clusters + paraphrases + too_short + low_quality;
    }
};

struct Corpus {
    std::vector<json> records;  // raw ingest lines
    std::vector<json> scores;   // judge table rows
    Spec spec;
};

inline const std::vector<std::string>& general_words() {
    static const std::vector<std::string> w = {
        "analysts", "observed", "the",       "team",     "confirmed", "activity", "system",   "logs",
        "showed",   "network",  "traffic",   "after",    "before",    "alert",    "incident", "response",
        "host",     "user",     "account",   "access",   "policy",    "update",   "report",   "evidence",
        "timeline", "detection", "rule",     "triggered", "later",    "during",   "review",   "operator",
        "service",  "endpoint", "session",   "baseline", "anomaly",   "ticket",   "owner",    "window"};
    return w;
}

struct Topic {
    std::vector<std::string> words;
    std::vector<std::string> idents;
};

inline const std::vector<Topic>& topics() {
    static const std::vector<Topic> t = {
        {{"phishing", "lure", "attachment", "mailbox", "sender", "spoofed", "macro", "credential", "harvest",
          "domain", "link", "inbox", "invoice", "payload", "recipient"},
         {"qrx-lure-77", "mailhook_v3", "invoice-8812.docm", "zq-phishkit"}},
        {{"ransomware", "encryption", "backup", "shadow", "copies", "ransom", "note", "extension", "locker",
          "affiliate", "negotiation", "decryptor", "volume", "share", "wiper"},
         {"kz-locker-5", "vssadmin_purge", "readme_kz.txt", "xw9-affiliate"}},
        {{"injection", "query", "parameter", "database", "sanitization", "endpoint", "payload", "union",
          "select", "error", "input", "validation", "schema", "table", "escape"},
         {"login.php?uid", "sqlmap-7x", "tbl_users_bk", "CVE-2031-44871"}},
        {{"bucket", "storage", "permission", "public", "misconfiguration", "role", "tenant", "region",
          "snapshot", "exposure", "identity", "federation", "object", "audit", "trail"},
         {"acme-prod-logs-eu2", "role/ci-deployer", "snap-0f3a9", "tf-state-leak"}},
        {{"dependency", "package", "registry", "maintainer", "typosquat", "build", "pipeline", "artifact",
          "signature", "checksum", "release", "tarball", "postinstall", "script", "mirror"},
         {"left-padx", "npm-relay-31", "build-agent-k8", "sha256-mismatch"}},
    };
    return t;
}

namespace detail {

inline const std::string& pick(sectrain::Rng& rng, const std::vector<std::string>& v) { return v[rng.below(v.size())]; }

inline std::string sentence(sectrain::Rng& rng, const Topic& t) {
    const auto w = [&]() -> const std::string& { return rng.uniform() < 0.7 ? pick(rng, t.words) : pick(rng, general_words()); };
    switch (rng.below(6)) {
        case 0: return "The " + w() + " " + w() + " linked to " + pick(rng, t.idents) + " was " + w() + " by the " + w() + ".";
        case 1: return "During the " + w() + " review, " + pick(rng, t.idents) + " appeared next to " + w() + " " + w() + " records.";
        case 2: return "Analysts traced " + w() + " " + w() + " back to " + pick(rng, t.idents) + " and " + pick(rng, t.idents) + ".";
        case 3: return "A " + w() + " " + w() + " followed the " + w() + " " + w() + " on the " + w() + " host.";
        case 4: return "Responders isolated " + pick(rng, t.idents) + " once the " + w() + " " + w() + " stopped.";
        default: return "Every " + w() + " in the " + w() + " " + w() + " was checked against " + pick(rng, t.idents) + ".";
    }
}

/// About `words` whitespace tokens in three paragraphs.
inline std::string document(sectrain::Rng& rng, const Topic& t, std::size_t words, const std::string& para_sep) {
    std::string out;
    std::size_t n = 0;
    std::size_t para = 0;
    while (n < words) {
        const auto s = sentence(rng, t);
        if (!out.empty()) {
            const std::size_t next_para = (para + 1) * words / 3;
            if (n >= next_para && para < 2) {
                out += para_sep;
                ++para;
            } else {
                out += ' ';
            }
        }
        out += s;
        n += sectrain::utf8::word_count(s);
    }
    return out;
}

inline std::vector<double> unit(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    for (double& x : v) x /= s;
    return v;
}

inline json record(const std::string& id, const std::string& text, const std::string& category,
                   const std::vector<double>& emb) {
    json j = json::object();
    j["id"] = id;
    j["text"] = text;
    j["source_category"] = category;
    j["embedding"] = emb;
    return j;
}

inline json score_row(const std::string& id, sectrain::Rng& rng, double lo, double hi) {
    json j = json::object();
    j["id"] = id;
    for (const char* k : {"alignment", "response_quality", "complexity", "safety"}) j[k] = rng.uniform(lo, hi);
    return j;
}

}  // namespace detail

inline Corpus generate(const Spec& spec = {}) {
    sectrain::Rng rng(spec.seed);
    Corpus c;
    c.spec = spec;
    static const std::array<const char*, 5> categories = {"open_external", "product", "knowledge_doc", "log", "code"};

    // orthonormal topic centres
    std::vector<std::vector<double>> centres;
    for (std::size_t t = 0; t < spec.topics; ++t) {
        std::vector<double> v(spec.dim);
        for (auto& x : v) x = rng.normal();
        for (const auto& u : centres) {
            double d = 0.0;
            for (std::size_t k = 0; k < spec.dim; ++k) d += v[k] * u[k];
            for (std::size_t k = 0; k < spec.dim; ++k) v[k] -= d * u[k];
        }
        centres.push_back(detail::unit(v));
    }
    const auto embed = [&](std::size_t t, double noise) {
        std::vector<double> v = centres[t];
        for (auto& x : v) x += noise * rng.normal();
        return detail::unit(v);
    };
    const auto topic_of = [&](std::size_t i) { return i % spec.topics; };

    struct Base {
        std::string id, text, category;
        std::vector<double> emb;
        std::size_t topic;
    };
    std::vector<Base> bases;
    const std::size_t n_base = spec.topics * spec.per_topic;
    for (std::size_t i = 0; i < n_base; ++i) {
        const auto t = topic_of(i);
        Base b{"doc-" + std::to_string(i), detail::document(rng, topics()[t % topics().size()], 200, "\n\n"),
               categories[rng.below(categories.size())], embed(t, spec.noise), t};
        if (i < spec.with_contacts) {
            b.text += " Escalations go to oncall" + std::to_string(i) + "@example.org or +1 415 555 01" +
                      std::to_string(10 + i) + ".";
        }
        bases.push_back(b);
        c.records.push_back(detail::record(b.id, b.text, b.category, b.emb));
        c.scores.push_back(detail::score_row(b.id, rng, 0.6, 0.95));
    }

    // exact duplicates of later bases, with CRLF paragraph breaks that normalize away
    for (std::size_t k = 0; k < spec.exact_dups; ++k) {
        const auto& b = bases[n_base - 1 - k];
        std::string text = b.text;
        for (std::size_t p = text.find("\n\n"); p != std::string::npos; p = text.find("\n\n", p + 4)) {
            text.replace(p, 2, "\r\n\r\n");
        }
        const auto id = "dup-" + std::to_string(k);
        c.records.push_back(detail::record(id, text, b.category, b.emb));
        c.scores.push_back(detail::score_row(id, rng, 0.6, 0.95));
    }

    // near-duplicate clusters: two variants of one base, same token position replaced
    for (std::size_t k = 0; k < spec.near_clusters; ++k) {
        const auto& b = bases[spec.with_contacts + k];
        const std::size_t pos = b.text.find(' ', b.text.size() / 2);
        const std::size_t end = b.text.find(' ', pos + 1);
        for (std::size_t v = 0; v < 2; ++v) {
            std::string text = b.text;
            text.replace(pos + 1, end - pos - 1, v == 0 ? "alpha" : "omega");
            const auto id = "near-" + std::to_string(k) + "-" + std::to_string(v);
            c.records.push_back(detail::record(id, text, b.category, embed(b.topic, spec.noise)));
            c.scores.push_back(detail::score_row(id, rng, 0.6, 0.95));
        }
    }

    // paraphrases: fresh text, embedding nearly identical to a base
    for (std::size_t k = 0; k < spec.paraphrases; ++k) {
        const auto& b = bases[spec.with_contacts + spec.near_clusters + k];
        std::vector<double> e = b.emb;
        for (auto& x : e) x += 0.006 * rng.normal();
        const auto id = "para-" + std::to_string(k);
        c.records.push_back(detail::record(id, detail::document(rng, topics()[b.topic % topics().size()], 200, "\n\n"),
                                           b.category, detail::unit(e)));
        c.scores.push_back(detail::score_row(id, rng, 0.6, 0.95));
    }

    for (std::size_t k = 0; k < spec.too_short; ++k) {
        const auto t = topic_of(k);
        const auto& tp = topics()[t % topics().size()];
        const auto id = "short-" + std::to_string(k);
        c.records.push_back(detail::record(id, "Note: " + tp.words[k % tp.words.size()] + " seen near " + tp.idents[0] + ".",
                                           categories[k % categories.size()], embed(t, spec.noise)));
        c.scores.push_back(detail::score_row(id, rng, 0.6, 0.95));
    }

    for (std::size_t k = 0; k < spec.low_quality; ++k) {
        const auto t = topic_of(k);
        const auto id = "lowq-" + std::to_string(k);
        c.records.push_back(detail::record(id, detail::document(rng, topics()[t % topics().size()], 200, "\n\n"),
                                           categories[k % categories.size()], embed(t, spec.noise)));
        c.scores.push_back(detail::score_row(id, rng, 0.0, 0.2));
    }
    return c;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    sectrain::write_file_atomic(path, out);
}

/// Writes corpus.jsonl, scores.jsonl and pipeline.json into `dir`.
inline void write(const Corpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_jsonl(dir / "corpus.jsonl", c.records);
    write_jsonl(dir / "scores.jsonl", c.scores);
    json cfg = json::parse(R"({
      "seed": 7,
      "input": "corpus.jsonl",
      "output_dir": "out",
      "stages": [
        {"stage": "ingest"},
        {"stage": "dedup", "params": {"exact": true,
                                      "minhash": {"shingle": 5, "bands": 16, "rows": 8, "threshold": 0.8},
                                      "feature": {"tau": 0.9, "dim": 65536, "k_active": 64}}},
        {"stage": "quality", "params": {"min_len": 64, "scores_file": "scores.jsonl",
                                        "weights": [0.3, 0.3, 0.2, 0.2], "min_q": 0.4}},
        {"stage": "aggregate", "params": {"levels": 2, "branching": 5, "budget": 2048, "diversity_weight": 0.3}},
        {"stage": "longctx", "params": {"mode": "entropy", "top_k": 3, "max_anchors": 8, "min_reduction": 0.4}}
      ]
    })");
    cfg["stages"][3]["params"]["branching"] = c.spec.topics;
    sectrain::write_file_atomic(dir / "pipeline.json", cfg.dump(2) + "\n");
}

}  // namespace fixture
