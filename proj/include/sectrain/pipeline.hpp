#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sectrain/aggregate.hpp"
#include "sectrain/corpus.hpp"
#include "sectrain/dedup.hpp"
#include "sectrain/longctx.hpp"
#include "sectrain/manifest.hpp"
#include "sectrain/ngram.hpp"
#include "sectrain/quality.hpp"
#include "sectrain/scrub.hpp"

namespace sectrain::pipeline {

namespace fs = std::filesystem;

class PipelineError : public std::runtime_error {
public:
    PipelineError(const std::string& what, std::string stage = {})
        : std::runtime_error(stage.empty() ? what : "stage '" + stage + "': " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Everything a stage sees. Stages read `input` and write only below `out_dir`.
struct StageContext {
    fs::path input;
    fs::path out_dir;
    json params = json::object();
    std::uint64_t seed = 0;
};

using StageFn = std::function<RunManifest(const StageContext&)>;

struct StageSpec {
    StageFn run;
    std::set<std::string> params;      // accepted parameter keys
    std::set<std::string> path_params; // parameters naming files that must exist
};

namespace detail {

template <typename T>
T param(const json& p, const char* key, T fallback) {
    if (!p.contains(key) || p.at(key).is_null()) return fallback;
    try {
        return p.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("parameter '") + key + "' has the wrong type");
    }
}

inline json section(const json& p, const char* key) {
    if (!p.contains(key)) return json::object();
    const auto& v = p.at(key);
    if (v.is_boolean()) {
        json s = json::object();
        s["enabled"] = v.get<bool>();
        return s;
    }
    if (!v.is_object()) throw std::invalid_argument(std::string("parameter '") + key + "' must be an object");
    return v;
}

inline void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    write_file_atomic(path, out);
}

inline RunManifest start_manifest(const std::string& stage, const StageContext& ctx, std::size_t input_count) {
    RunManifest m;
    m.stage = stage;
    m.input_count = input_count;
    m.seed = ctx.seed;
    m.config_digest = config_digest(ctx.params);
    return m;
}

inline void finish(RunManifest& m, const StageContext& ctx, const std::vector<CorpusRecord>& out) {
    m.output_count = out.size();
    write_records(ctx.out_dir / "records.jsonl", out);
    write_manifest(m, ctx.out_dir / "manifest.json");
}

inline json drops_json(const std::vector<dedup::DropEntry>& drops) {
    json a = json::array();
    for (const auto& d : drops) {
        json e = json::object();
        e["id"] = d.id;
        if (!d.duplicate_of.empty()) e["duplicate_of"] = d.duplicate_of;
        e["reason"] = d.reason;
        a.push_back(std::move(e));
    }
    return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

/// Parses raw JSON lines and normalizes text. Records left empty are dropped.
inline RunManifest run_ingest(const StageContext& ctx) {
    const bool normalize = detail::param(ctx.params, "normalize", true);
    std::vector<CorpusRecord> out;
    std::vector<dedup::DropEntry> drops;
    std::size_t input = 0, changed = 0;
    std::set<std::string> ids;
    std::optional<std::size_t> dim;
    std::size_t line_no = 0;
    for (const auto& row : read_jsonl(ctx.input)) {
        ++line_no;
        ++input;
        json j = row;
        std::string raw;
        if (j.is_object() && j.contains("text") && j.at("text").is_string()) {
            raw = j.at("text").get<std::string>();
            j["text"] = normalize ? normalize_text(raw) : utf8::sanitize(raw);
        }
        const bool empty = j.is_object() && j.contains("text") && j.at("text").is_string() &&
                           j.at("text").get<std::string>().empty() && !raw.empty();
        if (empty) {
            drops.push_back({j.value("id", std::string()), "", "empty_after_normalization"});
            continue;
        }
        CorpusRecord r;
        try {
            r = record_from_json(j);
        } catch (const RecordError& e) {
            throw RecordError(e.what(), line_no);
        }
        if (!ids.insert(r.id).second) throw RecordError("duplicate id '" + r.id + "'", line_no);
        if (r.embedding) {
            if (!dim) dim = r.embedding->size();
            if (*dim != r.embedding->size()) throw RecordError("embedding dimension mismatch", line_no);
        }
        changed += r.text != raw;
        out.push_back(std::move(r));
    }
    auto m = detail::start_manifest("ingest", ctx, input);
    m.add_drop("empty_after_normalization", drops.size());
    m.stats["normalized_changed"] = static_cast<std::int64_t>(changed);
    m.stats["embedding_dim"] = dim ? static_cast<std::int64_t>(*dim) : 0;
    write_file_atomic(ctx.out_dir / "drops.json", detail::drops_json(drops).dump(2) + "\n");
    detail::finish(m, ctx, out);
    return m;
}

/// Exact, then MinHash/LSH, then sparse-feature deduplication.
inline RunManifest run_dedup(const StageContext& ctx) {
    auto records = read_records(ctx.input);
    auto m = detail::start_manifest("dedup", ctx, records.size());
    std::vector<dedup::DropEntry> drops;

    if (detail::param(ctx.params, "exact", true)) {
        auto r = dedup::exact_dedup(std::move(records));
        records = std::move(r.kept);
        m.add_drop("exact_duplicate", r.dropped.size());
        m.stats["exact_dropped"] = static_cast<std::int64_t>(r.dropped.size());
        drops.insert(drops.end(), r.dropped.begin(), r.dropped.end());
    }

    const auto mh = detail::section(ctx.params, "minhash");
    if (detail::param(mh, "enabled", true)) {
        const auto width = detail::param<std::size_t>(mh, "shingle", 5);
        const auto bands = detail::param<std::size_t>(mh, "bands", 16);
        const auto rows = detail::param<std::size_t>(mh, "rows", 8);
        const auto threshold = detail::param(mh, "threshold", 0.8);
        const auto hashes = detail::param<std::size_t>(mh, "num_hashes", bands * rows);
        std::vector<dedup::MinHashSignature> sigs;
        std::vector<std::size_t> owner;  // signature -> record index
        std::size_t unshingled = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            try {
                sigs.push_back(dedup::minhash_signature(records[i].text, width, hashes, ctx.seed));
                owner.push_back(i);
            } catch (const dedup::ShingleError&) {
                ++unshingled;
            }
        }
        const auto lsh = dedup::lsh_near_duplicates(sigs, bands, rows, threshold);
        std::vector<bool> drop(records.size(), false);
        for (const auto& c : lsh.clusters) {
            for (const auto member : c.members) {
                if (member == c.keeper) continue;
                drop[owner[member]] = true;
                drops.push_back({records[owner[member]].id, records[owner[c.keeper]].id, "near_duplicate"});
            }
        }
        std::vector<CorpusRecord> kept;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!drop[i]) kept.push_back(std::move(records[i]));
        }
        m.add_drop("near_duplicate", records.size() - kept.size());
        m.stats["near_clusters"] = static_cast<std::int64_t>(lsh.clusters.size());
        m.stats["near_dropped"] = static_cast<std::int64_t>(records.size() - kept.size());
        m.stats["candidate_pairs"] = static_cast<std::int64_t>(lsh.candidate_pairs);
        m.stats["unshingled"] = static_cast<std::int64_t>(unshingled);
        records = std::move(kept);
    }

    const auto ft = detail::section(ctx.params, "feature");
    if (detail::param(ft, "enabled", true)) {
        const auto tau = detail::param(ft, "tau", 0.9);
        const auto dim = detail::param<std::uint32_t>(ft, "dim", 65536);
        const auto k_active = detail::param<std::size_t>(ft, "k_active", 64);
        std::vector<dedup::SparseFeatureVector> vecs;
        std::vector<std::size_t> owner;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!records[i].embedding) continue;
            vecs.push_back(dedup::encode_sparse_features(*records[i].embedding, dim, k_active, ctx.seed));
            owner.push_back(i);
        }
        const auto fd = dedup::feature_dedup(vecs, tau);
        std::vector<bool> drop(records.size(), false);
        for (const auto v : fd.removed) {
            drop[owner[v]] = true;
            drops.push_back({records[owner[v]].id, "", "feature_duplicate"});
        }
        std::vector<CorpusRecord> kept;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!drop[i]) kept.push_back(std::move(records[i]));
        }
        m.add_drop("feature_duplicate", fd.removed.size());
        m.stats["feature_removed"] = static_cast<std::int64_t>(fd.removed.size());
        m.stats["feature_edges"] = static_cast<std::int64_t>(fd.edges);
        records = std::move(kept);
    }

    write_file_atomic(ctx.out_dir / "drops.json", detail::drops_json(drops).dump(2) + "\n");
    detail::finish(m, ctx, records);
    return m;
}

/// Heuristic filters, scrubbing, then composite-quality thresholding.
inline RunManifest run_quality(const StageContext& ctx) {
    auto records = read_records(ctx.input);
    auto m = detail::start_manifest("quality", ctx, records.size());

    quality::FilterThresholds t;
    t.min_len = detail::param<std::size_t>(ctx.params, "min_len", t.min_len);
    t.max_len = detail::param<std::size_t>(ctx.params, "max_len", t.max_len);
    for (const auto& lang : detail::param(ctx.params, "languages", std::vector<std::string>{})) {
        t.allowed_languages.insert(lang);
    }
    if (ctx.params.contains("max_perplexity") && !ctx.params.at("max_perplexity").is_null()) {
        t.max_perplexity = ctx.params.at("max_perplexity").get<double>();
    }
    std::optional<TrigramLanguageClassifier> lang;
    if (!t.allowed_languages.empty()) lang = TrigramLanguageClassifier::builtin();
    std::optional<CharNgramModel> lm;
    if (t.max_perplexity) lm = CharNgramModel::english();

    const bool scrub = detail::param(ctx.params, "scrub", true);
    quality::ScrubRules rules;
    if (ctx.params.contains("scrub_rules")) rules = quality::ScrubRules::from_file(ctx.params.at("scrub_rules").get<std::string>());

    std::optional<quality::TableJudge> judge;
    if (ctx.params.contains("scores_file")) judge = quality::TableJudge::from_file(ctx.params.at("scores_file").get<std::string>());
    std::array<double, 4> weights = {0.25, 0.25, 0.25, 0.25};
    if (ctx.params.contains("weights")) {
        const auto w = ctx.params.at("weights").get<std::vector<double>>();
        if (w.size() != 4) throw std::invalid_argument("weights needs four entries");
        std::copy(w.begin(), w.end(), weights.begin());
    }
    quality::validate_weights(weights);
    const double min_q = detail::param(ctx.params, "min_q", 0.0);

    std::vector<CorpusRecord> out;
    std::vector<dedup::DropEntry> drops;
    std::vector<json> scrub_log;
    std::int64_t redactions = 0, unscored = 0;
    for (auto& r : records) {
        const auto verdict =
            quality::heuristic_filter(r, t, lang ? &*lang : nullptr, lm ? &*lm : nullptr);
        if (!verdict.keep) {
            m.add_drop(verdict.reason);
            drops.push_back({r.id, "", verdict.reason});
            continue;
        }
        if (judge) {
            if (const auto s = judge->score(r)) {
                const auto q = quality::composite_quality(*s, weights);
                if (q.q < min_q) {
                    m.add_drop("low_quality");
                    drops.push_back({r.id, "", "low_quality"});
                    continue;
                }
                r.metadata["quality_q"] = json(q.q).dump();
            } else {
                ++unscored;
            }
        }
        if (scrub) {
            auto [text, report] = quality::scrub_sensitive(r.text, rules);
            if (!report.spans.empty()) {
                json row = json::object();
                row["id"] = r.id;
                json spans = json::array();
                for (const auto& s : report.spans) {
                    spans.push_back(json{{"start", s.start}, {"end", s.end}, {"rule", s.rule}});
                }
                row["spans"] = std::move(spans);
                row["policy"] = report.policy;
                scrub_log.push_back(std::move(row));
                redactions += static_cast<std::int64_t>(report.spans.size());
                r.text = std::move(text);
            }
        }
        out.push_back(std::move(r));
    }
    m.stats["scrubbed_records"] = static_cast<std::int64_t>(scrub_log.size());
    m.stats["redactions"] = redactions;
    m.stats["unscored"] = unscored;
    detail::write_jsonl(ctx.out_dir / "scrub.jsonl", scrub_log);
    write_file_atomic(ctx.out_dir / "drops.json", detail::drops_json(drops).dump(2) + "\n");
    detail::finish(m, ctx, out);
    return m;
}

/// Clusters records, assembles budgeted windows per finest cluster and
/// reorders each window by informativeness (metadata "quality_q").
inline RunManifest run_aggregate(const StageContext& ctx) {
    auto records = read_records(ctx.input);
    auto m = detail::start_manifest("aggregate", ctx, records.size());
    const auto levels = detail::param<std::size_t>(ctx.params, "levels", 2);
    const auto branching = detail::param<std::size_t>(ctx.params, "branching", 4);
    const auto budget = detail::param<std::size_t>(ctx.params, "budget", 4096);
    const auto diversity = detail::param(ctx.params, "diversity_weight", 0.3);
    const bool reorder = detail::param(ctx.params, "reorder", true);

    std::size_t dim = 0;
    for (const auto& r : records) {
        if (r.embedding) dim = r.embedding->size();
    }
    std::vector<std::vector<double>> emb;
    for (const auto& r : records) emb.push_back(r.embedding ? *r.embedding : std::vector<double>(dim, 0.0));
    const auto tree = aggregate::cluster_hierarchical(emb, levels, branching, ctx.seed);
    for (std::size_t l = 0; l < tree.levels(); ++l) {
        m.stats["clusters_level_" + std::to_string(l)] = records.empty() ? 0 : static_cast<std::int64_t>(tree.cluster_count(l));
    }

    const auto score_of = [](const CorpusRecord& r) {
        const auto it = r.metadata.find("quality_q");
        return it == r.metadata.end() ? 0.0 : std::stod(it->second);
    };
    const std::size_t leaves = records.empty() ? 0 : tree.cluster_count(tree.levels() - 1);
    std::vector<CorpusRecord> out;
    std::vector<json> sequences;
    std::vector<dedup::DropEntry> drops;
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < records.size(); ++i) index_of[records[i].id] = i;
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        std::vector<aggregate::WindowItem> items;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (tree.leaves()[i] != leaf) continue;
            items.push_back({records[i].id, records[i].category, aggregate::estimate_tokens(records[i].text),
                             records[i].embedding, score_of(records[i])});
        }
        const auto windows = aggregate::build_context_windows(
            items, budget, diversity, derive_seed(ctx.seed, 0x57494e44ULL + leaf));
        for (const auto& id : windows.oversized) {
            m.add_drop("exceeds_budget");
            drops.push_back({id, "", "exceeds_budget"});
        }
        for (auto seq : windows.windows) {
            if (reorder) seq = aggregate::reorder_by_informativeness(seq);
            json j = aggregate::to_json(seq);
            j["window"] = sequences.size();
            j["cluster"] = leaf;
            for (const auto& id : seq.ids) {
                auto r = records[index_of.at(id)];
                r.metadata["window"] = std::to_string(sequences.size());
                r.metadata["cluster"] = std::to_string(leaf);
                out.push_back(std::move(r));
            }
            sequences.push_back(std::move(j));
        }
    }
    m.stats["windows"] = static_cast<std::int64_t>(sequences.size());
    detail::write_jsonl(ctx.out_dir / "sequences.jsonl", sequences);
    write_file_atomic(ctx.out_dir / "drops.json", detail::drops_json(drops).dump(2) + "\n");
    detail::finish(m, ctx, out);
    return m;
}

/// Entropy-verified context synthesis, or hard-negative interleaving.
/// Every input record yields one output record.
inline RunManifest run_longctx(const StageContext& ctx) {
    auto records = read_records(ctx.input);
    auto m = detail::start_manifest("longctx", ctx, records.size());
    const auto mode = detail::param<std::string>(ctx.params, "mode", "entropy");
    const auto top_k = detail::param<std::size_t>(ctx.params, "top_k", 3);

    std::size_t dim = 0;
    for (const auto& r : records) {
        if (r.embedding) dim = r.embedding->size();
    }
    std::vector<std::vector<double>> emb;
    for (const auto& r : records) emb.push_back(r.embedding ? *r.embedding : std::vector<double>(dim, 0.0));
    const auto neighbours = [&](std::size_t i) {
        std::vector<longctx::Passage> out;
        if (!records[i].embedding) return out;
        for (const auto j : longctx::cosine_top_k(emb[i], emb, top_k, i)) {
            if (records[j].embedding) out.push_back({records[j].id, records[j].text});
        }
        return out;
    };

    std::vector<CorpusRecord> out;
    if (mode == "entropy") {
        const auto model = CharNgramModel::english(detail::param(ctx.params, "cache_weight", CharNgramModel::kDefaultCacheWeight));
        longctx::ThresholdPolicy policy;
        policy.c = detail::param(ctx.params, "c", 1.0);
        policy.max_anchors = detail::param<std::size_t>(ctx.params, "max_anchors", 8);
        const auto min_reduction = detail::param(ctx.params, "min_reduction", 0.40);
        const auto placement = longctx::parse_placement(detail::param<std::string>(ctx.params, "placement", "prepend"));
        std::vector<json> audit;
        std::int64_t anchors_total = 0, verified_total = 0, synthesized = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            const auto anchors = longctx::find_entropy_anchors(r.text, model, policy);
            anchors_total += static_cast<std::int64_t>(anchors.size());
            const auto candidates = neighbours(i);
            const auto result = longctx::verify_candidates(r.text, anchors, candidates, model, min_reduction);
            for (const auto& e : result.audit) {
                json row = longctx::to_json(e);
                row["doc_id"] = r.id;
                audit.push_back(std::move(row));
            }
            verified_total += static_cast<std::int64_t>(result.verified.size());
            if (result.verified.empty()) {
                out.push_back(r);
                continue;
            }
            const auto passages = longctx::referenced_passages(result.verified, candidates);
            out.push_back(longctx::synthesize_long_doc(r, passages, placement, derive_seed(ctx.seed, i)));
            ++synthesized;
        }
        m.stats["anchors"] = anchors_total;
        m.stats["verified_dependencies"] = verified_total;
        m.stats["synthesized"] = synthesized;
        detail::write_jsonl(ctx.out_dir / "audit.jsonl", audit);
    } else if (mode == "nextlong") {
        const auto target = detail::param<std::size_t>(ctx.params, "target_length", 2048);
        std::int64_t interleaved = 0, inserted = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto distractors = neighbours(i);
            const auto words = utf8::word_count(records[i].text);
            auto r = longctx::interleave_hard_negatives(records[i], distractors, std::max(target, words));
            if (r.metadata.contains("distractors")) {
                ++interleaved;
                inserted += static_cast<std::int64_t>(std::count(r.metadata["distractors"].begin(),
                                                                 r.metadata["distractors"].end(), ',') + 1);
            }
            out.push_back(std::move(r));
        }
        m.stats["interleaved"] = interleaved;
        m.stats["distractors_inserted"] = inserted;
    } else {
        throw std::invalid_argument("unknown longctx mode '" + mode + "'");
    }
    detail::finish(m, ctx, out);
    return m;
}

inline const std::map<std::string, StageSpec>& registry() {
    static const std::map<std::string, StageSpec> stages = {
        {"ingest", {run_ingest, {"normalize"}, {}}},
        {"dedup", {run_dedup, {"exact", "minhash", "feature"}, {}}},
        {"quality",
         {run_quality,
          {"min_len", "max_len", "languages", "max_perplexity", "scrub", "scrub_rules", "scores_file", "weights",
           "min_q"},
          {"scrub_rules", "scores_file"}}},
        {"aggregate", {run_aggregate, {"levels", "branching", "budget", "diversity_weight", "reorder"}, {}}},
        {"longctx",
         {run_longctx,
          {"mode", "top_k", "cache_weight", "c", "max_anchors", "min_reduction", "placement", "target_length"},
          {}}},
    };
    return stages;
}

/**
 * Runs one stage into `out_dir`. Output is staged in a sibling directory and
 * swapped in only after the stage succeeds.
 */
inline RunManifest execute_stage(const std::string& stage, const fs::path& input, const fs::path& out_dir,
                                 const json& params, std::uint64_t seed) {
    const auto it = registry().find(stage);
    if (it == registry().end()) throw PipelineError("unknown stage '" + stage + "'");
    auto partial = out_dir;
    partial += ".partial";
    std::error_code ec;
    fs::remove_all(partial, ec);
    fs::create_directories(partial);
    RunManifest m;
    try {
        m = it->second.run(StageContext{input, partial, params, seed});
    } catch (const std::exception& e) {
        fs::remove_all(partial, ec);
        throw PipelineError(e.what(), stage);
    }
    fs::remove_all(out_dir, ec);
    fs::rename(partial, out_dir);
    return m;
}

// ---------------------------------------------------------------------------
// Configuration and planning

/**
 * Pipeline configuration (JSON):
 * @code
 * {"seed": 7, "input": "corpus.jsonl", "output_dir": "out",
 *  "stages": [{"stage": "ingest"},
 *             {"stage": "dedup", "params": {"minhash": {"threshold": 0.8}}},
 *             {"stage": "quality", "id": "q", "input": "ingest", "params": {...}}]}
 * @endcode
 * Relative paths resolve against the config file's directory. A stage reads
 * the previous stage's records unless "input" names an earlier stage id.
 */
struct PipelineConfig {
    std::uint64_t seed = 0;
    fs::path input;
    fs::path output_dir = "out";
    json stages = json::array();
    fs::path base_dir = ".";

    static PipelineConfig from_json(const json& j, const fs::path& base_dir = ".") {
        if (!j.is_object()) throw PipelineError("config must be a JSON object");
        for (const auto& [key, _] : j.items()) {
            if (key != "seed" && key != "input" && key != "output_dir" && key != "stages") {
                throw PipelineError("unknown config key '" + key + "'");
            }
        }
        PipelineConfig c;
        c.base_dir = base_dir;
        try {
            c.seed = j.value("seed", std::uint64_t{0});
            if (!j.contains("input")) throw PipelineError("config needs an 'input' file");
            c.input = j.at("input").get<std::string>();
            c.output_dir = j.value("output_dir", std::string("out"));
            c.stages = j.value("stages", json::array());
        } catch (const json::exception& e) {
            throw PipelineError(std::string("bad config: ") + e.what());
        }
        if (!c.stages.is_array()) throw PipelineError("'stages' must be an array");
        return c;
    }

    static PipelineConfig from_file(const fs::path& path) {
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw PipelineError("cannot parse config '" + path.string() + "': " + e.what());
        }
        return from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
    }

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

struct PlanStep {
    std::size_t index = 0;
    std::string id;
    std::string stage;
    std::string input_stage;  // empty: reads the pipeline input file
    fs::path input;
    fs::path output_dir;
    json params = json::object();
    std::string param_digest;
};

struct Plan {
    std::uint64_t seed = 0;
    std::string seed_digest;
    fs::path input;
    fs::path output_dir;
    std::vector<PlanStep> steps;
};

inline std::string step_dir_name(std::size_t index, const std::string& id) {
    std::string n = std::to_string(index + 1);
    if (n.size() < 2) n = "0" + n;
    return n + "_" + id;
}

/// Validates stage names, parameters, wiring and referenced files. No side effects.
inline Plan plan(const PipelineConfig& config) {
    Plan p;
    p.seed = config.seed;
    p.seed_digest = to_hex(fnv1a64(std::to_string(config.seed)));
    p.input = config.resolve(config.input);
    p.output_dir = config.resolve(config.output_dir);
    if (!fs::is_regular_file(p.input)) throw PipelineError("input file not found: " + p.input.string());
    std::map<std::string, std::size_t> ids;
    for (std::size_t i = 0; i < config.stages.size(); ++i) {
        const auto& s = config.stages[i];
        if (!s.is_object() || !s.contains("stage") || !s.at("stage").is_string()) {
            throw PipelineError("stage " + std::to_string(i + 1) + " needs a 'stage' name");
        }
        PlanStep step;
        step.index = i;
        step.stage = s.at("stage").get<std::string>();
        const auto spec = registry().find(step.stage);
        if (spec == registry().end()) throw PipelineError("unknown stage '" + step.stage + "'");
        for (const auto& [key, _] : s.items()) {
            if (key != "stage" && key != "id" && key != "input" && key != "params") {
                throw PipelineError("unknown key '" + key + "'", step.stage);
            }
        }
        step.id = s.value("id", step.stage);
        if (step.id.empty() || step.id.find_first_of("/\\") != std::string::npos) {
            throw PipelineError("invalid stage id '" + step.id + "'");
        }
        if (ids.contains(step.id)) throw PipelineError("duplicate stage id '" + step.id + "'");
        step.params = s.value("params", json::object());
        if (!step.params.is_object()) throw PipelineError("'params' must be an object", step.id);
        for (const auto& [key, _] : step.params.items()) {
            if (!spec->second.params.contains(key)) throw PipelineError("unknown parameter '" + key + "'", step.id);
        }
        for (const auto& key : spec->second.path_params) {
            if (!step.params.contains(key)) continue;
            const auto path = config.resolve(step.params.at(key).get<std::string>());
            if (!fs::is_regular_file(path)) throw PipelineError("file not found: " + path.string(), step.id);
            step.params[key] = path.string();
        }
        if (s.contains("input")) {
            const auto ref = s.at("input").get<std::string>();
            if (ref == step.id) throw PipelineError("stage reads its own output (cycle)", step.id);
            const auto it = ids.find(ref);
            if (it == ids.end()) {
                bool later = false;
                for (std::size_t k = i + 1; k < config.stages.size(); ++k) {
                    const auto& other = config.stages[k];
                    later = later || (other.is_object() && other.value("id", other.value("stage", std::string())) == ref);
                }
                throw PipelineError(later ? "input '" + ref + "' is a later stage (cycle)"
                                          : "input '" + ref + "' names no earlier stage",
                                    step.id);
            }
            step.input_stage = ref;
        } else if (i > 0) {
            step.input_stage = p.steps.back().id;
        }
        step.input = step.input_stage.empty() ? p.input : p.steps[ids.at(step.input_stage)].output_dir / "records.jsonl";
        step.output_dir = p.output_dir / step_dir_name(i, step.id);
        step.param_digest = config_digest(step.params);
        ids[step.id] = i;
        p.steps.push_back(std::move(step));
    }
    return p;
}

inline json to_json(const Plan& p) {
    json j = json::object();
    j["seed_digest"] = p.seed_digest;
    j["input"] = p.input.string();
    j["output_dir"] = p.output_dir.string();
    json steps = json::array();
    for (const auto& s : p.steps) {
        json e = json::object();
        e["index"] = s.index;
        e["id"] = s.id;
        e["stage"] = s.stage;
        e["input"] = s.input.string();
        if (!s.input_stage.empty()) e["input_stage"] = s.input_stage;
        e["output_dir"] = s.output_dir.string();
        e["param_digest"] = s.param_digest;
        steps.push_back(std::move(e));
    }
    j["steps"] = std::move(steps);
    return j;
}

// ---------------------------------------------------------------------------
// Execution

struct RunResult {
    json report;  // deterministic
    json timing;  // wall-clock per stage
};

/**
 * Executes the plan stage by stage. A failure stops the run; outputs of
 * stages that already finished stay in place. Writes run_report.json and
 * timing.json to the output directory.
 */
inline RunResult run(const Plan& p) {
    fs::create_directories(p.output_dir);
    RunResult res;
    res.report = json::object();
    res.report["seed"] = p.seed;
    res.report["input"] = p.input.filename().string();
    json stages = json::array();
    json timing = json::array();
    std::map<std::string, RunManifest> done;
    std::uint64_t first_input = 0, final_output = 0;
    for (const auto& step : p.steps) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto m = execute_stage(step.stage, step.input, step.output_dir, step.params,
                                     derive_seed(p.seed, fnv1a64(step.id)));
        const auto t1 = std::chrono::steady_clock::now();
        if (!step.input_stage.empty() && done.at(step.input_stage).output_count != m.input_count) {
            throw PipelineError("input count does not match the output of '" + step.input_stage + "'", step.id);
        }
        if (step.index == 0) first_input = m.input_count;
        final_output = m.output_count;
        json e = json::object();
        e["id"] = step.id;
        e["output_dir"] = step.output_dir.filename().string();
        e["param_digest"] = step.param_digest;
        e["manifest"] = to_json(m);
        stages.push_back(std::move(e));
        timing.push_back(json{{"id", step.id},
                              {"seconds", std::chrono::duration<double>(t1 - t0).count()}});
        done[step.id] = m;
    }
    res.report["stages"] = std::move(stages);
    std::uint64_t dropped = 0;
    for (const auto& [_, m] : done) dropped += m.dropped();
    res.report["totals"] = json{{"input", first_input}, {"output", final_output}, {"dropped", dropped}};
    res.report["status"] = "ok";
    res.timing = json::object();
    res.timing["stages"] = std::move(timing);
    write_file_atomic(p.output_dir / "run_report.json", res.report.dump(2) + "\n");
    write_file_atomic(p.output_dir / "timing.json", res.timing.dump(2) + "\n");
    return res;
}

}  // namespace sectrain::pipeline
