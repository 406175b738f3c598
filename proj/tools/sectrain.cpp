// sectrain command-line driver.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sectrain/sectrain.hpp"

namespace fs = std::filesystem;
using sectrain::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
};

json load_params(const Globals& g) {
    if (g.config.empty()) return json::object();
    try {
        auto j = json::parse(sectrain::read_file(g.config));
        if (!j.is_object()) throw std::invalid_argument("config '" + g.config + "' is not a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("cannot parse config '" + g.config + "': " + e.what());
    }
}

void print_manifest(const sectrain::RunManifest& m) { std::cout << sectrain::to_json(m).dump(2) << "\n"; }

/// Registers a stage subcommand whose flags override the params from --config.
template <typename Setup>
CLI::App* stage_command(CLI::App& app, const Globals& g, const std::string& name, const std::string& about,
                        Setup setup) {
    auto* cmd = app.add_subcommand(name, about);
    auto input = std::make_shared<std::string>();
    cmd->add_option("--input,-i", *input, "input records (JSON lines)")->required()->check(CLI::ExistingFile);
    auto overrides = std::make_shared<json>(json::object());
    setup(*cmd, *overrides);
    cmd->callback([&g, name, input, overrides] {
        json params = load_params(g);
        for (const auto& [k, v] : overrides->items()) {
            if (v.is_object() && params.contains(k) && params[k].is_object()) {
                params[k].update(v);
            } else {
                params[k] = v;
            }
        }
        const fs::path out = g.out.empty() ? fs::path("out") / name : fs::path(g.out);
        print_manifest(sectrain::pipeline::execute_stage(name, *input, out, params, g.seed));
    });
    return cmd;
}

/// Binds an optional flag to a JSON path in `params`.
template <typename T>
void flag(CLI::App& cmd, json& params, const std::string& names, const std::string& key, const std::string& help,
          const std::string& section = {}) {
    cmd.add_option_function<T>(
        names,
        [&params, key, section](const T& v) {
            if (section.empty()) {
                params[key] = v;
            } else {
                params[section][key] = v;
            }
        },
        help);
}

void switch_off(CLI::App& cmd, json& params, const std::string& names, const std::string& key, const std::string& help,
                const std::string& section = {}) {
    cmd.add_flag_callback(
        names,
        [&params, key, section] {
            if (section.empty()) {
                params[key] = false;
            } else {
                params[section][key] = false;
            }
        },
        help);
}

std::map<std::string, json> by_id(const fs::path& path) {
    std::map<std::string, json> out;
    for (auto& row : sectrain::read_jsonl(path)) {
        const auto id = row.at("id").get<std::string>();
        out[id] = std::move(row);
    }
    return out;
}

json reward_row(const std::string& task, const json* pred, const json& gold, double gamma) {
    namespace rw = sectrain::rewards;
    rw::RewardResult r{0.0, true, 0};
    const std::string raw = pred && pred->contains("output") ? pred->at("output").get<std::string>() : "";
    if (task == "rcm") {
        const auto g = rw::parse_cwe(gold.at("cwe").get<std::string>());
        if (pred && pred->contains("cwe")) {
            try {
                r = {rw::reward_rcm(rw::parse_cwe(pred->at("cwe").get<std::string>()), g), false, 0};
            } catch (const rw::FormatError&) {
            }
        } else if (pred) {
            r = rw::reward_rcm(raw, g);
        }
    } else if (task == "vsp") {
        const auto g = rw::parse_cvss_vector(gold.at("vector").get<std::string>(), gold.at("score").get<double>());
        if (pred) {
            std::optional<double> score;
            if (pred->contains("score") && pred->at("score").is_number()) score = pred->at("score").get<double>();
            const std::string text = pred->contains("vector") ? pred->at("vector").get<std::string>() : raw;
            r = rw::reward_vsp(text, score, g, gamma);
        }
    } else {
        const auto gold_set = rw::parse_techniques(gold.at("techniques").get<std::vector<std::string>>());
        if (gold_set.malformed) throw std::invalid_argument("malformed gold technique for '" + gold.at("id").get<std::string>() + "'");
        if (pred && pred->contains("techniques")) {
            r = rw::reward_ate(pred->at("techniques").get<std::vector<std::string>>(), gold_set.set);
        } else if (pred) {
            r = {rw::reward_ate(rw::extract_techniques(raw), gold_set.set), false, 0};
        }
    }
    json row = json::object();
    row["id"] = gold.at("id");
    row["reward"] = r.reward;
    row["format_error"] = r.format_error;
    if (task == "ate") row["format_count"] = r.format_count;
    return row;
}

json grpo_report(const json& input) {
    namespace rl = sectrain::rlmath;
    rl::GrpoConfig cfg;
    const json c = input.value("config", json::object());
    cfg.epsilon = c.value("epsilon", cfg.epsilon);
    cfg.kl_coef = c.value("kl_coef", cfg.kl_coef);
    cfg.pass_low = c.value("pass_low", cfg.pass_low);
    cfg.pass_high = c.value("pass_high", cfg.pass_high);
    const double pass_threshold = c.value("pass_threshold", 0.5);
    cfg.validate();
    json groups = json::array();
    for (const auto& g : input.at("groups")) {
        const auto rewards = g.at("rewards").get<std::vector<double>>();
        const auto adv = rl::group_advantages(rewards);
        std::size_t passes = 0;
        for (double r : rewards) passes += r >= pass_threshold;
        json out = json::object();
        if (g.contains("id")) out["id"] = g.at("id");
        out["advantages"] = adv;
        out["pass_rate"] = static_cast<double>(passes) / static_cast<double>(rewards.size());
        out["mask"] = rl::to_string(rl::difficulty_mask(passes, rewards.size(), cfg));
        if (g.contains("ratios")) {
            const auto ratios = g.at("ratios").get<std::vector<std::vector<double>>>();
            if (ratios.size() != rewards.size()) throw std::invalid_argument("one ratio sequence per response required");
            std::vector<rl::GrpoResponse> responses(ratios.size());
            for (std::size_t i = 0; i < ratios.size(); ++i) {
                responses[i].advantage = adv[i];
                responses[i].ratios = ratios[i];
                if (g.contains("policy_logprobs")) responses[i].policy_logprobs = g.at("policy_logprobs")[i].get<std::vector<double>>();
                if (g.contains("ref_logprobs")) responses[i].ref_logprobs = g.at("ref_logprobs")[i].get<std::vector<double>>();
            }
            const auto loss = rl::grpo_loss(responses, cfg);
            out["loss"] = loss.loss;
            out["surrogate"] = loss.surrogate;
            out["kl"] = loss.kl;
            out["clipped"] = loss.clipped;
        }
        if (g.contains("chosen") && g.contains("rejected")) {
            const auto m = rl::branch_divergence_mask(g.at("chosen").get<std::vector<std::int64_t>>(),
                                                      g.at("rejected").get<std::vector<std::int64_t>>());
            out["divergence"] = json{{"index", m.index},
                                     {"diverged", m.diverged},
                                     {"chosen_mask", m.chosen},
                                     {"rejected_mask", m.rejected}};
        }
        groups.push_back(std::move(out));
    }
    return json{{"groups", groups}};
}

std::string error_type(const std::exception& e) {
    if (dynamic_cast<const sectrain::pipeline::PipelineError*>(&e)) return "pipeline_error";
    if (dynamic_cast<const sectrain::RecordError*>(&e)) return "record_error";
    if (dynamic_cast<const sectrain::ManifestError*>(&e)) return "manifest_error";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
    return "runtime_error";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Security-domain training data pipeline and training-math kernels"};
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "global seed")->capture_default_str();
    app.add_option("--config", g.config, "config file (pipeline config, or stage params)");
    app.add_option("--out", g.out, "output directory or file");

    stage_command(app, g, "ingest", "parse and normalize raw records", [](CLI::App& cmd, json& p) {
        switch_off(cmd, p, "--no-normalize", "normalize", "keep text as-is apart from UTF-8 repair");
    });
    stage_command(app, g, "dedup", "exact, MinHash and feature-level deduplication", [](CLI::App& cmd, json& p) {
        switch_off(cmd, p, "--no-exact", "exact", "skip the exact tier");
        switch_off(cmd, p, "--no-minhash", "enabled", "skip the MinHash tier", "minhash");
        switch_off(cmd, p, "--no-feature", "enabled", "skip the feature tier", "feature");
        flag<std::size_t>(cmd, p, "--shingle", "shingle", "shingle width in tokens", "minhash");
        flag<std::size_t>(cmd, p, "--bands", "bands", "LSH bands", "minhash");
        flag<std::size_t>(cmd, p, "--rows", "rows", "rows per band", "minhash");
        flag<double>(cmd, p, "--threshold", "threshold", "signature similarity to confirm a pair", "minhash");
        flag<double>(cmd, p, "--tau", "tau", "feature cosine threshold", "feature");
    });
    stage_command(app, g, "quality", "filters, scrubbing and composite quality", [](CLI::App& cmd, json& p) {
        flag<std::size_t>(cmd, p, "--min-len", "min_len", "minimum length in code points");
        flag<std::size_t>(cmd, p, "--max-len", "max_len", "maximum length in code points");
        flag<std::vector<std::string>>(cmd, p, "--languages", "languages", "allowed language codes");
        flag<double>(cmd, p, "--max-perplexity", "max_perplexity", "character-model perplexity ceiling");
        flag<std::string>(cmd, p, "--scores-file", "scores_file", "judge scores (JSON lines)");
        flag<std::string>(cmd, p, "--scrub-rules", "scrub_rules", "scrub pattern file (JSON)");
        switch_off(cmd, p, "--no-scrub", "scrub", "disable scrubbing");
        flag<double>(cmd, p, "--min-q", "min_q", "composite quality floor");
        cmd.add_option_function<std::string>(
            "--weights", [&p](const std::string& w) { p["weights"] = sectrain::quality::parse_weights(w); },
            "four comma-separated weights");
    });
    stage_command(app, g, "aggregate", "clustering and context-window assembly", [](CLI::App& cmd, json& p) {
        flag<std::size_t>(cmd, p, "--levels", "levels", "clustering depth");
        flag<std::size_t>(cmd, p, "--branching", "branching", "clusters per split");
        flag<std::size_t>(cmd, p, "--budget", "budget", "window token budget");
        flag<double>(cmd, p, "--diversity-weight", "diversity_weight", "weight on category novelty");
        switch_off(cmd, p, "--no-reorder", "reorder", "keep assembly order");
    });
    stage_command(app, g, "longctx", "entropy-verified synthesis or hard-negative interleaving",
                  [](CLI::App& cmd, json& p) {
                      flag<std::string>(cmd, p, "--mode", "mode", "entropy | nextlong");
                      flag<double>(cmd, p, "--min-reduction", "min_reduction", "relative entropy reduction floor");
                      flag<std::string>(cmd, p, "--placement", "placement", "prepend | append");
                      flag<std::size_t>(cmd, p, "--target-length", "target_length", "nextlong length in words");
                      flag<std::size_t>(cmd, p, "--top-k", "top_k", "retrieved candidates per document");
                      flag<std::size_t>(cmd, p, "--max-anchors", "max_anchors", "anchors per document");
                  });

    // schedule plan
    auto* schedule = app.add_subcommand("schedule", "training schedules");
    auto* plan_cmd = schedule->add_subcommand("plan", "per-step mixing weight and length table (CSV)");
    schedule->require_subcommand(1);
    sectrain::schedule::MixingSchedule mix;
    std::string length_stages = "";
    std::size_t every = 1;
    plan_cmd->add_option("--steps", mix.total_steps, "total mid-training steps")->capture_default_str();
    plan_cmd->add_option("--alpha-min", mix.alpha_min)->capture_default_str();
    plan_cmd->add_option("--alpha-max", mix.alpha_max)->capture_default_str();
    plan_cmd->add_option("--tau-warm", mix.tau_warm)->capture_default_str();
    plan_cmd->add_option("--length-stages", length_stages, "until:max_tokens,... (default: one stage)");
    plan_cmd->add_option("--every", every, "emit every k-th step")->check(CLI::PositiveNumber)->capture_default_str();
    plan_cmd->callback([&] {
        std::vector<sectrain::schedule::LengthSchedule::Stage> stages;
        std::stringstream ss(length_stages);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw std::invalid_argument("bad length stage '" + item + "'");
            stages.push_back({std::stoll(item.substr(0, colon)), std::stoll(item.substr(colon + 1))});
        }
        const auto last = static_cast<std::int64_t>(mix.total_steps);
        if (stages.empty()) stages.push_back({last, 4096});
        const sectrain::schedule::LengthSchedule lengths(stages);
        std::ostringstream csv;
        csv << "t,alpha,max_tokens\n";
        csv.precision(17);
        for (std::int64_t t = 0; t <= last; t += static_cast<std::int64_t>(every)) {
            csv << t << ',' << sectrain::schedule::agentic_mix_weight(static_cast<double>(t), mix) << ','
                << lengths(t) << '\n';
        }
        if (g.out.empty()) {
            std::cout << csv.str();
        } else {
            sectrain::write_file_atomic(g.out, csv.str());
        }
    });

    // reward score
    auto* reward = app.add_subcommand("reward", "verifiable rewards");
    reward->require_subcommand(1);
    auto* score_cmd = reward->add_subcommand("score", "score predictions against gold (JSON lines out)");
    std::string task, pred_file, gold_file;
    double gamma = 0.5;
    score_cmd->add_option("--task", task)->required()->check(CLI::IsMember({"rcm", "vsp", "ate"}));
    score_cmd->add_option("--pred-file", pred_file)->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--gold-file", gold_file)->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--gamma", gamma, "score-match weight (vsp)")->capture_default_str();
    score_cmd->callback([&] {
        const auto preds = by_id(pred_file);
        std::string out;
        for (const auto& gold : sectrain::read_jsonl(gold_file)) {
            const auto it = preds.find(gold.at("id").get<std::string>());
            out += reward_row(task, it == preds.end() ? nullptr : &it->second, gold, gamma).dump() + "\n";
        }
        if (g.out.empty()) {
            std::cout << out;
        } else {
            sectrain::write_file_atomic(g.out, out);
        }
    });

    // rlmath grpo
    auto* rlmath = app.add_subcommand("rlmath", "policy-optimization kernels");
    rlmath->require_subcommand(1);
    auto* grpo = rlmath->add_subcommand("grpo", "advantages, masks, loss and clip diagnostics");
    std::string group_file;
    grpo->add_option("--group-file", group_file)->required()->check(CLI::ExistingFile);
    grpo->callback([&] {
        const auto report = grpo_report(json::parse(sectrain::read_file(group_file))).dump(2) + "\n";
        if (g.out.empty()) {
            std::cout << report;
        } else {
            sectrain::write_file_atomic(g.out, report);
        }
    });

    // distill abkd
    auto* distill = app.add_subcommand("distill", "distillation divergences");
    distill->require_subcommand(1);
    auto* abkd = distill->add_subcommand("abkd", "alpha-beta divergence per teacher/student pair");
    sectrain::distill::AbkdParams ab;
    std::size_t topk = 0;
    std::string pairs_file;
    abkd->add_option("--alpha", ab.alpha)->capture_default_str();
    abkd->add_option("--beta", ab.beta)->capture_default_str();
    abkd->add_option("--topk", topk, "restrict to the teacher's top-K (0: full support)");
    abkd->add_option("--pairs-file", pairs_file, "JSON lines with teacher and student arrays")
        ->required()
        ->check(CLI::ExistingFile);
    abkd->callback([&] {
        std::string out;
        for (const auto& row : sectrain::read_jsonl(pairs_file)) {
            const sectrain::distill::CategoricalDist p(row.at("teacher").get<std::vector<double>>());
            const sectrain::distill::CategoricalDist q(row.at("student").get<std::vector<double>>());
            json r = json::object();
            if (row.contains("id")) r["id"] = row.at("id");
            r["divergence"] = topk ? sectrain::distill::topk_abkd(p, q, topk, ab)
                                   : sectrain::distill::abkd_divergence(p, q, ab);
            out += r.dump() + "\n";
        }
        if (g.out.empty()) {
            std::cout << out;
        } else {
            sectrain::write_file_atomic(g.out, out);
        }
    });

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "declarative multi-stage runs");
    pipeline->require_subcommand(1);
    const auto load_plan = [&g, seed_opt] {
        if (g.config.empty()) throw std::invalid_argument("pipeline needs --config");
        auto cfg = sectrain::pipeline::PipelineConfig::from_file(g.config);
        if (!g.out.empty()) cfg.output_dir = fs::absolute(g.out);
        if (seed_opt->count()) cfg.seed = g.seed;
        return sectrain::pipeline::plan(cfg);
    };
    pipeline->add_subcommand("plan", "validate a config and print the plan")->callback([&] {
        std::cout << sectrain::pipeline::to_json(load_plan()).dump(2) << "\n";
    });
    pipeline->add_subcommand("run", "run every stage and write run_report.json")->callback([&] {
        std::cout << sectrain::pipeline::run(load_plan()).report.dump(2) << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json err = json::object();
        err["type"] = error_type(e);
        err["message"] = e.what();
        if (const auto* p = dynamic_cast<const sectrain::pipeline::PipelineError*>(&e); p && !p->stage().empty()) {
            err["stage"] = p->stage();
        }
        std::cerr << json{{"error", err}}.dump() << "\n";
        return 1;
    }
    return 0;
}
