#include "mpd/report/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "mpd/causal/causal.hpp"
#include "mpd/eval/paired_eval.hpp"
#include "mpd/lens/lens.hpp"
#include "mpd/model/fixtures.hpp"
#include "mpd/model/model_io.hpp"
#include "mpd/repair/repair.hpp"
#include "mpd/report/artifacts.hpp"
#include "mpd/report/svg.hpp"
#include "mpd/stats/stats.hpp"
#include "mpd/taxonomy/taxonomy.hpp"
#include "mpd/util/csv.hpp"
#include "mpd/util/hash.hpp"
#include "mpd/util/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mpd::report {

MissingStageError::MissingStageError(std::string stage, const fs::path& artifact)
    : Error("missing stage '" + stage + "': " + artifact.string() + " not found"), stage_(std::move(stage)) {}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const MissingStageError*>(&e)) return exit_missing_stage;
    if (dynamic_cast<const DatasetError*>(&e)) return exit_dataset;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const LoadError*>(&e)) return exit_io;
    return exit_failure;
}

json RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["model"] = model;
    j["seed"] = seed;
    j["subset"] = subset;
    j["out"] = out;
    j["tool_version"] = tool_version;
    return j;
}

std::string RunManifest::config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(util::fnv1a(dump_json(to_json()))));
    return buf;
}

namespace {

fs::path out_path(const GlobalOptions& g, const char* name) { return fs::path(g.out) / name; }

void write_manifest(const GlobalOptions& g, std::string command, json inputs) {
    RunManifest m;
    m.command = std::move(command);
    m.inputs = std::move(inputs);
    m.model = g.model;
    m.seed = g.seed;
    m.subset = g.subset;
    m.out = g.out;
    json j = m.to_json();
    j["config_hash"] = m.config_hash();
    write_file(out_path(g, ("manifest." + m.command + ".json").c_str()), dump_json_pretty(j));
}

// Reads an upstream artifact, reporting its absence as a missing stage.
std::vector<json> require_jsonl(const GlobalOptions& g, const char* name, const char* stage) {
    const fs::path p = out_path(g, name);
    if (!fs::exists(p)) throw MissingStageError(stage, p);
    return read_jsonl(p);
}

Model require_model(const GlobalOptions& g) {
    if (g.model.empty()) throw PreconditionError("--model is required for this command");
    return load_model(g.model);
}

std::vector<PerturbationPair> load_pairs(const GlobalOptions& g) {
    std::vector<PerturbationPair> pairs;
    for (const auto& j : require_jsonl(g, files::pairs, "perturb")) pairs.push_back(pair_from_json(j));
    return pairs;
}

std::vector<FlipRecord> load_flips(const GlobalOptions& g) {
    std::vector<FlipRecord> records;
    for (const auto& j : require_jsonl(g, files::flips, "evaluate")) records.push_back(flip_from_json(j));
    return records;
}

EvalSettings load_settings(const GlobalOptions& g) {
    EvalSettings s;
    const fs::path p = out_path(g, files::settings);
    if (!fs::exists(p)) return s;
    try {
        const json j = json::parse(read_file(p));
        s.prompt_template = j.at("prompt_template").get<std::string>();
        s.max_tokens = j.at("max_tokens").get<int>();
    } catch (const json::exception& e) {
        throw IoError(p.string() + ": " + e.what());
    }
    return s;
}

template <typename T, typename Fn>
std::vector<json> to_json_lines(const std::vector<T>& items, Fn&& fn) {
    std::vector<json> lines;
    lines.reserve(items.size());
    for (const auto& it : items) lines.push_back(fn(it));
    return lines;
}

} // namespace

std::vector<Problem> load_corpus(const fs::path& path) {
    std::vector<Problem> corpus;
    for (const auto& j : read_jsonl(path)) corpus.push_back(problem_from_json(j));
    if (corpus.empty()) throw DatasetError("corpus " + path.string() + " is empty");
    std::set<std::string> ids;
    for (const auto& p : corpus)
        if (!ids.insert(p.id).second) throw DatasetError("duplicate problem id " + p.id);
    return corpus;
}

void cmd_perturb(const GlobalOptions& g, const PerturbOptions& o) {
    if (!(o.name_fraction >= 0.0 && o.name_fraction <= 1.0))
        throw PreconditionError("--name-fraction must lie in [0, 1]");
    write_manifest(g, "perturb", {{"corpus", o.corpus}, {"name_fraction", o.name_fraction}});
    const auto corpus = load_corpus(o.corpus);
    DatasetConfig cfg;
    cfg.name_fraction = o.name_fraction;
    cfg.seed = g.seed;
    auto skip_csv = [](const std::vector<Skip>& skips) {
        std::string csv = util::csv_record({"id", "reason"});
        for (const auto& s : skips) csv += util::csv_record({s.id, s.reason});
        return csv;
    };
    Dataset ds;
    try {
        ds = build_pair_dataset(corpus, cfg);
    } catch (const EmptyDatasetError& e) {
        write_file(out_path(g, files::skips), skip_csv(e.skips()));
        throw;
    }
    write_file(out_path(g, files::pairs), to_jsonl(to_json_lines(ds.pairs, pair_to_json)));
    write_file(out_path(g, files::skips), skip_csv(ds.skips));
}

void cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o) {
    const std::string pairs_path = o.pairs.empty() ? out_path(g, files::pairs).string() : o.pairs;
    write_manifest(g, "evaluate",
                   {{"pairs", pairs_path}, {"template_file", o.template_file}, {"max_tokens", o.max_tokens}});
    std::vector<PerturbationPair> pairs;
    if (o.pairs.empty()) {
        pairs = load_pairs(g);
    } else {
        for (const auto& j : read_jsonl(o.pairs)) pairs.push_back(pair_from_json(j));
    }
    const Model model = require_model(g);
    EvalSettings s;
    if (!o.template_file.empty()) s.prompt_template = read_file(o.template_file);
    if (o.max_tokens < 1) throw PreconditionError("--max-tokens must be at least 1");
    s.max_tokens = o.max_tokens;
    render_prompt(s.prompt_template, "");  // rejects a template without the placeholder

    const auto records = evaluate_pairs(model, pairs, s, g.threads);
    write_file(out_path(g, files::settings),
               dump_json_pretty({{"prompt_template", s.prompt_template}, {"max_tokens", s.max_tokens}}));
    write_file(out_path(g, files::flips), to_jsonl(to_json_lines(records, flip_to_json)));
}

void cmd_diagnose(const GlobalOptions& g, const DiagnoseOptions& o) {
    if (!(o.lens || o.patch || o.ablate || o.cai))
        throw PreconditionError("diagnose needs at least one of --lens, --patch, --ablate, --cai");
    write_manifest(g, "diagnose",
                   {{"lens", o.lens}, {"cai", o.cai}, {"patch", o.patch}, {"ablate", o.ablate},
                    {"pairs", out_path(g, files::pairs).string()}});
    const auto pairs = load_pairs(g);
    std::vector<FlipRecord> records;
    if (o.patch || o.ablate) records = load_flips(g);
    const Model model = require_model(g);
    const EvalSettings s = load_settings(g);

    if (o.lens || o.cai) {
        std::vector<DivergenceProfile> profiles(pairs.size());
        util::parallel_for(pairs.size(), g.threads, [&](std::size_t i) {
            const Trace a = forward(model, encode_prompt(render_prompt(s.prompt_template, pairs[i].original.text)));
            const Trace b = forward(model, encode_prompt(render_prompt(s.prompt_template, pairs[i].perturbed_text)));
            profiles[i] = divergence_profile(model, a, b);
            profiles[i].pair_id = pairs[i].original.id;
            if (!o.cai) profiles[i].cai.reset();
        });
        write_file(out_path(g, files::lens), to_jsonl(to_json_lines(profiles, profile_to_json)));
    }

    if (!(o.patch || o.ablate)) return;
    std::map<std::string, const PerturbationPair*> by_id;
    for (const auto& p : pairs) by_id[p.original.id] = &p;
    std::vector<const PerturbationPair*> selected;
    for (const auto& r : records) {
        if (!r.flip) continue;
        if (selected.size() >= g.subset) break;
        auto it = by_id.find(r.pair_id);
        if (it == by_id.end()) throw DatasetError("flip record " + r.pair_id + " has no pair");
        selected.push_back(it->second);
    }

    // Keep results of the stage not rerun this time.
    std::map<std::string, json> previous;
    const fs::path rec_path = out_path(g, files::recovery);
    if (fs::exists(rec_path))
        for (auto& j : read_jsonl(rec_path)) previous[j.at("pair_id").get<std::string>()] = j;

    std::vector<json> lines(selected.size());
    util::parallel_for(selected.size(), g.threads, [&](std::size_t i) {
        const CausalContext ctx = make_causal_context(model, *selected[i], s);
        const std::string& id = selected[i]->original.id;
        std::optional<RecoveryProfile> patch;
        std::optional<ComponentRecoveryProfile> ablation;
        if (o.patch) patch = patch_sweep(ctx);
        if (o.ablate) ablation = ablation_sweep(ctx);
        json j = recovery_to_json(id, patch ? &*patch : nullptr, ablation ? &*ablation : nullptr);
        auto prev = previous.find(id);
        if (prev != previous.end()) {
            if (!o.patch) j["patch_flags"] = prev->second.at("patch_flags");
            if (!o.ablate) {
                j["ablate_attn_flags"] = prev->second.at("ablate_attn_flags");
                j["ablate_mlp_flags"] = prev->second.at("ablate_mlp_flags");
            }
        }
        lines[i] = std::move(j);
    });
    write_file(rec_path, to_jsonl(lines));
}

void cmd_repair(const GlobalOptions& g, const RepairOptions& o) {
    json alphas = json::array();
    for (float a : o.alphas) alphas.push_back(a);
    write_manifest(g, "repair",
                   {{"alphas", alphas}, {"layers", o.layers},
                    {"calibration", o.calibration ? json(*o.calibration) : json(nullptr)}});
    const auto pairs = load_pairs(g);
    const auto records = load_flips(g);
    const Model model = require_model(g);
    const EvalSettings s = load_settings(g);
    if (o.alphas.empty()) throw PreconditionError("--alphas needs at least one value");

    // Calibrate on the last n pairs in dataset order, evaluate on the rest.
    const std::size_t n_cal = o.calibration.value_or(pairs.size() / 2);
    if (n_cal == 0 || n_cal >= pairs.size())
        throw PreconditionError("calibration size must leave both calibration and evaluation pairs");
    const std::size_t n_eval = pairs.size() - n_cal;
    std::vector<PerturbationPair> calibration(pairs.begin() + static_cast<std::ptrdiff_t>(n_eval), pairs.end());
    std::set<std::string> eval_ids;
    for (std::size_t i = 0; i < n_eval; ++i) eval_ids.insert(pairs[i].original.id);
    std::vector<FlipRecord> eval_records;
    for (const auto& r : records)
        if (eval_ids.count(r.pair_id)) eval_records.push_back(r);

    const std::vector<std::string> ids(eval_ids.begin(), eval_ids.end());
    const SteeringSet steering = compute_steering_vectors(model, calibration, s, ids, g.model);
    save_steering(out_path(g, files::steering), steering);
    const auto reports = repair_sweep(model, pairs, eval_records, steering, o.alphas, o.layers, s, g.threads);
    json j;
    j["calibration_ids"] = to_json_lines(calibration, [](const PerturbationPair& p) { return json(p.original.id); });
    j["reports"] = to_json_lines(reports, repair_to_json);
    write_file(out_path(g, files::repair), dump_json_pretty(j));
}

namespace {

struct GroupStats {
    std::vector<double> flip, stable;
};

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string comparison_header() {
    return util::csv_record({"metric", "group_a", "group_b", "mean_a", "mean_b", "n1", "n2", "U", "p", "r", "method"});
}

std::string comparison_row(const std::string& metric, const GroupStats& g, const StatResult& r) {
    return util::csv_record({metric, "flip", "stable", util::format_number(mean(g.flip)),
                             util::format_number(mean(g.stable)), std::to_string(r.n1), std::to_string(r.n2),
                             util::format_number(r.U), util::format_number(r.p_two_sided),
                             util::format_number(r.r_rank_biserial), std::string(to_string(r.method))});
}

} // namespace

ReportSummary cmd_report(const GlobalOptions& g) {
    write_manifest(g, "report", {{"artifacts", g.out}});
    ReportSummary out;
    const fs::path dir = fs::path(g.out) / files::report_dir;
    auto emit = [&](const std::string& name, const std::string& contents) {
        write_file(dir / name, contents);
        out.written.push_back(name);
    };
    auto try_load = [&](const char* name) -> std::optional<std::vector<json>> {
        const fs::path p = out_path(g, name);
        if (!fs::exists(p)) {
            out.missing.push_back(name);
            return std::nullopt;
        }
        return read_jsonl(p);
    };

    std::vector<FlipRecord> flips;
    std::vector<DivergenceProfile> lens;
    std::vector<RecoveryProfile> patch;
    std::vector<ComponentRecoveryProfile> ablation;
    const auto flip_lines = try_load(files::flips);
    const auto lens_lines = try_load(files::lens);
    const auto rec_lines = try_load(files::recovery);
    if (flip_lines)
        for (const auto& j : *flip_lines) flips.push_back(flip_from_json(j));
    if (lens_lines)
        for (const auto& j : *lens_lines) lens.push_back(profile_from_json(j));
    if (rec_lines)
        for (const auto& j : *rec_lines) {
            if (auto p = patch_profile_from_json(j)) patch.push_back(std::move(*p));
            if (auto a = component_profile_from_json(j)) ablation.push_back(std::move(*a));
        }

    if (flip_lines) {
        const RateTable rates = flip_rate(flips, GroupBy::ptype);
        std::string csv = util::csv_record({"group", "flips", "denominator", "rate"});
        for (const auto& r : rates.rows)
            csv += util::csv_record({r.group, std::to_string(r.flips), std::to_string(r.denominator),
                                     util::format_number(r.rate)});
        emit("table1_flip_rates.csv", csv);
        for (const auto& w : rates.warnings) out.notes.push_back("flip rates: " + w);
    }

    std::map<std::string, bool> is_flip;
    for (const auto& r : flips) is_flip[r.pair_id] = r.flip;

    if (flip_lines && lens_lines) {
        GroupStats l0, cai, final_delta;
        std::vector<double> cai_scores, l0_scores;
        std::vector<bool> cai_labels, l0_labels;
        std::vector<std::vector<double>> traj_flip, traj_stable;
        for (const auto& p : lens) {
            auto it = is_flip.find(p.pair_id);
            if (it == is_flip.end()) continue;
            const bool f = it->second;
            (f ? traj_flip : traj_stable).push_back(p.delta);
            if (p.first_divergence) {
                (f ? l0.flip : l0.stable).push_back(*p.first_divergence);
                l0_scores.push_back(-static_cast<double>(*p.first_divergence));
                l0_labels.push_back(f);
            }
            if (p.cai) {
                (f ? cai.flip : cai.stable).push_back(*p.cai);
                cai_scores.push_back(*p.cai);
                cai_labels.push_back(f);
            }
        }

        std::string table2 = comparison_header(), table6 = comparison_header(), stats = stats_csv_header();
        auto compare = [&](const std::string& metric, const GroupStats& gs, std::string& table) {
            if (gs.flip.empty() || gs.stable.empty()) {
                out.notes.push_back(metric + ": comparison skipped, a group has no samples (flip " +
                                    std::to_string(gs.flip.size()) + ", stable " + std::to_string(gs.stable.size()) +
                                    ")");
                return;
            }
            const StatResult r = mann_whitney_u(gs.flip, gs.stable);
            table += comparison_row(metric, gs, r);
            stats += stats_csv_row(metric, "flip", "stable", r);
        };
        compare("first_divergence_layer", l0, table2);
        emit("table2_first_divergence.csv", table2);
        bool any_cai = false;
        for (const auto& p : lens) any_cai = any_cai || p.cai.has_value();
        if (any_cai) {
            compare("cai", cai, table6);
            emit("table6_cai.csv", table6);
            std::string auc = util::csv_record({"predictor", "score", "auc", "positives", "negatives"});
            auto add_auc = [&](const std::string& name, const std::string& score, const std::vector<double>& xs,
                               const std::vector<bool>& ys) {
                const auto pos = static_cast<std::size_t>(std::count(ys.begin(), ys.end(), true));
                if (pos == 0 || pos == ys.size()) {
                    out.notes.push_back("auc " + name + ": needs both flipped and stable samples");
                    return;
                }
                const AucResult r = roc_auc(xs, ys);
                auc += util::csv_record({name, score, util::format_number(r.auc), std::to_string(r.positives),
                                         std::to_string(r.negatives)});
            };
            add_auc("cai", "cai", cai_scores, cai_labels);
            add_auc("first_divergence_layer", "-l0", l0_scores, l0_labels);
            emit("table6_auc.csv", auc);
        } else {
            out.notes.push_back("cai: no sample has a defined CAI (needs diagnose --cai and l0 < L)");
        }
        emit("stats.csv", stats);

        auto mean_curve = [](const std::vector<std::vector<double>>& rows) {
            std::vector<double> m;
            if (rows.empty()) return m;
            m.assign(rows.front().size(), 0.0);
            for (const auto& r : rows)
                for (std::size_t i = 0; i < m.size() && i < r.size(); ++i) m[i] += r[i];
            for (double& v : m) v /= static_cast<double>(rows.size());
            return m;
        };
        std::vector<Series> series;
        std::string note;
        if (!traj_flip.empty()) series.push_back({"flip (n=" + std::to_string(traj_flip.size()) + ")", mean_curve(traj_flip), "#d62728"});
        else note = "no flipped samples; flip line omitted";
        if (!traj_stable.empty())
            series.push_back({"stable (n=" + std::to_string(traj_stable.size()) + ")", mean_curve(traj_stable), "#1f77b4"});
        else note = "no stable samples; stable line omitted";
        if (!note.empty()) out.notes.push_back("trajectory: " + note);
        {
            const auto mf = mean_curve(traj_flip), ms = mean_curve(traj_stable);
            std::string csv = util::csv_record({"layer", "mean_delta_flip", "mean_delta_stable"});
            for (std::size_t l = 0; l < std::max(mf.size(), ms.size()); ++l)
                csv += util::csv_record({std::to_string(l), l < mf.size() ? util::format_number(mf[l]) : "",
                                         l < ms.size() ? util::format_number(ms[l]) : ""});
            emit("trajectory.csv", csv);
        }
        emit("trajectory.svg", line_plot_svg("Mean layer-wise JSD, flipped vs stable", "layer", "mean JSD (bits)",
                                             series, note));
    }

    if (rec_lines) {
        std::string csv = util::csv_record({"method", "recovered", "n", "rate", "mean_layers", "mean_first"});
        for (const auto& r : summarize_recovery(patch, ablation))
            csv += util::csv_record({r.method, std::to_string(r.recovered), std::to_string(r.n),
                                     util::format_number(r.rate), util::format_number(r.mean_layers),
                                     util::format_number(r.mean_first)});
        emit("table3_4_recovery.csv", csv);
    }

    if (flip_lines && rec_lines) {
        if (patch.empty() || ablation.empty()) {
            out.notes.push_back("taxonomy: needs both patch and ablation results");
        } else {
            try {
                const FailureProfile fp = summarize_model(flips, patch, ablation, lens);
                const TaxonomyLabel label = classify(fp);
                emit("table8_taxonomy.csv", taxonomy_csv_header() + taxonomy_csv_row(g.model, fp, label));
                emit("taxonomy.json", dump_json_pretty(taxonomy_to_json(fp, label)));
            } catch (const PreconditionError& e) {
                out.notes.push_back(std::string("taxonomy: ") + e.what());
            }
        }
    }

    const fs::path repair_path = out_path(g, files::repair);
    if (fs::exists(repair_path)) {
        const json j = json::parse(read_file(repair_path));
        std::string csv = repair_csv_header();
        for (const auto& r : j.at("reports")) csv += repair_csv_row(repair_from_json(r));
        emit("table7_repair.csv", csv);
    } else {
        out.missing.push_back(files::repair);
    }

    std::string notes;
    for (const auto& m : out.missing) notes += "missing: " + m + "\n";
    for (const auto& n : out.notes) notes += "note: " + n + "\n";
    emit("notes.txt", notes);
    return out;
}

void cmd_toy(const GlobalOptions& g, const ToyOptions& o) {
    if (g.model.empty()) throw PreconditionError("--model is required: where to write the toy model");
    FixtureSpec spec;
    spec.name = o.fixture;
    spec.num_layers = o.num_layers;
    spec.layer = o.layer;
    spec.seed = g.seed;
    spec.triggers = o.triggers;
    spec.wrong_digit = o.wrong_digit;
    save_model(g.model, build_toy_model(spec).model);
}

} // namespace mpd::report
