// Acceptance runner: one PASS/FAIL line per criterion. Tolerances are pinned
// here and nowhere else.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mpd/causal/causal.hpp"
#include "mpd/lens/lens.hpp"
#include "mpd/model/fixture_cases.hpp"
#include "mpd/repair/repair.hpp"
#include "mpd/report/artifacts.hpp"
#include "mpd/stats/stats.hpp"
#include "mpd/taxonomy/taxonomy.hpp"
#include "support.hpp"

using namespace mpd;
namespace fs = std::filesystem;

namespace {

constexpr double kResidualTol = 1e-4;
constexpr double kEngineSeconds = 10.0;
constexpr double kJsdTol = 1e-9;
constexpr double kStatsTol = 1e-12;
constexpr double kPipelineSeconds = 60.0;

struct Verdict {
    bool pass = true;
    std::vector<std::string> failures;
    std::string detail;

    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (failures.size() < 5) failures.push_back(what);
        pass = false;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// 1. Engine soundness.
Verdict engine_soundness() {
    Verdict v;
    const auto t0 = Clock::now();
    util::Rng rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const ModelConfig c = testing::random_config(rng);
        const Model m = random_model(c, rng.next());
        const Trace tr = forward(m, testing::random_tokens(rng, 1 + rng.index(16), c.vocab_size));
        worst = std::max(worst, testing::residual_error(tr));
    }
    v.expect(worst <= kResidualTol, "residual error " + fmt(worst));

    const ToyModel copy = build_toy_model({.name = "copy-head"});
    v.expect(generate_greedy(copy.model, "ab", 1).text == "b", "copy-head did not emit 'b'");
    v.expect(argmax(forward(copy.model, TokenSeq{kBosToken, '7'}).logits.row(1)) == '7', "copy-head did not copy '7'");
    const double secs = seconds_since(t0);
    v.expect(secs < kEngineSeconds, "took " + fmt(secs) + " s");
    v.detail = "worst residual " + fmt(worst) + ", " + fmt(secs) + " s";
    return v;
}

// 2. Logit-lens consistency.
Verdict lens_consistency() {
    Verdict v;
    util::Rng rng(2002);
    for (int i = 0; i < 50; ++i) {
        const ModelConfig c = testing::random_config(rng);
        const Model m = random_model(c, rng.next());
        const Trace tr = forward(m, testing::random_tokens(rng, 1 + rng.index(12), c.vocab_size));
        for (std::size_t t = 0; t < tr.seq_len(); ++t)
            v.expect(logit_lens(m, tr, c.num_layers, t) == softmax(tr.logits.row(t)),
                     "model " + std::to_string(i) + " position " + std::to_string(t));
    }

    ModelConfig c;
    c.num_layers = 1;
    c.d_model = 8;
    c.num_heads = 2;
    Model m = random_model(c, 5);
    std::fill(m.weights.final_norm_weight.begin(), m.weights.final_norm_weight.end(), 1.0f);
    Trace zero;
    zero.hidden.assign(2, Matrix(1, 8));
    zero.attn_out.assign(1, Matrix(1, 8));
    zero.mlp_out.assign(1, Matrix(1, 8));
    zero.logits = Matrix(1, static_cast<std::size_t>(c.vocab_size));
    for (double p : logit_lens(m, zero, 1, 0))
        v.expect(std::abs(p - 1.0 / c.vocab_size) <= 1e-15, "zero vector is not uniform");
    v.detail = "50 models exact, uniform case";
    return v;
}

double jsd_oracle(const std::vector<double>& p, const std::vector<double>& q) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const long double m = (static_cast<long double>(p[i]) + q[i]) / 2.0L;
        if (p[i] > 0) total += 0.5L * p[i] * std::log2(p[i] / m);
        if (q[i] > 0) total += 0.5L * q[i] * std::log2(q[i] / m);
    }
    return static_cast<double>(total);
}

std::vector<double> random_distribution(util::Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double s = 0;
    for (auto& x : p) s += (x = rng.index(5) == 0 ? 0.0 : rng.unit());
    if (s == 0) p[0] = s = 1.0;
    for (auto& x : p) x /= s;
    return p;
}

// 3. JSD and CAI.
Verdict jsd_cai() {
    Verdict v;
    util::Rng rng(3003);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + rng.index(300);
        const auto p = random_distribution(rng, n), q = random_distribution(rng, n);
        worst = std::max(worst, std::abs(jsd(p, q) - jsd_oracle(p, q)));
    }
    v.expect(worst <= kJsdTol, "jsd error " + fmt(worst));

    v.expect(cascading_amplification(std::vector<double>{0, 0.1, 0.2, 0.3}, 0) == 1.0, "CAI rising != 1");
    v.expect(cascading_amplification(std::vector<double>{0.4, 0.3, 0.2, 0.1}, 0) == 0.0, "CAI falling != 0");
    v.expect(cascading_amplification(std::vector<double>{0, 0.1, 0.3, 0.2, 0.4}, 1) == 2.0 / 3.0, "CAI mixed != 2/3");

    for (int i = 0; i < 1000; ++i) {
        std::vector<double> delta(2 + rng.index(40));
        for (auto& d : delta) d = rng.unit();
        const int l0 = static_cast<int>(rng.index(delta.size() - 1));
        const auto cai = cascading_amplification(delta, l0);
        v.expect(cai && *cai >= 0.0 && *cai <= 1.0, "CAI out of [0,1]");
    }
    v.detail = "worst jsd error " + fmt(worst);
    return v;
}

double pair_u(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double a : x)
        for (double b : y) u += a < b ? 1.0 : (a == b ? 0.5 : 0.0);
    return u;
}

// U for every relabeling of the pool, indexed by bitmask (bit set: group x).
std::vector<double> all_relabelings(const std::vector<double>& pool) {
    std::vector<double> u(1u << pool.size());
    for (unsigned mask = 0; mask < u.size(); ++mask) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < pool.size(); ++i) (mask & (1u << i) ? a : b).push_back(pool[i]);
        u[mask] = pair_u(a, b);
    }
    return u;
}

// 4. Statistics oracles.
Verdict stats_oracles() {
    Verdict v;
    util::Rng rng(4004);
    std::size_t checked = 0;
    // Every split of every pool with n1 + n2 <= 10, with and without ties.
    for (std::size_t n = 2; n <= 10; ++n) {
        for (int levels : {1000, 3}) {
            std::vector<double> pool(n);
            for (auto& x : pool) x = static_cast<double>(rng.index(static_cast<std::uint64_t>(levels)));
            const auto u = all_relabelings(pool);
            for (unsigned mask = 1; mask + 1 < u.size(); ++mask) {
                const auto n1 = static_cast<std::size_t>(__builtin_popcount(mask));
                const double centre = static_cast<double>(n1 * (n - n1)) / 2.0;
                std::size_t hits = 0, total = 0;
                for (unsigned other = 0; other < u.size(); ++other) {
                    if (static_cast<std::size_t>(__builtin_popcount(other)) != n1) continue;
                    ++total;
                    hits += std::abs(u[other] - centre) >= std::abs(u[mask] - centre) - 1e-9;
                }
                std::vector<double> x, y;
                for (std::size_t i = 0; i < n; ++i) (mask & (1u << i) ? x : y).push_back(pool[i]);
                const StatResult r = mann_whitney_u(x, y, TestMethod::exact);
                v.expect(std::abs(r.p_two_sided - static_cast<double>(hits) / static_cast<double>(total)) <= kStatsTol,
                         "p mismatch at n1=" + std::to_string(n1) + " n2=" + std::to_string(n - n1));
                v.expect(std::abs(r.r_rank_biserial - (1.0 - 2.0 * r.U / (2.0 * centre))) <= kStatsTol, "r identity");
                ++checked;
            }
        }
    }

    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + rng.index(60);
        std::vector<double> s(n);
        std::vector<bool> l(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = static_cast<double>(rng.index(i % 2 ? 6 : 100000));
            l[k] = rng.index(2) == 1;
        }
        l[0] = true;
        l[1] = false;
        double wins = 0, pairs = 0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (l[a] && !l[b]) pairs += 1, wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
        v.expect(std::abs(roc_auc(s, l).auc - wins / pairs) <= kStatsTol, "AUC mismatch");
    }
    v.expect(rank_biserial(0, 4, 5) == 1.0, "r(0) != 1");
    v.expect(rank_biserial(10, 4, 5) == 0.0, "r(n1n2/2) != 0");
    v.expect(rank_biserial(20, 4, 5) == -1.0, "r(n1n2) != -1");
    v.detail = std::to_string(checked) + " exact splits, 1000 AUC sets";
    return v;
}

// 5. Causal sweeps.
Verdict causal_sweeps() {
    Verdict v;
    util::Rng rng(5005);
    const EvalSettings s;
    for (int i = 0; i < 20; ++i) {
        const int L = 3 + static_cast<int>(rng.index(4));
        const int k = 2 + static_cast<int>(rng.index(static_cast<std::uint64_t>(L - 2)));
        const int gold = 1 + static_cast<int>(rng.index(9));
        const int wrong = (gold + 1 + static_cast<int>(rng.index(9))) % 10;
        const ToyModel toy = build_toy_model(
            {.name = "planted-localized", .num_layers = L, .layer = k, .seed = rng.next(), .wrong_digit = wrong});
        const auto pair = fixture_pair(toy, "loc", gold, rng.index(64));
        const std::string tag = "L=" + std::to_string(L) + " k=" + std::to_string(k);
        const CausalContext ctx = make_causal_context(toy.model, pair, s);
        if (!ctx.is_flip()) {
            v.expect(false, tag + " fixture is not a flip");
            continue;
        }
        const RecoveryProfile p = patch_sweep(ctx);
        for (int l = 1; l <= L; ++l)
            v.expect(p.flags[static_cast<std::size_t>(l - 1)] == (l == k), tag + " layer " + std::to_string(l));
    }

    for (int seed = 0; seed < 5; ++seed) {
        const ToyModel toy = build_toy_model({.name = "planted-redundant", .num_layers = 4, .layer = 2,
                                              .seed = static_cast<std::uint64_t>(seed), .wrong_digit = 0});
        const auto p = patch_sweep(toy.model, fixture_pair(toy, "red", 1 + seed, static_cast<std::uint64_t>(seed)), s);
        v.expect(!p.recovered_any, "planted-redundant recovered");
    }

    for (int i = 0; i < 10; ++i) {
        ModelConfig c = testing::random_config(rng);
        Model m = random_model(c, rng.next());
        const int l = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(c.num_layers)));
        auto& lw = m.weights.layers[static_cast<std::size_t>(l - 1)];
        std::fill(lw.w_down.data.begin(), lw.w_down.data.end(), 0.0f);
        std::fill(lw.wo.data.begin(), lw.wo.data.end(), 0.0f);
        const TokenSeq toks = testing::random_tokens(rng, 1 + rng.index(10), c.vocab_size);
        const Trace base = forward(m, toks);
        for (Component comp : {Component::attn, Component::mlp}) {
            const Intervention iv = Intervention::ablate(l, comp);
            v.expect(forward(m, toks, std::span(&iv, 1)).logits == base.logits, "zero sublayer ablation changed logits");
        }
    }
    v.detail = "20 localized instantiations, 5 redundant, 10 zero-sublayer models";
    return v;
}

// 6. Taxonomy fidelity.
Verdict taxonomy_fidelity() {
    Verdict v;
    const auto distributed_row = classify(make_failure_profile(0.451, 3.0 / 60, 0.45, 0.35));
    const auto localized_row = classify(make_failure_profile(0.335, 43.0 / 60, 0.75, 0.77));
    const auto entangled_row = classify(make_failure_profile(0.288, 0.0 / 60, 0.40, 0.48));
    v.expect(distributed_row.label == Label::distributed, "45%/35% row not Distributed");
    v.expect(localized_row.label == Label::localized, "43/60 row not Localized");
    v.expect(entangled_row.label == Label::entangled, "0/60 row not Entangled");
    for (double r : {0.1, 0.25, 0.5})
        v.expect(classify(make_failure_profile(0, r, 0.6, 0.2)).label == Label::unclassified, "gap input classified");
    v.expect(classify(make_failure_profile(0, 0.02, 0.3, 0.3)).label == Label::unclassified, "tie input classified");
    v.detail = "Distributed/Localized/Entangled, gap and tie Unclassified";
    return v;
}

// 7. Repair contracts.
Verdict repair_contracts() {
    Verdict v;
    const EvalSettings s;
    util::Rng rng(7007);
    for (const char* name : {"copy-head", "planted-localized", "planted-redundant", "planted-offset", "planted-mlp"}) {
        const ToyModel toy = build_toy_model({.name = name, .num_layers = 4, .layer = 2, .seed = 3, .wrong_digit = 0});
        PerturbationPair pair = toy.triggers.empty() ? PerturbationPair{} : fixture_pair(toy, "a", 4);
        if (toy.triggers.empty()) {
            pair.original = {"a", "Bo has 4", Rational(4)};
            pair.perturbed_text = "Al has 4";
        }
        SteeringSet st;
        for (int l = 0; l < toy.model.config.num_layers; ++l) {
            std::vector<float> dir(static_cast<std::size_t>(toy.model.config.d_model));
            for (auto& x : dir) x = static_cast<float>(rng.uniform(-3, 3));
            st.vectors.push_back(dir);
        }
        const std::string prompt = render_prompt(s.prompt_template, pair.perturbed_text);
        std::vector<Intervention> zero;
        for (int l = 1; l <= toy.model.config.num_layers; ++l)
            zero.push_back(Intervention::steer(l, st.vectors[static_cast<std::size_t>(l - 1)], 0.0f));
        const auto base = generate_greedy(toy.model, prompt, s.max_tokens, {}, true);
        const auto steered = generate_greedy(toy.model, prompt, s.max_tokens, zero, true);
        bool same = base.generated == steered.generated && base.prompt_trace->logits == steered.prompt_trace->logits;
        for (std::size_t l = 0; l < base.prompt_trace->hidden.size(); ++l)
            same = same && base.prompt_trace->hidden[l] == steered.prompt_trace->hidden[l];
        v.expect(same, std::string(name) + ": alpha 0 changed the run");
        v.expect(apply_steering(toy.model, pair, st, 0.0f, {}, s).completion == base.text,
                 std::string(name) + ": apply_steering at alpha 0 differs");
    }

    const ToyModel offset =
        build_toy_model({.name = "planted-offset", .num_layers = 3, .layer = 2, .seed = 11, .wrong_digit = 0});
    std::vector<PerturbationPair> calib, batch;
    for (int i = 0; i < 3; ++i) calib.push_back(fixture_pair(offset, "cal" + std::to_string(i), 1 + i, 40u + i));
    for (int i = 0; i < 10; ++i) batch.push_back(fixture_pair(offset, "f" + std::to_string(i), 1 + i % 9, static_cast<std::uint64_t>(i)));
    for (int i = 0; i < 20; ++i)
        batch.push_back(stable_fixture_pair(offset, "s" + std::to_string(i), 1 + i % 9, static_cast<std::uint64_t>(i)));
    const SteeringSet st = compute_steering_vectors(offset.model, calib, s);
    const std::vector<int> planted{2};
    for (int i = 0; i < 10; ++i)
        v.expect(apply_steering(offset.model, batch[static_cast<std::size_t>(i)], st, 1.0f, planted, s).recovered,
                 "offset fixture not recovered at alpha 1 (" + batch[static_cast<std::size_t>(i)].original.id + ")");

    const auto records = evaluate_pairs(offset.model, batch, s);
    const std::vector<float> alphas{0.0f, 0.5f, 1.0f};
    for (const auto& r : repair_sweep(offset.model, batch, records, st, alphas, planted, s)) {
        std::map<RepairOutcome, std::size_t> n;
        std::set<std::string> ids;
        for (const auto& [id, o] : r.samples) ++n[o], ids.insert(id);
        const bool ok = r.samples.size() == 30 && ids.size() == 30 && r.flipped_n == 10 && r.stable_n == 20 &&
                        n[RepairOutcome::recovered] + n[RepairOutcome::still_wrong] == r.flipped_n &&
                        n[RepairOutcome::still_correct] + n[RepairOutcome::regressed] == r.stable_n &&
                        n[RepairOutcome::recovered] == r.recovered && n[RepairOutcome::regressed] == r.regressed;
        v.expect(ok, "partition broken at alpha " + fmt(r.alpha));
        if (r.alpha == 0.0f) v.expect(r.recovered == 0 && r.regressed == 0, "alpha 0 changed outcomes");
    }
    v.detail = "5 fixtures at alpha 0, offset oracle vector, 30-sample partition";
    return v;
}

int run(const fs::path& cwd, const std::string& args) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" MPD_CLI_PATH "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = report::read_file(e.path());
    return files;
}

// 8. Pipeline determinism.
Verdict pipeline_determinism() {
    Verdict v;
    const auto t0 = Clock::now();
    const fs::path base = testing::scratch_dir("acceptance-pipeline");
    const std::string corpus = (fs::path(MPD_DATA_DIR) / "corpus20.jsonl").string();
    const std::vector<std::string> steps{
        "--model toy.mpdw --seed 7 toy --fixture planted-offset --num-layers 2 --layer 2 --triggers 'zZ%'",
        "--model toy.mpdw --out run --seed 7 perturb --corpus '" + corpus + "'",
        "--model toy.mpdw --out run --seed 7 evaluate",
        "--model toy.mpdw --out run --seed 7 diagnose --lens --cai --patch --ablate",
        "--model toy.mpdw --out run --seed 7 repair",
        "--model toy.mpdw --out run --seed 7 report",
    };
    std::vector<std::map<std::string, std::string>> snaps;
    for (const char* name : {"a", "b"}) {
        const fs::path dir = base / name;
        fs::create_directories(dir);
        for (const auto& step : steps) v.expect(run(dir, step) == 0, std::string("run ") + name + " failed: " + step);
        snaps.push_back(snapshot(dir));
    }
    v.expect(snaps[0].size() > 10, "too few artifacts: " + std::to_string(snaps[0].size()));
    v.expect(snaps[0].count("run/report/table8_taxonomy.csv") == 1, "taxonomy table missing");
    v.expect(snaps[0].count("run/report/table3_4_recovery.csv") == 1, "recovery table missing");
    for (const auto& [path, bytes] : snaps[0]) {
        auto it = snaps[1].find(path);
        v.expect(it != snaps[1].end() && it->second == bytes, "differs: " + path);
    }
    v.expect(snaps[0].size() == snaps[1].size(), "file sets differ");
    const double secs = seconds_since(t0);
    v.expect(secs < kPipelineSeconds, "took " + fmt(secs) + " s");
    v.detail = std::to_string(snaps[0].size()) + " files identical, " + fmt(secs) + " s";
    return v;
}

// 9. Perturbation integrity.
Verdict perturbation_integrity() {
    Verdict v;
    std::vector<Problem> corpus;
    for (const auto& j : report::read_jsonl(fs::path(MPD_DATA_DIR) / "corpus20.jsonl"))
        corpus.push_back(problem_from_json(j));
    std::size_t pairs = 0;
    for (std::uint64_t seed : {0u, 7u, 99u})
        for (double f : {0.0, 0.5, 1.0}) {
            try {
                const Dataset d = build_pair_dataset(corpus, {.name_fraction = f, .seed = seed});
                for (const auto& p : d.pairs) {
                    const auto rep = validate_pair(p);
                    v.expect(rep.ok(), p.original.id + ": " + (rep.ok() ? "" : rep.violations.front()));
                    ++pairs;
                }
            } catch (const EmptyDatasetError&) {
                v.expect(false, "empty dataset at fraction " + fmt(f));
            }
        }
    const auto amb = paraphrase_numbers({"amb", "It costs $5 dollars", Rational(5)});
    v.expect(std::holds_alternative<Skip>(amb) && std::get<Skip>(amb).reason == "ambiguous",
             "\"$5 dollars\" not skipped as ambiguous");
    v.detail = std::to_string(pairs) + " pairs valid, ambiguity skipped";
    return v;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"engine soundness", engine_soundness},       {"logit-lens consistency", lens_consistency},
        {"JSD/CAI correctness", jsd_cai},             {"statistics oracles", stats_oracles},
        {"causal sweeps", causal_sweeps},             {"taxonomy fidelity", taxonomy_fidelity},
        {"repair contracts", repair_contracts},       {"pipeline determinism", pipeline_determinism},
        {"perturbation integrity", perturbation_integrity},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.expect(false, std::string("exception: ") + e.what());
        }
        std::printf("criterion %zu: %s  %s (%s)\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    v.detail.c_str());
        for (const auto& f : v.failures) std::printf("    %s\n", f.c_str());
        failed += !v.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
