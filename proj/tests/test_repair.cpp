#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mpd/model/fixture_cases.hpp"
#include "mpd/repair/repair.hpp"
#include "support.hpp"

using namespace mpd;

namespace {

ToyModel offset_toy() {
    return build_toy_model({.name = "planted-offset", .num_layers = 3, .layer = 2, .seed = 11, .wrong_digit = 0});
}

// h^(l)_orig - h^(l)_pert at the last prompt position, straight from two traces.
std::vector<std::vector<double>> raw_difference(const Model& m, const PerturbationPair& p, const EvalSettings& s) {
    const Trace a = forward(m, encode_prompt(render_prompt(s.prompt_template, p.original.text)));
    const Trace b = forward(m, encode_prompt(render_prompt(s.prompt_template, p.perturbed_text)));
    std::vector<std::vector<double>> out;
    for (int l = 1; l <= m.config.num_layers; ++l) {
        auto x = a.hidden_at(l, a.seq_len() - 1);
        auto y = b.hidden_at(l, b.seq_len() - 1);
        std::vector<double> d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d[i] = static_cast<double>(x[i]) - y[i];
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<PerturbationPair> flip_pairs(const ToyModel& toy, const std::string& prefix, int n, int offset = 0) {
    std::vector<PerturbationPair> out;
    for (int i = 0; i < n; ++i)
        out.push_back(fixture_pair(toy, prefix + std::to_string(i), 1 + (i + offset) % 9, static_cast<std::uint64_t>(i + offset)));
    return out;
}

} // namespace

TEST_SUITE("repair") {

TEST_CASE("steering vectors are mean differences") {
    const ToyModel toy = offset_toy();
    const EvalSettings s;
    auto same = fixture_pair(toy, "z", 3);
    same.perturbed_text = same.original.text;
    for (const auto& v : compute_steering_vectors(toy.model, std::vector{same}, s).vectors)
        CHECK(std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; }));

    const auto pairs = flip_pairs(toy, "c", 4);
    const auto d0 = raw_difference(toy.model, pairs[0], s);
    const auto d1 = raw_difference(toy.model, pairs[1], s);
    const auto one = compute_steering_vectors(toy.model, std::span(pairs).first(1), s);
    const auto two = compute_steering_vectors(toy.model, std::span(pairs).first(2), s);
    REQUIRE(one.num_layers() == 3);
    CHECK(two.calibration_count == 2);
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t i = 0; i < d0[l].size(); ++i) {
            CHECK(one.vectors[l][i] == static_cast<float>(d0[l][i]));
            CHECK(two.vectors[l][i] == doctest::Approx((d0[l][i] + d1[l][i]) / 2).epsilon(1e-6));
        }

    // A u B versus the size-weighted average of A and B.
    const auto a = compute_steering_vectors(toy.model, std::span(pairs).first(1), s);
    const auto b = compute_steering_vectors(toy.model, std::span(pairs).subspan(1), s);
    const auto ab = compute_steering_vectors(toy.model, pairs, s);
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t i = 0; i < ab.vectors[l].size(); ++i)
            CHECK(std::abs(ab.vectors[l][i] - (1.0 * a.vectors[l][i] + 3.0 * b.vectors[l][i]) / 4.0) < 1e-6);
}

TEST_CASE("steering input errors") {
    const ToyModel toy = offset_toy();
    const auto pairs = flip_pairs(toy, "c", 2);
    const std::vector<std::string> eval{"c1"};
    CHECK_THROWS_AS(compute_steering_vectors(toy.model, pairs, EvalSettings{}, eval), PreconditionError);
    CHECK_THROWS_AS(compute_steering_vectors(toy.model, std::span<const PerturbationPair>{}, EvalSettings{}),
                    PreconditionError);
    const auto st = compute_steering_vectors(toy.model, pairs, EvalSettings{});
    const std::vector<int> bad{4};
    CHECK_THROWS_AS(apply_steering(toy.model, pairs[0], st, 1.0f, bad, EvalSettings{}), PreconditionError);
    CHECK_THROWS_AS(apply_steering(toy.model, pairs[0], st, NAN, {}, EvalSettings{}), PreconditionError);
}

TEST_CASE("zero alpha is bit-identical to the unsteered run") {
    util::Rng rng(3);
    const EvalSettings s;
    for (int i = 0; i < 5; ++i) {
        ModelConfig c = testing::random_config(rng);
        c.max_seq_len = 256;
        const Model m = random_model(c, 100 + static_cast<std::uint64_t>(i));
        PerturbationPair p;
        p.original.id = "r";
        p.original.text = "Ann has 3 cats";
        p.perturbed_text = "Bea has 3 cats";
        SteeringSet st;
        for (int l = 0; l < m.config.num_layers; ++l) {
            std::vector<float> v(static_cast<std::size_t>(m.config.d_model));
            for (auto& x : v) x = static_cast<float>(rng.uniform(-5, 5));
            st.vectors.push_back(v);
        }
        const auto prompt = encode_prompt(render_prompt(s.prompt_template, p.perturbed_text));
        std::vector<Intervention> zero;
        for (int l = 1; l <= m.config.num_layers; ++l) zero.push_back(Intervention::steer(l, st.vectors[static_cast<std::size_t>(l - 1)], 0.0f));
        const Trace base = forward(m, prompt);
        const Trace steered = forward(m, prompt, zero);
        CHECK(base.logits.data == steered.logits.data);
        for (int l = 0; l <= m.config.num_layers; ++l)
            CHECK(base.hidden[static_cast<std::size_t>(l)].data == steered.hidden[static_cast<std::size_t>(l)].data);
        const auto g = generate_greedy(m, render_prompt(s.prompt_template, p.perturbed_text), s.max_tokens);
        CHECK(apply_steering(m, p, st, 0.0f, {}, s).completion == g.text);
    }
}

TEST_CASE("oracle vector repairs the offset fixture") {
    const ToyModel toy = offset_toy();
    const EvalSettings s;
    const auto calib = flip_pairs(toy, "cal", 3);
    const auto eval = flip_pairs(toy, "ev", 6, 3);
    const auto st = compute_steering_vectors(toy.model, calib, s);
    const std::vector<int> planted{2};
    for (const auto& p : eval) {
        CHECK_FALSE(evaluate_pair(toy.model, p, s).correct_pert);
        CHECK(apply_steering(toy.model, p, st, 1.0f, planted, s).recovered);
    }
}

TEST_CASE("sweep partitions a 30-sample batch") {
    const ToyModel toy = offset_toy();
    const EvalSettings s;
    std::vector<PerturbationPair> pairs = flip_pairs(toy, "f", 10);
    for (int i = 0; i < 20; ++i)
        pairs.push_back(stable_fixture_pair(toy, "s" + std::to_string(i), 1 + i % 9, static_cast<std::uint64_t>(i)));
    const auto records = evaluate_pairs(toy.model, pairs, s);
    const auto st = compute_steering_vectors(toy.model, flip_pairs(toy, "cal", 2, 5), s);
    const std::vector<float> alphas{0.0f, 0.5f, 1.0f};
    const std::vector<int> planted{2};
    const auto reports = repair_sweep(toy.model, pairs, records, st, alphas, planted, s, 2);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].recovered == 0);
    CHECK(reports[0].regressed == 0);
    for (const auto& r : reports) {
        CAPTURE(r.alpha);
        CHECK(r.flipped_n == 10);
        CHECK(r.stable_n == 20);
        REQUIRE(r.samples.size() == 30);
        std::set<std::string> ids;
        std::size_t rec = 0, wrong = 0, kept = 0, reg = 0, hand = 0;
        for (std::size_t i = 0; i < r.samples.size(); ++i) {
            const auto& [id, o] = r.samples[i];
            ids.insert(id);
            rec += o == RepairOutcome::recovered;
            wrong += o == RepairOutcome::still_wrong;
            kept += o == RepairOutcome::still_correct;
            reg += o == RepairOutcome::regressed;
            hand += apply_steering(toy.model, pairs[i], st, r.alpha, planted, s).recovered != records[i].correct_pert &&
                    records[i].flip;
        }
        CHECK(ids.size() == 30);
        CHECK(rec + wrong == r.flipped_n);
        CHECK(kept + reg == r.stable_n);
        CHECK(rec == r.recovered);
        CHECK(hand == r.recovered);
        CHECK(reg == r.regressed);
        CHECK(r.rate == doctest::Approx(static_cast<double>(rec) / 10.0));
        CHECK(r.net_rate == doctest::Approx((static_cast<double>(rec) - static_cast<double>(reg)) / 10.0));
    }

    // Input order does not change the rates.
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = (i * 7) % order.size();
    std::vector<PerturbationPair> p2;
    std::vector<FlipRecord> r2;
    for (auto i : order) p2.push_back(pairs[i]), r2.push_back(records[i]);
    const auto shuffled = repair_sweep(toy.model, p2, r2, st, alphas, planted, s);
    for (std::size_t k = 0; k < reports.size(); ++k) {
        CHECK(shuffled[k].rate == reports[k].rate);
        CHECK(shuffled[k].regression_rate == reports[k].regression_rate);
        CHECK(shuffled[k].net_rate == reports[k].net_rate);
    }

    const auto j = repair_to_json(reports[2]);
    CHECK(repair_from_json(j).recovered == reports[2].recovered);
    CHECK(repair_csv_header().rfind("alpha,layers,recovered,flipped_n,regressed,stable_n,rate", 0) == 0);

    std::vector<FlipRecord> none(records.begin() + 10, records.end());
    CHECK_THROWS_AS(repair_sweep(toy.model, pairs, none, st, alphas, planted, s), PreconditionError);
}

TEST_CASE("steering file round trip") {
    const ToyModel toy = offset_toy();
    auto st = compute_steering_vectors(toy.model, flip_pairs(toy, "c", 2), EvalSettings{}, {}, "toy");
    const auto path = testing::scratch_dir("steer") / "s.mpdw";
    save_steering(path, st);
    const auto back = load_steering(path);
    CHECK(back.vectors == st.vectors);
    CHECK(back.calibration_count == 2);
    CHECK(back.source_model == "toy");
    CHECK(encode_steering(back) == encode_steering(st));
    CHECK_NOTHROW(validate_steering(back, toy.model.config));
    st.vectors.pop_back();
    CHECK_THROWS_AS(validate_steering(st, toy.model.config), PreconditionError);
}

}
