#include <doctest.h>

#include "mpd/error.hpp"
#include "mpd/taxonomy/taxonomy.hpp"

using namespace mpd;

namespace {

FlipRecord record(std::string id, bool correct_orig, bool correct_pert) {
    FlipRecord r;
    r.pair_id = std::move(id);
    r.correct_orig = correct_orig;
    r.correct_pert = correct_pert;
    r.flip = correct_orig && !correct_pert;
    return r;
}

} // namespace

TEST_SUITE("taxonomy") {

TEST_CASE("reported rates map to the reported labels") {
    // Patch recoveries 3/60, 43/60, 0/60; component recoveries from the ablation table.
    const auto distributed_row = make_failure_profile(0.451, 3.0 / 60, 27.0 / 60, 21.0 / 60);
    const auto localized_row = make_failure_profile(0.335, 43.0 / 60, 45.0 / 60, 46.0 / 60);
    const auto entangled_row = make_failure_profile(0.288, 0.0 / 60, 24.0 / 60, 29.0 / 60);
    CHECK(classify(distributed_row).label == Label::distributed);
    CHECK(classify(localized_row).label == Label::localized);
    CHECK(classify(entangled_row).label == Label::entangled);
    CHECK(localized_row.r_patch == doctest::Approx(0.71666666666).epsilon(1e-9));
    CHECK(distributed_row.dominant == Dominant::attn);
    CHECK(entangled_row.dominant == Dominant::mlp);
    CHECK(localized_row.dominant == Dominant::mlp);  // 75% < 77%

    CHECK(classify(make_failure_profile(0, 0.717, 0.75, 0.77)).label == Label::localized);
    CHECK(classify(make_failure_profile(0, 0.05, 0.45, 0.35)).label == Label::distributed);
    CHECK(classify(make_failure_profile(0, 0.0, 0.40, 0.48)).label == Label::entangled);
}

TEST_CASE("gap and tie inputs are unclassified") {
    for (double r : {0.1, 0.3, 0.5}) CHECK(classify(make_failure_profile(0, r, 0.9, 0.1)).label == Label::unclassified);
    const auto tie = classify(make_failure_profile(0, 0.05, 0.4, 0.4));
    CHECK(tie.label == Label::unclassified);
    CHECK_FALSE(tie.rule_fired.empty());
    CHECK(classify(make_failure_profile(0, 0.5000001, 0, 0)).label == Label::localized);
    CHECK(classify(make_failure_profile(0, 0.0999999, 0.2, 0.1)).label == Label::distributed);
}

TEST_CASE("labels ignore fields the rule does not read") {
    auto a = make_failure_profile(0.9, 0.8, 0.1, 0.7, 3.0);
    auto b = make_failure_profile(0.1, 0.8, 0.6, 0.2);
    CHECK(classify(a).label == classify(b).label);
    CHECK(classify(a).rule_fired == classify(b).rule_fired);
}

TEST_CASE("summarize_model counts the diagnosed flips") {
    std::vector<FlipRecord> flips{record("a", true, false), record("b", true, false), record("c", true, false),
                                  record("d", true, true),  record("e", false, false), record("f", true, false)};
    std::vector<RecoveryProfile> patch{make_recovery_profile("a", {false, true}),
                                       make_recovery_profile("b", {false, false}),
                                       make_recovery_profile("c", {true, true})};
    std::vector<ComponentRecoveryProfile> abl{make_component_profile("a", {true, false}, {false, false}),
                                              make_component_profile("b", {false, false}, {false, true}),
                                              make_component_profile("c", {true, true}, {false, false})};
    std::vector<DivergenceProfile> div(2);
    div[0].pair_id = "a";
    div[0].first_divergence = 1;
    div[1].pair_id = "c";
    div[1].first_divergence = 2;

    const FailureProfile p = summarize_model(flips, patch, abl, div);
    CHECK(p.flip_rate == doctest::Approx(4.0 / 5.0));  // f is flipped but not diagnosed
    CHECK(p.flipped == 3);
    CHECK(p.r_patch == doctest::Approx(2.0 / 3.0));
    CHECK(p.r_attn == doctest::Approx(2.0 / 3.0));
    CHECK(p.r_mlp == doctest::Approx(1.0 / 3.0));
    CHECK(p.dominant == Dominant::attn);
    REQUIRE(p.mean_first_divergence);
    CHECK(*p.mean_first_divergence == doctest::Approx(1.5));

    abl.pop_back();
    CHECK_THROWS_AS(summarize_model(flips, patch, abl, div), PreconditionError);
    CHECK_THROWS_AS(summarize_model(flips, std::vector<RecoveryProfile>{}, abl, div), PreconditionError);
}

TEST_CASE("report rows") {
    const auto p = make_failure_profile(0.25, 0.0, 0.5, 0.25);
    const auto j = taxonomy_to_json(p, classify(p));
    CHECK(j["label"] == "Distributed");
    CHECK(j["dominant_component"] == "attn");
    CHECK(j["mean_first_divergence"].is_null());
    CHECK(taxonomy_csv_row("toy", p, classify(p)).find("Distributed") != std::string::npos);
    CHECK(taxonomy_csv_header().rfind("model,", 0) == 0);
}

}
