#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpd {

enum class TestMethod { automatic, exact, normal_approx };

std::string_view to_string(TestMethod m);

struct StatResult {
    double U = 0.0;  // min(U_xy, U_yx)
    double p_two_sided = 1.0;
    double r_rank_biserial = 0.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    TestMethod method = TestMethod::exact;
};

// Combined sizes up to this use the exact null distribution.
inline constexpr std::size_t kExactLimit = 16;

// Mann-Whitney U with mid-ranks for ties. U_xy counts pairs x_i < y_j plus
// half the ties; the reported U is the smaller of U_xy and U_yx. The exact
// p-value is the share of all relabelings whose U is at least as far from
// n1*n2/2 as the observed one; the approximation uses the tie-corrected
// variance with a 0.5 continuity correction. Throws on an empty sample.
StatResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                          TestMethod method = TestMethod::automatic);

// r = 1 - 2U/(n1*n2). Throws when U lies outside [0, n1*n2].
double rank_biserial(double U, std::size_t n1, std::size_t n2);

struct AucResult {
    double auc = 0.5;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

// (wins + ties/2) / (P*N) over positive/negative score pairs. Throws unless
// both classes are present and the spans have equal length.
AucResult roc_auc(std::span<const double> scores, std::span<const bool> labels);
AucResult roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

// Mid-ranks (1-based) of the values.
std::vector<double> midranks(std::span<const double> values);

std::string stats_csv_header();
std::string stats_csv_row(std::string_view metric, std::string_view group_a, std::string_view group_b,
                          const StatResult& r);

} // namespace mpd
