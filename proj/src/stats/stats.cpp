#include "mpd/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "mpd/error.hpp"
#include "mpd/util/csv.hpp"

namespace mpd {

namespace {

// Relabelings at exactly the observed distance count as "as extreme".
constexpr double kDistanceSlack = 1e-9;

// Exact two-sided p by counting subsets of size n2 per doubled rank sum.
double exact_p(const std::vector<double>& ranks, std::size_t n2, double u_xy) {
    const std::size_t n = ranks.size();
    std::vector<long> doubled(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        doubled[i] = std::lround(2.0 * ranks[i]);
        total += doubled[i];
    }
    // ways[k][s]: subsets of size k with doubled rank sum s
    std::vector<std::vector<double>> ways(n2 + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = std::min(n2, i + 1); k-- > 0;)
            for (long s = total - doubled[i]; s >= 0; --s)
                if (ways[k][static_cast<std::size_t>(s)] != 0.0)
                    ways[k + 1][static_cast<std::size_t>(s + doubled[i])] += ways[k][static_cast<std::size_t>(s)];

    const double n1 = static_cast<double>(n - n2);
    const double mu = n1 * static_cast<double>(n2) / 2.0;
    const double offset = static_cast<double>(n2) * static_cast<double>(n2 + 1) / 2.0;
    const double observed = std::abs(u_xy - mu);
    double extreme = 0.0, all = 0.0;
    for (std::size_t s = 0; s < ways[n2].size(); ++s) {
        const double w = ways[n2][s];
        if (w == 0.0) continue;
        all += w;
        const double u = static_cast<double>(s) / 2.0 - offset;
        if (std::abs(u - mu) >= observed - kDistanceSlack) extreme += w;
    }
    return std::min(1.0, extreme / all);
}

double normal_p(const std::vector<double>& values, std::size_t n1, std::size_t n2, double u_xy) {
    const double N = static_cast<double>(n1 + n2);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double tie_sum = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_sum += t * t * t - t;
        i = j;
    }
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    const double var = a * b / 12.0 * ((N + 1.0) - tie_sum / (N * (N - 1.0)));
    if (!(var > 0.0)) return 1.0;
    const double z = std::max(0.0, std::abs(u_xy - a * b / 2.0) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

} // namespace

std::string_view to_string(TestMethod m) {
    switch (m) {
    case TestMethod::automatic: return "automatic";
    case TestMethod::exact: return "exact";
    case TestMethod::normal_approx: return "normal-approx";
    }
    return "?";
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

double rank_biserial(double U, std::size_t n1, std::size_t n2) {
    const double nn = static_cast<double>(n1) * static_cast<double>(n2);
    if (n1 == 0 || n2 == 0 || !(U >= 0.0 && U <= nn)) throw PreconditionError("rank_biserial: U out of range");
    return 1.0 - 2.0 * U / nn;
}

StatResult mann_whitney_u(std::span<const double> x, std::span<const double> y, TestMethod method) {
    if (x.empty() || y.empty()) throw PreconditionError("mann_whitney_u: empty sample");
    for (double v : x)
        if (!std::isfinite(v)) throw PreconditionError("mann_whitney_u: non-finite value");
    for (double v : y)
        if (!std::isfinite(v)) throw PreconditionError("mann_whitney_u: non-finite value");

    std::vector<double> all(x.begin(), x.end());
    all.insert(all.end(), y.begin(), y.end());
    const std::vector<double> ranks = midranks(all);
    double rank_y = 0.0;
    for (std::size_t i = x.size(); i < all.size(); ++i) rank_y += ranks[i];
    const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
    const double u_xy = rank_y - n2 * (n2 + 1.0) / 2.0;

    StatResult r;
    r.n1 = x.size();
    r.n2 = y.size();
    r.U = std::min(u_xy, n1 * n2 - u_xy);
    r.r_rank_biserial = rank_biserial(r.U, r.n1, r.n2);
    if (method == TestMethod::automatic)
        method = all.size() <= kExactLimit ? TestMethod::exact : TestMethod::normal_approx;
    r.method = method;
    r.p_two_sided = method == TestMethod::exact ? exact_p(ranks, y.size(), u_xy) : normal_p(all, r.n1, r.n2, u_xy);
    return r;
}

AucResult roc_auc(std::span<const double> scores, std::span<const bool> labels) {
    if (scores.size() != labels.size()) throw PreconditionError("roc_auc: scores and labels differ in length");
    AucResult out;
    double rank_pos = 0.0;
    const std::vector<double> ranks = midranks(scores);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw PreconditionError("roc_auc: non-finite score");
        if (labels[i]) {
            ++out.positives;
            rank_pos += ranks[i];
        } else {
            ++out.negatives;
        }
    }
    if (out.positives == 0 || out.negatives == 0) throw PreconditionError("roc_auc: need both classes");
    const double P = static_cast<double>(out.positives), N = static_cast<double>(out.negatives);
    out.auc = (rank_pos - P * (P + 1.0) / 2.0) / (P * N);
    return out;
}

AucResult roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
    std::unique_ptr<bool[]> copy(new bool[labels.size()]);
    for (std::size_t i = 0; i < labels.size(); ++i) copy[i] = labels[i];
    return roc_auc(scores, std::span<const bool>(copy.get(), labels.size()));
}

std::string stats_csv_header() { return util::csv_record({"metric", "group_a", "group_b", "n1", "n2", "U", "p", "r", "method"}); }

std::string stats_csv_row(std::string_view metric, std::string_view group_a, std::string_view group_b,
                          const StatResult& r) {
    return util::csv_record({std::string(metric), std::string(group_a), std::string(group_b), std::to_string(r.n1),
                             std::to_string(r.n2), util::format_number(r.U), util::format_number(r.p_two_sided),
                             util::format_number(r.r_rank_biserial), std::string(to_string(r.method))});
}

} // namespace mpd
