#include "mpd/causal/alignment.hpp"

#include <algorithm>

#include "mpd/error.hpp"

namespace mpd {

DivergingPositions align_tokens(std::span<const int> orig, std::span<const int> pert) {
    if (orig.empty() || pert.empty()) throw PreconditionError("align_tokens: empty sequence");
    const std::size_t n = orig.size(), m = pert.size();
    // suffix[i][j] = LCS length of orig[i..] and pert[j..]
    std::vector<int> suffix((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> int& { return suffix[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            at(i, j) = orig[i] == pert[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));

    DivergingPositions out;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (orig[i] == pert[j] && at(i, j) == at(i + 1, j + 1) + 1) {
            out.matched.emplace_back(static_cast<int>(i), static_cast<int>(j));
            ++i;
            ++j;
        } else if (at(i, j + 1) == at(i, j)) {
            out.diverging.push_back(static_cast<int>(j));
            ++j;
        } else {
            ++i;
        }
    }
    for (; j < m; ++j) out.diverging.push_back(static_cast<int>(j));
    return out;
}

std::vector<int> donor_positions(const DivergingPositions& alignment, std::size_t orig_len) {
    std::vector<int> donors;
    donors.reserve(alignment.diverging.size());
    const int hi = static_cast<int>(orig_len) - 1;
    for (int t : alignment.diverging) {
        int donor = t;
        for (auto it = alignment.matched.rbegin(); it != alignment.matched.rend(); ++it)
            if (it->second < t) {
                donor = it->first + (t - it->second);
                break;
            }
        donors.push_back(std::clamp(donor, 0, std::max(hi, 0)));
    }
    return donors;
}

} // namespace mpd
