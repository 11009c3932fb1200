#pragma once

#include <span>
#include <utility>
#include <vector>

namespace mpd {

struct DivergingPositions {
    // (original index, perturbed index), strictly increasing in both.
    std::vector<std::pair<int, int>> matched;
    // Perturbed positions left unmatched by the alignment.
    std::vector<int> diverging;
};

// Longest-common-subsequence alignment over token ids. Among optimal
// alignments, each perturbed token is matched to the earliest original
// token that still allows an optimal completion.
DivergingPositions align_tokens(std::span<const int> orig, std::span<const int> pert);

// Original-run position used as the patch source for each diverging
// perturbed position: the nearest preceding matched pair (o, p) maps t to
// o + (t - p); without a preceding match t maps to itself. Results are
// clamped to [0, orig_len).
std::vector<int> donor_positions(const DivergingPositions& alignment, std::size_t orig_len);

} // namespace mpd
