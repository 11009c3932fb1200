#pragma once

#include <cstdint>
#include <string>

#include "mpd/model/fixtures.hpp"
#include "mpd/perturb/perturbgen.hpp"

namespace mpd {

// A name-swap pair that a planted fixture answers correctly on the original
// and flips on the variant. The name occurs twice with the answer digit in
// between; the variant renames it with the first trigger letter. `variant`
// picks the name stem and sentence wording.
PerturbationPair fixture_pair(const ToyModel& toy, std::string id, int gold_digit, std::uint64_t variant = 0);

// Same sentence shape with no trigger anywhere: both sides answer correctly.
PerturbationPair stable_fixture_pair(const ToyModel& toy, std::string id, int gold_digit, std::uint64_t variant = 0);

} // namespace mpd
