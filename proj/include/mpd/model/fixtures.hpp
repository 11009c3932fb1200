#pragma once

#include <cstdint>
#include <string>

#include "mpd/model/weights.hpp"

namespace mpd {

// Hand-wired toy models with known internal circuits, used as oracles for the
// diagnostics. Every planted fixture shares one circuit vocabulary:
//
//  * a digit-copy head in layer 1 writes the most recent digit of the prompt
//    into an answer subspace, so the model answers with the last digit it saw
//    and then emits EOS;
//  * trigger bytes (default: one letter chosen by the seed) start a corrupting
//    signal that, once it reaches the answer position, makes the model answer
//    with `wrong_digit` instead.
//
// Fixtures differ in how the corruption travels:
//
//  copy-head           1 layer; a token-matching head copies the current
//                      token, so the model repeats its last input token.
//  planted-localized   layer 1 spreads a trigger marker to every later
//                      position; layer k lets name positions re-gather it;
//                      layer k+1 reads the name positions into the answer.
//                      Patching the diverging positions at layer k (and only
//                      there) removes the corruption. Needs 2 <= k < L.
//  planted-redundant   planted-localized plus a direct readout of the spread
//                      marker, so no single-layer patch recovers.
//  planted-offset      one attention head at layer k reads the trigger and
//                      adds a fixed offset vector at later positions.
//  planted-mlp         layer 1 spreads the marker, the MLP at layer k turns it
//                      into the corrupting offset.
struct FixtureSpec {
    std::string name;
    int num_layers = 4;
    int layer = 2;
    std::uint64_t seed = 0;
    std::string triggers;  // empty: one letter drawn from the seed
    int wrong_digit = -1;  // -1: drawn from the seed
};

struct ToyModel {
    Model model;
    std::string fixture;
    int planted_layer = 0;
    int wrong_digit = 0;
    std::string triggers;
    // Letters the localized gather head treats as name positions: the
    // original-name initial followed by the triggers.
    char original_initial = 'B';
    std::string name_initials;
};

// Throws ConfigError for an unknown fixture name or an invalid layer choice.
ToyModel build_toy_model(const FixtureSpec& spec);

// Random weights for property tests: uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
// norm gains near one.
Model random_model(const ModelConfig& config, std::uint64_t seed);

} // namespace mpd
