#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpd/eval/paired_eval.hpp"

namespace mpd {

struct SteeringSet {
    std::vector<std::vector<float>> vectors;  // index l-1 for layer l, width d_model
    std::size_t calibration_count = 0;
    std::string source_model;

    int num_layers() const { return static_cast<int>(vectors.size()); }
};

// vectors[l-1] = mean over pairs of h^(l)_orig - h^(l)_pert, each taken at
// the last prompt position of its own input. Accumulates in double. Throws
// PreconditionError for an empty calibration set or when a calibration id
// also appears in `evaluation_ids`.
SteeringSet compute_steering_vectors(const Model& model, std::span<const PerturbationPair> calibration,
                                     const EvalSettings& settings,
                                     std::span<const std::string> evaluation_ids = {},
                                     std::string source_model = {});

void validate_steering(const SteeringSet& steering, const ModelConfig& config);

std::string encode_steering(const SteeringSet& steering);
SteeringSet decode_steering(const std::string& bytes);
void save_steering(const std::filesystem::path& path, const SteeringSet& steering);
SteeringSet load_steering(const std::filesystem::path& path);

struct SteeringOutcome {
    std::optional<Rational> answer;
    std::string completion;
    bool recovered = false;
};

// Perturbed generation with alpha * vectors[l-1] added to h^(l) at every
// position and step for each l in `layers` (empty: all layers).
SteeringOutcome apply_steering(const Model& model, const PerturbationPair& pair, const SteeringSet& steering,
                               float alpha, std::span<const int> layers, const EvalSettings& settings);

enum class RepairOutcome { recovered, still_wrong, still_correct, regressed };

std::string_view to_string(RepairOutcome o);

struct RepairReport {
    float alpha = 0.0f;
    std::vector<int> layers;
    std::size_t recovered = 0;
    std::size_t flipped_n = 0;
    std::size_t regressed = 0;
    std::size_t stable_n = 0;
    double rate = 0.0;             // recovered / flipped_n
    double regression_rate = 0.0;  // regressed / stable_n, 0 without stable samples
    double net_rate = 0.0;         // (recovered - regressed) / flipped_n
    std::vector<std::pair<std::string, RepairOutcome>> samples;  // in record order
};

// Flipped records (correct on the original, wrong on the variant) measure
// recovery; stable records (correct on both) measure regression. Records
// wrong on the original are not evaluated. Every record's pair must be in
// `pairs`. Throws PreconditionError when no record is a flip.
std::vector<RepairReport> repair_sweep(const Model& model, std::span<const PerturbationPair> pairs,
                                       std::span<const FlipRecord> records, const SteeringSet& steering,
                                       std::span<const float> alphas, std::span<const int> layers,
                                       const EvalSettings& settings, int threads = 1);

std::string repair_csv_header();
std::string repair_csv_row(const RepairReport& report);
nlohmann::json repair_to_json(const RepairReport& report);
RepairReport repair_from_json(const nlohmann::json& j);

} // namespace mpd
