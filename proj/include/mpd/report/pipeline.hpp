#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mpd/error.hpp"
#include "mpd/perturb/perturbgen.hpp"

namespace mpd::report {

inline constexpr std::string_view kToolVersion = "mpd 1.0.0";

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_io = 2, exit_dataset = 3, exit_missing_stage = 4 };

// An upstream artifact needed by the requested stage is absent.
class MissingStageError : public Error {
public:
    MissingStageError(std::string stage, const std::filesystem::path& artifact);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

int exit_code_for(const std::exception& e);

struct GlobalOptions {
    std::string model;
    std::string out = "mpd-out";
    std::uint64_t seed = 0;
    std::size_t subset = 60;  // flipped samples sent to patching and ablation
    int threads = 1;
};

struct PerturbOptions {
    std::string corpus;
    double name_fraction = 0.5;
};

struct EvaluateOptions {
    std::string pairs;          // empty: <out>/pairs.jsonl
    std::string template_file;  // empty: built-in template
    int max_tokens = 8;
};

struct DiagnoseOptions {
    bool lens = false;
    bool patch = false;
    bool ablate = false;
    bool cai = false;
};

struct RepairOptions {
    std::vector<float> alphas{0.5f, 1.0f};
    std::vector<int> layers;                 // empty: all layers
    std::optional<std::size_t> calibration;  // default: half the pairs
};

struct ToyOptions {
    std::string fixture = "planted-offset";
    int num_layers = 2;
    int layer = 2;
    std::string triggers;
    int wrong_digit = -1;
};

struct RunManifest {
    std::string command;
    nlohmann::json inputs = nlohmann::json::object();
    std::string model;
    std::uint64_t seed = 0;
    std::size_t subset = 0;
    std::string out;
    std::string tool_version{kToolVersion};

    // FNV-1a over the canonical JSON of every other field.
    std::string config_hash() const;
    nlohmann::json to_json() const;
};

std::vector<Problem> load_corpus(const std::filesystem::path& path);

// Each command writes manifest.<command>.json into the output directory
// before any other output. Errors propagate as exceptions; see exit_code_for.
void cmd_perturb(const GlobalOptions& g, const PerturbOptions& o);
void cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o);
void cmd_diagnose(const GlobalOptions& g, const DiagnoseOptions& o);
void cmd_repair(const GlobalOptions& g, const RepairOptions& o);

struct ReportSummary {
    std::vector<std::string> written;
    std::vector<std::string> missing;  // artifacts that were not found
    std::vector<std::string> notes;
};

// Builds every table the available artifacts allow; never fails on a missing
// artifact, which is listed instead.
ReportSummary cmd_report(const GlobalOptions& g);

// Writes a fixture model to g.model.
void cmd_toy(const GlobalOptions& g, const ToyOptions& o);

} // namespace mpd::report
