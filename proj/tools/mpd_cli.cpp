#include <CLI11.hpp>

#include <iostream>

#include "mpd/report/pipeline.hpp"

using namespace mpd::report;

int main(int argc, char** argv) {
    CLI::App app{"Mechanistic perturbation diagnostics"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--model", g.model, "Model weights (MPDW file)");
    app.add_option("--out", g.out, "Artifact directory")->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for perturbation sampling and toy models")->capture_default_str();
    app.add_option("--subset", g.subset, "Flipped samples sent to patching and ablation")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    PerturbOptions po;
    auto* perturb = app.add_subcommand("perturb", "Build perturbation pairs from a corpus");
    perturb->add_option("--corpus", po.corpus, "Problems, one JSON object per line")->required();
    perturb->add_option("--name-fraction", po.name_fraction, "Share of name-swap problems")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));

    EvaluateOptions eo;
    auto* evaluate = app.add_subcommand("evaluate", "Run original and perturbed prompts, record flips");
    evaluate->add_option("--pairs", eo.pairs, "Pair dataset (default: <out>/pairs.jsonl)");
    evaluate->add_option("--template", eo.template_file, "Prompt template file containing {problem}");
    evaluate->add_option("--max-tokens", eo.max_tokens, "Greedy decoding budget")->capture_default_str();

    DiagnoseOptions dopt;
    auto* diagnose = app.add_subcommand("diagnose", "Logit lens, CAI, activation patching, ablation");
    diagnose->add_flag("--lens", dopt.lens, "Layer-wise divergence profiles");
    diagnose->add_flag("--cai", dopt.cai, "Include the cascading amplification index");
    diagnose->add_flag("--patch", dopt.patch, "Single-layer activation patching sweep");
    diagnose->add_flag("--ablate", dopt.ablate, "Attention / MLP zero-ablation sweep");

    RepairOptions ro;
    std::size_t calibration = 0;
    auto* repair = app.add_subcommand("repair", "Steering-vector repair sweep");
    repair->add_option("--alphas", ro.alphas, "Steering scales")->capture_default_str()->delimiter(',');
    repair->add_option("--layers", ro.layers, "Steered layers (default: all)")->delimiter(',');
    auto* cal_opt = repair->add_option("--calibration", calibration, "Calibration pairs, taken from the end");

    app.add_subcommand("report", "Tables and plots from the artifacts");

    ToyOptions to;
    auto* toy = app.add_subcommand("toy", "Write a fixture model to --model");
    toy->add_option("--fixture", to.fixture, "Fixture name")->capture_default_str();
    toy->add_option("--num-layers", to.num_layers, "Layer count")->capture_default_str();
    toy->add_option("--layer", to.layer, "Planted layer")->capture_default_str();
    toy->add_option("--triggers", to.triggers, "Trigger characters");
    toy->add_option("--wrong-digit", to.wrong_digit, "Digit the corruption produces");

    CLI11_PARSE(app, argc, argv);

    try {
        if (perturb->parsed()) {
            cmd_perturb(g, po);
        } else if (evaluate->parsed()) {
            cmd_evaluate(g, eo);
        } else if (diagnose->parsed()) {
            cmd_diagnose(g, dopt);
        } else if (repair->parsed()) {
            if (cal_opt->count()) ro.calibration = calibration;
            cmd_repair(g, ro);
        } else if (toy->parsed()) {
            cmd_toy(g, to);
        } else {
            const ReportSummary s = cmd_report(g);
            for (const auto& m : s.missing) std::cerr << "missing artifact: " << m << "\n";
            for (const auto& n : s.notes) std::cerr << "note: " << n << "\n";
        }
    } catch (const mpd::EmptyDatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& s : e.skips()) std::cerr << "  skipped " << s.id << ": " << s.reason << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return exit_ok;
}
