// adaco: desk-scale label-free 3D semantic segmentation pipeline.
//
// Subcommands: synth, labelgen, train, evaluate, fit-curve, inspect.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adaco/pipeline.hpp"

namespace {

using adaco::RunConfig;

struct CommonArgs {
    std::optional<std::filesystem::path> config_file;
    std::vector<std::string> sets;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("--config", args.config_file, "key = value configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", args.sets, "override a config key, e.g. --set train.epochs=10");
    cmd->add_option("--seed", args.seed, "master seed fixing all randomness");
    cmd->add_option("--threads", args.threads, "worker thread cap (1 = bit-deterministic)");
}

RunConfig build_config(const CommonArgs& args,
                       std::vector<std::pair<std::string, std::string>> extra = {})
{
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& kv : args.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            adaco::fail(adaco::ErrorCode::invalid_argument, "--set expects key=value, got " + kv);
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed) overrides.emplace_back("seed", std::to_string(*args.seed));
    if (args.threads) overrides.emplace_back("threads", std::to_string(*args.threads));
    for (auto& kv : extra) overrides.push_back(std::move(kv));
    return RunConfig::load(args.config_file, overrides);
}

int exit_code_for(const adaco::Error& e)
{
    switch (e.code()) {
        case adaco::ErrorCode::invalid_argument:
        case adaco::ErrorCode::malformed_file:
        case adaco::ErrorCode::length_mismatch:
        case adaco::ErrorCode::label_out_of_range:
        case adaco::ErrorCode::unknown_class:
        case adaco::ErrorCode::missing_input:
            return 1;
        default:
            return 2;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"label-free 3D semantic segmentation pipeline with adaptive noise correction"};
    app.require_subcommand(1);

    // synth
    CommonArgs synth_args;
    std::filesystem::path synth_out;
    std::optional<int> synth_scenes;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic scenes with label noise");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--scenes", synth_scenes, "number of scenes");
    add_common(synth, synth_args);

    // labelgen
    CommonArgs labelgen_args;
    std::filesystem::path lg_scenes, lg_maps, lg_out;
    std::optional<std::filesystem::path> lg_dict;
    std::optional<double> lg_voxel;
    std::optional<int> lg_adjacency;
    CLI::App* labelgen = app.add_subcommand("labelgen", "unproject 2D label maps and refine by voxel voting");
    labelgen->add_option("--scenes", lg_scenes, "scene directory")->required();
    labelgen->add_option("--maps", lg_maps, "label map directory")->required();
    labelgen->add_option("--dict", lg_dict, "class-description dictionary JSON");
    labelgen->add_option("--voxel", lg_voxel, "voting voxel size in meters");
    labelgen->add_option("--adjacency", lg_adjacency, "neighbor frames per side");
    labelgen->add_option("--out", lg_out, "output directory")->required();
    add_common(labelgen, labelgen_args);

    // train
    CommonArgs train_args;
    std::filesystem::path train_data, train_out;
    CLI::App* train_cmd = app.add_subcommand("train", "train the point classifier with adaptive correction");
    train_cmd->add_option("--data", train_data, "scene directory")->required();
    train_cmd->add_option("--out", train_out, "run output directory")->required();
    add_common(train_cmd, train_args);

    // evaluate
    CommonArgs eval_args;
    std::filesystem::path eval_data, eval_run;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a run against clean labels and render the report");
    evaluate->add_option("--data", eval_data, "scene directory")->required();
    evaluate->add_option("--run", eval_run, "run directory with checkpoint.bin")->required();
    add_common(evaluate, eval_args);

    // fit-curve
    std::filesystem::path fit_csv;
    double fit_threshold = 0.9;
    CLI::App* fit = app.add_subcommand("fit-curve", "fit a learning curve CSV and locate the trigger epoch");
    fit->add_option("--csv", fit_csv, "CSV of epoch,miou rows")->required();
    fit->add_option("--threshold", fit_threshold, "derivative-drop threshold");

    // inspect
    CommonArgs inspect_args;
    std::filesystem::path inspect_scene;
    bool inspect_json = false;
    CLI::App* inspect = app.add_subcommand("inspect", "summarize one scene directory");
    inspect->add_option("--scene", inspect_scene, "scene directory")->required();
    inspect->add_flag("--json", inspect_json, "emit JSON instead of text");
    add_common(inspect, inspect_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (synth->parsed()) {
            std::vector<std::pair<std::string, std::string>> extra;
            if (synth_scenes) extra.emplace_back("synth.scenes", std::to_string(*synth_scenes));
            adaco::synth_run(build_config(synth_args, std::move(extra)), synth_out);
        } else if (labelgen->parsed()) {
            std::vector<std::pair<std::string, std::string>> extra;
            if (lg_voxel) extra.emplace_back("labelgen.voxel", std::to_string(*lg_voxel));
            if (lg_adjacency) extra.emplace_back("labelgen.adjacency", std::to_string(*lg_adjacency));
            adaco::labelgen_run(build_config(labelgen_args, std::move(extra)), lg_scenes, lg_maps,
                                lg_dict, lg_out);
        } else if (train_cmd->parsed()) {
            adaco::train_run(build_config(train_args), train_data, train_out);
        } else if (evaluate->parsed()) {
            // Featurization must match training; default to the run's frozen
            // configuration when none is given.
            CommonArgs args = eval_args;
            const auto frozen = eval_run / "config.effective.conf";
            if (!args.config_file && std::filesystem::exists(frozen)) args.config_file = frozen;
            adaco::evaluate_run(build_config(args), eval_data, eval_run);
        } else if (fit->parsed()) {
            const adaco::FitCurveReport report = adaco::fit_curve_run(fit_csv, fit_threshold);
            std::printf("amplitude  %.6f\n", report.params.amplitude);
            std::printf("exponent   %.6f\n", report.params.exponent);
            std::printf("time_scale %.6f\n", report.params.time_scale);
            std::printf("residual   %.3e\n", report.params.residual);
            for (size_t i = 0; i < report.derivative.size(); ++i)
                std::printf("f'(%zu) = %.6e\n", i + 1, report.derivative[i]);
            if (report.trigger_epoch)
                std::printf("trigger epoch: %d\n", *report.trigger_epoch);
            else
                std::printf("trigger epoch: none\n");
        } else if (inspect->parsed()) {
            adaco::inspect_run(inspect_scene, build_config(inspect_args).read_options(), std::cout,
                               inspect_json);
        }
    } catch (const adaco::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
