#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "adaco/runconfig.hpp"
#include "adaco/trainer.hpp"

namespace adaco {

// Writes scenes/<id>/{points.bin, clean.labels, noisy.labels, meta.json}
// under out_dir plus a frozen config copy.
void synth_run(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Unprojects per-frame label maps onto points, refines them with
// inter-frame voxel voting and writes <id>/refined.labels (plus the raw
// unprojected labels) under out_dir. Map directory layout per scene id:
// view*.map2d + view*.camera.json + optional view*.legend.json whose raw-id
// descriptions are resolved through the dictionary.
void labelgen_run(const RunConfig& cfg, const std::filesystem::path& scenes_dir,
                  const std::filesystem::path& maps_dir,
                  const std::optional<std::filesystem::path>& dict_file,
                  const std::filesystem::path& out_dir);

struct TrainRunSummary {
    TrainResult result;
    ClassVocabulary classes;
};

// Trains on every scene under data_dir and writes checkpoint.bin,
// metrics_epoch.csv, curves/<id>.csv, fits.json, corrections.jsonl,
// labels_final/<id>.labels and the frozen config.
TrainRunSummary train_run(const RunConfig& cfg, const std::filesystem::path& data_dir,
                          const std::filesystem::path& out_dir);

// Loads the checkpoint from run_dir, predicts every scene under data_dir,
// scores against clean labels, audits label quality and renders the report
// into run_dir (metrics.json, curves.csv, plots/).
void evaluate_run(const RunConfig& cfg, const std::filesystem::path& data_dir,
                  const std::filesystem::path& run_dir);

struct FitCurveReport {
    CurveFitParams params;
    std::vector<double> derivative;  // per epoch, 1-indexed
    std::optional<int> trigger_epoch;
};

// Fits the (epoch, miou) CSV and scans the ratio trigger over its epochs.
FitCurveReport fit_curve_run(const std::filesystem::path& csv_path, double threshold);

void inspect_run(const std::filesystem::path& scene_dir, const ReadOptions& options,
                 std::ostream& out, bool as_json);

}  // namespace adaco
