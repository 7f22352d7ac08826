#include "adaco/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "adaco/labelgen.hpp"
#include "adaco/metrics.hpp"
#include "adaco/report.hpp"
#include "adaco/synth.hpp"
#include "adaco/util.hpp"

namespace adaco {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

ClassVocabulary vocabulary_of(const std::vector<SampleScene>& scenes)
{
    if (scenes.empty()) fail(ErrorCode::empty_batch, "no scenes found");
    const ClassVocabulary& vocab = scenes.front().classes;
    for (const SampleScene& s : scenes)
        if (s.classes.names != vocab.names)
            fail(ErrorCode::invalid_argument, "scenes disagree on the class vocabulary");
    return vocab;
}

std::vector<SampleScene> load_scenes(const fs::path& data_dir, const ReadOptions& options)
{
    std::vector<SampleScene> scenes;
    for (const fs::path& dir : list_scene_dirs(data_dir)) scenes.push_back(read_scene(dir, options));
    if (scenes.empty()) fail(ErrorCode::missing_input, "no scenes under " + data_dir.string());
    return scenes;
}

}  // namespace

void synth_run(const RunConfig& cfg, const fs::path& out_dir)
{
    const SynthConfig synth = cfg.synth_config();
    fs::create_directories(out_dir / "scenes");

    std::vector<SampleScene> scenes(static_cast<size_t>(synth.n_scenes));
    parallel_for(scenes.size(), cfg.threads(), [&](size_t i) {
        SampleScene scene = generate_scene(synth, static_cast<int>(i));
        scenes[i] = inject_noise(scene, synth.noise, synth.rng_seed);
    });
    for (const SampleScene& scene : scenes) write_scene(scene, out_dir / "scenes" / scene.id);
    cfg.write_frozen(out_dir / "config.effective.conf");
}

void labelgen_run(const RunConfig& cfg, const fs::path& scenes_dir, const fs::path& maps_dir,
                  const std::optional<fs::path>& dict_file, const fs::path& out_dir)
{
    const double voxel = cfg.get_double("labelgen.voxel");
    const int adjacency = cfg.get_int("labelgen.adjacency");
    UnprojectOptions unproject_options;
    unproject_options.nearest_depth_only = cfg.get_bool("labelgen.nearest_depth");

    FrameSequence seq;
    seq.adjacency = adjacency;
    for (const fs::path& dir : list_scene_dirs(scenes_dir)) {
        FrameSequence::Frame frame;
        frame.scene = read_scene(dir, cfg.read_options());
        seq.frames.push_back(std::move(frame));
    }
    if (seq.frames.empty()) fail(ErrorCode::missing_input, "no scenes under " + scenes_dir.string());

    std::optional<LabelDictionary> dict;
    if (dict_file) dict = LabelDictionary::from_json_file(*dict_file, seq.frames[0].scene.classes);

    for (auto& frame : seq.frames) {
        const fs::path frame_maps = maps_dir / frame.scene.id;
        std::vector<LabelMap2D> maps;
        if (fs::is_directory(frame_maps)) {
            std::vector<fs::path> map_files;
            for (const auto& entry : fs::directory_iterator(frame_maps))
                if (entry.path().extension() == ".map2d") map_files.push_back(entry.path());
            std::sort(map_files.begin(), map_files.end());  // view order = name order
            for (const fs::path& map_path : map_files) {
                fs::path camera_path = map_path;
                camera_path.replace_extension(".camera.json");
                LabelMap2D map = read_label_map(map_path, camera_path);

                fs::path legend_path = map_path;
                legend_path.replace_extension(".legend.json");
                if (fs::exists(legend_path)) {
                    if (!dict)
                        fail(ErrorCode::missing_input,
                             "legend present but no dictionary given: " + legend_path.string());
                    std::ifstream in(legend_path);
                    json legend = json::parse(in, nullptr, false);
                    if (legend.is_discarded() || !legend.is_object())
                        fail(ErrorCode::malformed_file, legend_path.string());
                    std::map<uint16_t, uint16_t> resolve;
                    for (const auto& [raw, description] : legend.items()) {
                        size_t used = 0;
                        unsigned long id = 0;
                        try {
                            id = std::stoul(raw, &used);
                        } catch (const std::exception&) {
                            used = 0;
                        }
                        if (used != raw.size() || id > 0xffff)
                            fail(ErrorCode::malformed_file,
                                 legend_path.string() + ": bad raw id \"" + raw + "\"");
                        resolve[static_cast<uint16_t>(id)] =
                            map_description(description.get<std::string>(), *dict);
                    }
                    for (uint16_t& l : map.labels) {
                        const auto it = resolve.find(l);
                        l = it == resolve.end() ? kUnlabeledId : it->second;
                    }
                }
                map.validate(frame.scene.classes.size());
                maps.push_back(std::move(map));
            }
        }
        frame.labels = unproject_labels(frame.scene, maps, unproject_options);
        frame.maps = std::move(maps);
    }

    const std::vector<LabelArray> refined = voxel_vote(seq, voxel);
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        const fs::path dir = out_dir / seq.frames[i].scene.id;
        fs::create_directories(dir);
        write_labels(seq.frames[i].labels, dir / "unprojected.labels");
        write_labels(refined[i], dir / "refined.labels");
    }
    cfg.write_frozen(out_dir / "config.effective.conf");
}

TrainRunSummary train_run(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir)
{
    const std::vector<SampleScene> scenes = load_scenes(data_dir, cfg.read_options());
    const ClassVocabulary classes = vocabulary_of(scenes);

    std::vector<TrainScene> dataset;
    dataset.reserve(scenes.size());
    for (const SampleScene& s : scenes) dataset.push_back(make_train_scene(s));

    const TrainConfig train_cfg = cfg.train_config();
    TrainRunSummary summary{train(std::move(dataset), classes, train_cfg), classes};
    const TrainResult& result = summary.result;

    fs::create_directories(out_dir);
    save_model(result.model, out_dir / "checkpoint.bin");

    {
        std::ofstream out(out_dir / "metrics_epoch.csv", std::ios::trunc);
        out << "epoch,mean_train_miou,mean_loss,learning_rate,corrected_total\n";
        for (const EpochStats& e : result.epoch_stats)
            out << e.epoch << "," << num(e.mean_train_miou) << "," << num(e.mean_loss) << ","
                << num(e.learning_rate) << "," << e.corrected_total << "\n";
    }

    fs::create_directories(out_dir / "curves");
    json fits = json::array();
    for (const LearningCurve& curve : result.curves) {
        std::ofstream out(out_dir / "curves" / (curve.sample_id + ".csv"), std::ios::trunc);
        out << "epoch,miou\n";
        for (size_t i = 0; i < curve.miou_series.size(); ++i)
            out << (i + 1) << "," << num(curve.miou_series[i]) << "\n";

        json f;
        f["sample_id"] = curve.sample_id;
        if (curve.fit) {
            f["amplitude"] = curve.fit->amplitude;
            f["exponent"] = curve.fit->exponent;
            f["time_scale"] = curve.fit->time_scale;
            f["residual"] = curve.fit->residual;
        } else {
            f["amplitude"] = nullptr;
        }
        if (curve.correction_epoch)
            f["correction_epoch"] = *curve.correction_epoch;
        else
            f["correction_epoch"] = nullptr;
        fits.push_back(f);
    }
    {
        std::ofstream out(out_dir / "fits.json", std::ios::trunc);
        out << fits.dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir / "corrections.jsonl", std::ios::trunc);
        for (const CorrectionReport& report : result.reports) out << report.to_json_line() << "\n";
    }
    fs::create_directories(out_dir / "labels_final");
    for (size_t s = 0; s < scenes.size(); ++s)
        write_labels(result.final_labels[s], out_dir / "labels_final" / (scenes[s].id + ".labels"));

    cfg.write_frozen(out_dir / "config.effective.conf");
    return summary;
}

void evaluate_run(const RunConfig& cfg, const fs::path& data_dir, const fs::path& run_dir)
{
    const std::vector<SampleScene> scenes = load_scenes(data_dir, cfg.read_options());
    const ClassVocabulary classes = vocabulary_of(scenes);
    const ModelParams model = load_model(run_dir / "checkpoint.bin");
    if (model.class_count != classes.size())
        fail(ErrorCode::invalid_argument, "checkpoint class count != dataset vocabulary");
    const CorrectorConfig corrector = cfg.corrector_config();

    ConfusionMatrix cm(classes.size());
    double noisy_acc_sum = 0.0, final_acc_sum = 0.0;
    size_t audited = 0;
    for (const SampleScene& scene : scenes) {
        if (!scene.clean_labels)
            fail(ErrorCode::missing_input, "scene " + scene.id + " has no clean labels");
        const Prediction pred = predict_scene(model, scene.points, corrector);
        cm.accumulate(confusion(*scene.clean_labels, pred.labels, classes.size()));

        noisy_acc_sum += label_accuracy(*scene.clean_labels, scene.noisy_labels);
        const fs::path final_path = run_dir / "labels_final" / (scene.id + ".labels");
        if (fs::exists(final_path)) {
            const LabelArray final_labels = read_labels(final_path);
            if (final_labels.size() != scene.point_count())
                fail(ErrorCode::length_mismatch, "labels_final size mismatch for " + scene.id);
            final_acc_sum += label_accuracy(*scene.clean_labels, final_labels);
            ++audited;
        }
    }

    const IouSummary iou = miou(cm);
    json eval_raw;
    eval_raw["miou"] = iou.mean;
    eval_raw["macc"] = macc(cm);
    json per_class;
    for (uint16_t c = 0; c < classes.size(); ++c) {
        if (iou.in_mean[c])
            per_class[classes.names[c]] = iou.per_class[c];
        else
            per_class[classes.names[c]] = nullptr;
    }
    eval_raw["per_class_iou"] = per_class;
    json quality;
    quality["noisy_vs_clean_accuracy"] = noisy_acc_sum / static_cast<double>(scenes.size());
    if (audited == scenes.size()) {
        const double final_acc = final_acc_sum / static_cast<double>(scenes.size());
        quality["final_vs_clean_accuracy"] = final_acc;
        quality["refurbish_gain"] =
            final_acc - noisy_acc_sum / static_cast<double>(scenes.size());
    }
    eval_raw["label_quality"] = quality;
    eval_raw["scenes"] = scenes.size();
    {
        std::ofstream out(run_dir / "eval_raw.json", std::ios::trunc);
        out << eval_raw.dump(2) << "\n";
    }
    cfg.write_frozen(run_dir / "config.evaluate.conf");
    emit_report(run_dir);
}

FitCurveReport fit_curve_run(const fs::path& csv_path, double threshold)
{
    std::ifstream in(csv_path);
    if (!in) fail(ErrorCode::io_failure, "cannot open " + csv_path.string());
    std::vector<double> series;
    std::string line;
    int expected_epoch = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (series.empty() && line.find("epoch") != std::string::npos) continue;  // header
        const size_t comma = line.find(',');
        if (comma == std::string::npos)
            fail(ErrorCode::malformed_file, csv_path.string() + ": expected epoch,miou rows");
        const int epoch = std::stoi(line.substr(0, comma));
        if (epoch != expected_epoch)
            fail(ErrorCode::malformed_file, "epochs must run 1..n without gaps");
        ++expected_epoch;
        series.push_back(std::stod(line.substr(comma + 1)));
    }

    FitCurveReport report;
    report.params = fit_curve(series);
    LearningCurve curve;
    curve.fit = report.params;
    for (size_t i = 0; i < series.size(); ++i) {
        const double t = static_cast<double>(i + 1);
        report.derivative.push_back(eval_derivative(report.params, t));
        curve.miou_series.push_back(series[i]);
        if (!report.trigger_epoch && eval_derivative(report.params, 1.0) > 0.0) {
            if (const auto fired = detect_correction(curve, threshold)) report.trigger_epoch = fired;
        }
    }
    return report;
}

void inspect_run(const fs::path& scene_dir, const ReadOptions& options, std::ostream& out,
                 bool as_json)
{
    const SampleScene scene = read_scene(scene_dir, options);
    Vec3 lo = scene.points.empty() ? Vec3{} : scene.points[0];
    Vec3 hi = lo;
    for (const Vec3& p : scene.points) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    std::vector<size_t> noisy_hist(scene.classes.size() + 1, 0);
    for (const uint16_t l : scene.noisy_labels)
        ++noisy_hist[l == kUnlabeledId ? scene.classes.size() : l];

    if (as_json) {
        json j;
        j["id"] = scene.id;
        j["points"] = scene.point_count();
        j["classes"] = scene.classes.names;
        j["bounds"] = {{"min", {lo.x, lo.y, lo.z}}, {"max", {hi.x, hi.y, hi.z}}};
        json hist;
        for (uint16_t c = 0; c < scene.classes.size(); ++c)
            hist[scene.classes.names[c]] = noisy_hist[c];
        hist["unlabeled"] = noisy_hist[scene.classes.size()];
        j["noisy_histogram"] = hist;
        if (scene.clean_labels)
            j["noisy_vs_clean_accuracy"] = label_accuracy(*scene.clean_labels, scene.noisy_labels);
        out << j.dump(2) << "\n";
        return;
    }

    out << "scene " << scene.id << ": " << scene.point_count() << " points, "
        << scene.classes.size() << " classes\n";
    out << "  bounds: [" << lo.x << ", " << lo.y << ", " << lo.z << "] .. [" << hi.x << ", "
        << hi.y << ", " << hi.z << "]\n";
    out << "  noisy labels:\n";
    for (uint16_t c = 0; c < scene.classes.size(); ++c)
        out << "    " << scene.classes.names[c] << ": " << noisy_hist[c] << "\n";
    out << "    unlabeled: " << noisy_hist[scene.classes.size()] << "\n";
    if (scene.clean_labels)
        out << "  noisy vs clean accuracy: "
            << label_accuracy(*scene.clean_labels, scene.noisy_labels) << "\n";
}

}  // namespace adaco
