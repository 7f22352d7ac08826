#include "adaco/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "adaco/rng.hpp"

namespace adaco {

namespace {

std::string trim(const std::string& s)
{
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

enum class KeyType { integer, unsigned64, real, boolean, text };

const std::map<std::string, KeyType>& schema()
{
    static const std::map<std::string, KeyType> s = {
        {"seed", KeyType::unsigned64},
        {"threads", KeyType::integer},
        {"data.crop", KeyType::text},

        {"synth.scenes", KeyType::integer},
        {"synth.classes", KeyType::text},
        {"synth.objects_min", KeyType::integer},
        {"synth.objects_max", KeyType::integer},
        {"synth.points_min", KeyType::integer},
        {"synth.points_max", KeyType::integer},
        {"synth.ground_points_min", KeyType::integer},
        {"synth.ground_points_max", KeyType::integer},
        {"synth.ground_extent", KeyType::real},
        {"synth.noise.symmetric", KeyType::real},
        {"synth.noise.boundary_band", KeyType::real},
        {"synth.noise.boundary_rate", KeyType::real},
        {"synth.noise.unlabeled", KeyType::real},

        {"labelgen.voxel", KeyType::real},
        {"labelgen.adjacency", KeyType::integer},
        {"labelgen.nearest_depth", KeyType::boolean},

        {"corrector.derivative_threshold", KeyType::real},
        {"corrector.confidence_threshold", KeyType::real},
        {"corrector.history_cap", KeyType::integer},
        {"corrector.winner_divisor", KeyType::real},
        {"corrector.correct_once", KeyType::boolean},
        {"corrector.eps", KeyType::real},
        {"corrector.min_pts", KeyType::integer},
        {"corrector.block", KeyType::real},
        {"corrector.freeze_ground", KeyType::boolean},
        {"corrector.ground_iterations", KeyType::integer},
        {"corrector.ground_tol", KeyType::real},

        {"loss.nce_weight", KeyType::real},
        {"loss.mae_weight", KeyType::real},
        {"loss.ce_deweight", KeyType::real},
        {"loss.feature_mse", KeyType::boolean},

        {"train.epochs", KeyType::integer},
        {"train.lr", KeyType::real},
        {"train.batch", KeyType::integer},
        {"train.momentum", KeyType::real},
        {"train.weight_decay", KeyType::real},
        {"train.hidden", KeyType::integer},
        {"train.cosine_restarts", KeyType::boolean},
        {"train.mode", KeyType::text},          // adaco | ce-baseline
        {"train.correct_mode", KeyType::text},  // once | each-down
        {"train.corrections", KeyType::boolean},
    };
    return s;
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults()
{
    static const std::map<std::string, std::string> d = {
        {"seed", "0"},
        {"threads", "1"},
        {"data.crop", ""},

        {"synth.scenes", "30"},
        {"synth.classes", "ground,box,cylinder,pole,wall"},
        {"synth.objects_min", "8"},
        {"synth.objects_max", "12"},
        {"synth.points_min", "200"},
        {"synth.points_max", "260"},
        {"synth.ground_points_min", "2600"},
        {"synth.ground_points_max", "3000"},
        {"synth.ground_extent", "24.0"},
        {"synth.noise.symmetric", "0.3"},
        {"synth.noise.boundary_band", "0.4"},
        {"synth.noise.boundary_rate", "0.5"},
        {"synth.noise.unlabeled", "0.02"},

        {"labelgen.voxel", "0.05"},
        {"labelgen.adjacency", "2"},
        {"labelgen.nearest_depth", "false"},

        {"corrector.derivative_threshold", "0.9"},
        {"corrector.confidence_threshold", "0.9"},
        {"corrector.history_cap", "5"},
        {"corrector.winner_divisor", "3.0"},
        {"corrector.correct_once", "true"},
        {"corrector.eps", "0.6"},
        {"corrector.min_pts", "5"},
        {"corrector.block", "10.0"},
        {"corrector.freeze_ground", "false"},
        {"corrector.ground_iterations", "200"},
        {"corrector.ground_tol", "0.2"},

        {"loss.nce_weight", "100.0"},
        {"loss.mae_weight", "1.0"},
        {"loss.ce_deweight", "-0.99"},
        {"loss.feature_mse", "false"},

        {"train.epochs", "40"},
        {"train.lr", "0.01"},
        {"train.batch", "4096"},
        {"train.momentum", "0.9"},
        {"train.weight_decay", "0.0001"},
        {"train.hidden", "64"},
        {"train.cosine_restarts", "true"},
        {"train.mode", "adaco"},
        {"train.correct_mode", "once"},
        {"train.corrections", "true"},
    };
    return d;
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides)
{
    RunConfig cfg;
    cfg.values_ = defaults();

    // The only environment knob: a default thread cap, overridable by file
    // and flags.
    if (const char* env_threads = std::getenv("ADACO_THREADS"))
        cfg.set("threads", env_threads);

    if (file) {
        std::ifstream in(*file);
        if (!in) fail(ErrorCode::io_failure, "cannot open config " + file->string());
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty() || line.front() == '[') continue;  // section headers are cosmetic
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                fail(ErrorCode::malformed_file, file->string() + ":" + std::to_string(line_no) +
                                                    ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() > 1)
                value = value.substr(1, value.size() - 2);
            cfg.set(key, value);
        }
    }
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    cfg.validate();
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    if (!schema().count(key)) fail(ErrorCode::invalid_argument, "unknown config key: " + key);
    values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::invalid_argument, "unknown config key: " + key);
    return it->second;
}

int RunConfig::get_int(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        fail(ErrorCode::invalid_argument, key + ": expected an integer, got \"" + v + "\"");
    }
}

uint64_t RunConfig::get_u64(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        fail(ErrorCode::invalid_argument, key + ": expected an unsigned integer, got \"" + v + "\"");
    }
}

double RunConfig::get_double(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        fail(ErrorCode::invalid_argument, key + ": expected a number, got \"" + v + "\"");
    }
}

bool RunConfig::get_bool(const std::string& key) const
{
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorCode::invalid_argument, key + ": expected true/false, got \"" + v + "\"");
}

void RunConfig::validate() const
{
    for (const auto& [key, type] : schema()) {
        switch (type) {
            case KeyType::integer: get_int(key); break;
            case KeyType::unsigned64: get_u64(key); break;
            case KeyType::real: get_double(key); break;
            case KeyType::boolean: get_bool(key); break;
            case KeyType::text: get(key); break;
        }
    }
    const std::string& mode = get("train.mode");
    if (mode != "adaco" && mode != "ce-baseline")
        fail(ErrorCode::invalid_argument, "train.mode must be adaco or ce-baseline");
    const std::string& cmode = get("train.correct_mode");
    if (cmode != "once" && cmode != "each-down")
        fail(ErrorCode::invalid_argument, "train.correct_mode must be once or each-down");
    read_options();  // parses the crop spec
}

void RunConfig::write_frozen(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
    for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
}

SynthConfig RunConfig::synth_config() const
{
    SynthConfig cfg;
    cfg.n_scenes = get_int("synth.scenes");
    std::stringstream names(get("synth.classes"));
    std::string name;
    while (std::getline(names, name, ',')) {
        name = trim(name);
        if (!name.empty()) cfg.classes.names.push_back(name);
    }
    cfg.objects_per_scene = {get_int("synth.objects_min"), get_int("synth.objects_max")};
    cfg.points_per_object = {get_int("synth.points_min"), get_int("synth.points_max")};
    cfg.ground_points = {get_int("synth.ground_points_min"), get_int("synth.ground_points_max")};
    cfg.ground_extent = get_double("synth.ground_extent");
    cfg.noise.symmetric_rate = get_double("synth.noise.symmetric");
    cfg.noise.boundary_band = get_double("synth.noise.boundary_band");
    cfg.noise.boundary_rate = get_double("synth.noise.boundary_rate");
    cfg.noise.unlabeled_rate = get_double("synth.noise.unlabeled");
    cfg.rng_seed = seed();
    cfg.validate();
    return cfg;
}

CorrectorConfig RunConfig::corrector_config() const
{
    CorrectorConfig cfg;
    cfg.derivative_threshold = get_double("corrector.derivative_threshold");
    cfg.confidence_threshold = get_double("corrector.confidence_threshold");
    cfg.history_cap = get_int("corrector.history_cap");
    cfg.winner_divisor = get_double("corrector.winner_divisor");
    cfg.correct_once = get_bool("corrector.correct_once");
    cfg.eps = get_double("corrector.eps");
    cfg.min_pts = get_int("corrector.min_pts");
    cfg.block = get_double("corrector.block");
    cfg.freeze_ground = get_bool("corrector.freeze_ground");
    cfg.ground_iterations = get_int("corrector.ground_iterations");
    cfg.ground_tol = get_double("corrector.ground_tol");
    cfg.rng_seed = mix64(seed(), fnv1a64("corrector"));
    cfg.validate();
    return cfg;
}

LossConfig RunConfig::loss_config() const
{
    LossConfig cfg;
    cfg.nce_weight = get_double("loss.nce_weight");
    cfg.mae_weight = get_double("loss.mae_weight");
    cfg.ce_deweight = get_double("loss.ce_deweight");
    cfg.use_feature_mse = get_bool("loss.feature_mse");
    return cfg;
}

TrainConfig RunConfig::train_config() const
{
    TrainConfig cfg;
    cfg.epochs = get_int("train.epochs");
    cfg.learning_rate = get_double("train.lr");
    cfg.batch_size = static_cast<size_t>(get_int("train.batch"));
    cfg.momentum = get_double("train.momentum");
    cfg.weight_decay = get_double("train.weight_decay");
    cfg.seed = seed();
    cfg.cosine_restarts = get_bool("train.cosine_restarts");
    cfg.hidden_dim = get_int("train.hidden");
    cfg.threads = threads();
    cfg.corrections_enabled = get_bool("train.corrections") && get("train.mode") == "adaco";
    cfg.correct_mode =
        get("train.correct_mode") == "each-down" ? CorrectMode::each_down : CorrectMode::once;
    cfg.loss_mode =
        get("train.mode") == "ce-baseline" ? TrainLossMode::ce_only : TrainLossMode::arl;
    cfg.corrector = corrector_config();
    cfg.loss = loss_config();
    cfg.validate();
    return cfg;
}

ReadOptions RunConfig::read_options() const
{
    ReadOptions opts;
    const std::string& crop = get("data.crop");
    if (crop.empty()) return opts;
    // "x0,y0,z0:x1,y1,z1"
    const size_t colon = crop.find(':');
    if (colon == std::string::npos)
        fail(ErrorCode::invalid_argument, "data.crop must look like x0,y0,z0:x1,y1,z1");
    const auto parse3 = [&](const std::string& s) {
        std::stringstream ss(s);
        std::string part;
        std::vector<double> v;
        while (std::getline(ss, part, ',')) v.push_back(std::stod(trim(part)));
        if (v.size() != 3) fail(ErrorCode::invalid_argument, "data.crop needs 3 coords per corner");
        return Vec3{v[0], v[1], v[2]};
    };
    opts.crop = {parse3(crop.substr(0, colon)), parse3(crop.substr(colon + 1))};
    return opts;
}

}  // namespace adaco
