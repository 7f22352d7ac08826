#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adaco/scene.hpp"
#include "adaco/synth.hpp"
#include "adaco/trainer.hpp"

namespace adaco {

// Flat key=value configuration with precedence defaults < file < overrides.
// Unknown keys are rejected; a frozen copy of the effective configuration is
// written next to every run's outputs.
class RunConfig {
  public:
    static const std::map<std::string, std::string>& defaults();

    static RunConfig load(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    void set(const std::string& key, const std::string& value);

    // Type-checks every entry against the schema.
    void validate() const;

    void write_frozen(const std::filesystem::path& path) const;

    SynthConfig synth_config() const;
    CorrectorConfig corrector_config() const;
    LossConfig loss_config() const;
    TrainConfig train_config() const;
    ReadOptions read_options() const;
    uint64_t seed() const { return get_u64("seed"); }
    int threads() const { return get_int("threads"); }

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace adaco
