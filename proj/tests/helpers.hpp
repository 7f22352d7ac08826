#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "adaco/rng.hpp"
#include "adaco/scene.hpp"

namespace adaco::testing {

// Unique scratch directory under the system temp path, removed on scope exit.
class TempDir {
  public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("adaco_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline ClassVocabulary small_vocab(uint16_t k)
{
    ClassVocabulary v;
    for (uint16_t i = 0; i < k; ++i) v.names.push_back("class_" + std::to_string(i));
    return v;
}

// Random scene whose coordinates are exactly representable as float32 so
// serialization round-trips are exact.
inline SampleScene random_scene(uint64_t seed, size_t n, uint16_t k)
{
    Rng rng(seed);
    SampleScene scene;
    scene.id = "rand_" + std::to_string(seed);
    scene.classes = small_vocab(k);
    scene.pose = Mat4::rotation_z(rng.uniform(-1.0, 1.0)) *
                 Mat4::translation({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)});
    scene.noisy_labels.resize(n);
    LabelArray clean(n);
    for (size_t i = 0; i < n; ++i) {
        scene.points.push_back({static_cast<float>(rng.uniform(-50, 50)),
                                static_cast<float>(rng.uniform(-50, 50)),
                                static_cast<float>(rng.uniform(-4, 4))});
        clean[i] = static_cast<uint16_t>(rng.uniform_int(k));
        scene.noisy_labels[i] = rng.uniform() < 0.05
                                    ? kUnlabeledId
                                    : static_cast<uint16_t>(rng.uniform_int(k));
    }
    scene.clean_labels = clean;
    return scene;
}

}  // namespace adaco::testing
