#include "adaco/history.hpp"

#include <cmath>
#include <fstream>

namespace adaco {

PredictionHistory::PredictionHistory(uint16_t num_classes, int capacity)
    : num_classes_(num_classes), capacity_(capacity)
{
    if (num_classes < 2) fail(ErrorCode::invalid_argument, "history needs at least 2 classes");
    if (capacity < 1) fail(ErrorCode::invalid_argument, "history capacity must be >= 1");
}

void PredictionHistory::record(const std::string& sample, const LabelArray& predictions)
{
    for (const uint16_t p : predictions)
        if (p >= num_classes_)
            fail(ErrorCode::label_out_of_range, "prediction outside class range");

    auto it = samples_.find(sample);
    if (it == samples_.end()) {
        SampleHistory h;
        h.n = predictions.size();
        h.ring.assign(static_cast<size_t>(capacity_) * h.n, 0);
        it = samples_.emplace(sample, std::move(h)).first;
    }
    SampleHistory& h = it->second;
    if (predictions.size() != h.n)
        fail(ErrorCode::length_mismatch, "prediction length changed between rounds");

    std::copy(predictions.begin(), predictions.end(),
              h.ring.begin() + static_cast<size_t>(h.head) * h.n);
    h.head = (h.head + 1) % capacity_;
    h.rounds = std::min(h.rounds + 1, capacity_);
}

const PredictionHistory::SampleHistory& PredictionHistory::require(const std::string& sample) const
{
    const auto it = samples_.find(sample);
    if (it == samples_.end()) fail(ErrorCode::invalid_argument, "unknown sample: " + sample);
    return it->second;
}

bool PredictionHistory::has_sample(const std::string& sample) const
{
    return samples_.count(sample) > 0;
}

int PredictionHistory::rounds(const std::string& sample) const
{
    return require(sample).rounds;
}

size_t PredictionHistory::point_count(const std::string& sample) const
{
    return require(sample).n;
}

void PredictionHistory::count_classes(const SampleHistory& h, uint32_t point,
                                      std::vector<uint32_t>& counts) const
{
    counts.assign(num_classes_, 0);
    for (int r = 0; r < h.rounds; ++r)
        ++counts[h.ring[static_cast<size_t>(r) * h.n + point]];
}

std::vector<double> PredictionHistory::class_distribution(const std::string& sample,
                                                          uint32_t point) const
{
    const SampleHistory& h = require(sample);
    if (h.rounds < 1) fail(ErrorCode::empty_batch, "history is empty");
    if (point >= h.n) fail(ErrorCode::invalid_argument, "point index out of range");

    std::vector<uint32_t> counts;
    count_classes(h, point, counts);
    std::vector<double> dist(num_classes_);
    for (size_t k = 0; k < dist.size(); ++k)
        dist[k] = static_cast<double>(counts[k]) / static_cast<double>(h.rounds);
    return dist;
}

double PredictionHistory::confidence(const std::string& sample, uint32_t point) const
{
    const std::vector<double> dist = class_distribution(sample, point);
    double entropy = 0.0;
    for (const double p : dist)
        if (p > 0.0) entropy -= p * std::log(p);
    return 1.0 - entropy / std::log(static_cast<double>(num_classes_));
}

ReliableSet PredictionHistory::reliable_set(const std::string& sample, double gamma) const
{
    const SampleHistory& h = require(sample);
    if (h.rounds < 1) fail(ErrorCode::empty_batch, "history is empty");

    const double log_k = std::log(static_cast<double>(num_classes_));
    ReliableSet out;
    std::vector<uint32_t> counts;
    for (uint32_t i = 0; i < h.n; ++i) {
        count_classes(h, i, counts);
        double entropy = 0.0;
        uint16_t mode = 0;
        uint32_t mode_count = 0;
        for (uint16_t k = 0; k < num_classes_; ++k) {
            if (counts[k] == 0) continue;
            const double p = static_cast<double>(counts[k]) / static_cast<double>(h.rounds);
            entropy -= p * std::log(p);
            if (counts[k] > mode_count) {  // strict: ties keep the lowest class
                mode_count = counts[k];
                mode = k;
            }
        }
        if (1.0 - entropy / log_k >= gamma) {
            out.indices.push_back(i);
            out.labels.push_back(mode);
        }
    }
    return out;
}

void PredictionHistory::dump(const std::string& sample, const std::filesystem::path& path) const
{
    const SampleHistory& h = require(sample);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());

    const auto put_u32 = [&](uint32_t v) {
        const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                              static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<uint32_t>(h.n));
    put_u32(static_cast<uint32_t>(h.rounds));

    // Rows oldest-first; the ring's oldest row sits at `head` once full.
    for (int r = 0; r < h.rounds; ++r) {
        const int slot = h.rounds < capacity_ ? r : (h.head + r) % capacity_;
        const uint16_t* row = h.ring.data() + static_cast<size_t>(slot) * h.n;
        for (size_t i = 0; i < h.n; ++i) {
            const uint8_t b[2] = {static_cast<uint8_t>(row[i]),
                                  static_cast<uint8_t>(row[i] >> 8)};
            out.write(reinterpret_cast<const char*>(b), 2);
        }
    }
}

}  // namespace adaco
