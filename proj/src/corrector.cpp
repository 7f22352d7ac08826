#include "adaco/corrector.hpp"

#include <algorithm>

#include <json.hpp>

namespace adaco {

uint32_t FrequencyVector::max_count() const
{
    uint32_t best = 0;
    for (const uint32_t c : counts) best = std::max(best, c);
    return best;
}

uint64_t& CorrectionReport::flip(uint16_t from, uint16_t to)
{
    const size_t side = static_cast<size_t>(num_classes) + 1;
    const size_t r = from == kUnlabeledId ? num_classes : from;
    const size_t c = to == kUnlabeledId ? num_classes : to;
    return flips[r * side + c];
}

uint64_t CorrectionReport::flip(uint16_t from, uint16_t to) const
{
    return const_cast<CorrectionReport*>(this)->flip(from, to);
}

std::string CorrectionReport::to_json_line() const
{
    nlohmann::json j;
    j["sample_id"] = sample_id;
    j["correction_epoch"] = correction_epoch;
    j["n_reliable"] = n_reliable;
    j["n_clusters_touched"] = n_clusters_touched;
    j["n_points_relabeled"] = n_points_relabeled;
    j["flips"] = flips;
    j["num_classes"] = num_classes;
    return j.dump();
}

FrequencyVector cluster_frequency(const std::vector<uint32_t>& cluster_members,
                                  const ReliableSet& reliable, uint16_t num_classes)
{
    FrequencyVector freq;
    freq.counts.assign(num_classes, 0);
    // Both index lists are sorted; intersect by merge.
    size_t a = 0, b = 0;
    while (a < cluster_members.size() && b < reliable.indices.size()) {
        if (cluster_members[a] < reliable.indices[b]) {
            ++a;
        } else if (cluster_members[a] > reliable.indices[b]) {
            ++b;
        } else {
            ++freq.counts[reliable.labels[b]];
            ++a;
            ++b;
        }
    }
    return freq;
}

std::vector<uint16_t> winner_candidates(const FrequencyVector& freq, double omega)
{
    if (!(omega >= 1.0)) fail(ErrorCode::invalid_argument, "omega must be >= 1");
    std::vector<uint16_t> out;
    const double bar = static_cast<double>(freq.max_count()) / omega;
    for (uint16_t k = 0; k < freq.counts.size(); ++k)
        if (freq.counts[k] > 0 && static_cast<double>(freq.counts[k]) >= bar) out.push_back(k);
    return out;
}

std::optional<uint16_t> winner_label(const FrequencyVector& freq, double omega, Rng& rng)
{
    const std::vector<uint16_t> candidates = winner_candidates(freq, omega);
    if (candidates.empty()) return std::nullopt;
    return candidates[rng.uniform_int(candidates.size())];
}

RefurbishResult refurbish_labels(const LabelArray& current, const ClusterSet& clusters,
                                 const ReliableSet& reliable, const CorrectorConfig& config,
                                 uint16_t num_classes, const std::string& sample_id, int epoch)
{
    if (clusters.assignment.size() != current.size())
        fail(ErrorCode::length_mismatch, "cluster assignment length != label count");
    for (const uint32_t idx : reliable.indices)
        if (idx >= current.size())
            fail(ErrorCode::length_mismatch, "reliable index out of range");

    RefurbishResult result;
    result.labels = current;
    CorrectionReport& report = result.report;
    report.sample_id = sample_id;
    report.correction_epoch = epoch;
    report.n_reliable = reliable.indices.size();
    report.num_classes = num_classes;
    report.flips.assign((static_cast<size_t>(num_classes) + 1) * (num_classes + 1), 0);

    Rng rng(mix64(config.rng_seed, fnv1a64(sample_id)));

    const auto relabel = [&](uint32_t idx, uint16_t label) {
        if (config.freeze_ground && clusters.assignment[idx] == ClusterSet::kExcluded) return;
        report.flip(result.labels[idx], label) += 1;
        result.labels[idx] = label;
    };

    // Cluster-level voting over the reliable intersections.
    const std::vector<std::vector<uint32_t>> members = clusters.members();
    for (const auto& cluster : members) {
        const FrequencyVector freq = cluster_frequency(cluster, reliable, num_classes);
        const std::optional<uint16_t> winner = winner_label(freq, config.winner_divisor, rng);
        if (!winner) continue;
        ++report.n_clusters_touched;
        for (const uint32_t idx : cluster) relabel(idx, *winner);
    }

    // Reliable points outside any cluster carry their own reliable label.
    for (size_t r = 0; r < reliable.indices.size(); ++r) {
        const uint32_t idx = reliable.indices[r];
        if (clusters.assignment[idx] >= 0) continue;
        relabel(idx, reliable.labels[r]);
    }

    size_t relabeled = 0;
    const size_t side = static_cast<size_t>(num_classes) + 1;
    for (size_t r = 0; r < side; ++r)
        for (size_t c = 0; c < side; ++c)
            if (r != c) relabeled += report.flips[r * side + c];
    report.n_points_relabeled = relabeled;
    return result;
}

CorrectionReport refurbish_sample(SampleScene& scene, const ClusterSet& clusters,
                                  const ReliableSet& reliable, const CorrectorConfig& config,
                                  int epoch)
{
    RefurbishResult result = refurbish_labels(scene.noisy_labels, clusters, reliable, config,
                                              scene.classes.size(), scene.id, epoch);
    scene.noisy_labels = std::move(result.labels);
    return result.report;
}

const LabelArray& apply_full_supervision(const SampleScene& scene)
{
    return scene.noisy_labels;
}

}  // namespace adaco
