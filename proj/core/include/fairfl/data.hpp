#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fairfl {

// One observation: feature vector (optionally containing the sensitive
// attribute as a coordinate), the sensitive attribute itself, and the label.
struct LabeledSample {
    std::vector<double> features;
    int sensitive = 0;  // in {0, 1}
    int label = 0;      // in {0, 1}
};

struct Dataset {
    std::vector<LabeledSample> samples;
    int input_dim = 0;

    std::size_t size() const { return samples.size(); }

    // Checks non-emptiness, per-sample dimension agreement, finiteness and
    // binary sensitive/label values. Throws DataFormatError on violation.
    void validate() const;
};

// Synthetic tabular generator. Latent standard-normal coordinates drive the
// label through a logistic ground truth with a bias_strength * (2S - 1)
// additive logit term; the observed second half of the coordinates ("proxy"
// block) is shifted by correlation * (2S - 1), so S leaks into the features
// even when the sensitive column is dropped.
struct SynthConfig {
    int n_samples = 1000;
    int input_dim = 10;             // full feature length, incl. S column unless dropped
    double group0_fraction = 0.5;   // P(S = 0), in (0, 1)
    double bias_strength = 0.0;     // [0, 1]
    double correlation = 0.0;       // [0, 1], strength of proxy-block shift
    double label_noise = 0.0;       // [0, 0.5), independent flip probability
    bool drop_sensitive_feature = false;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class PartitionScheme { iid, group_skew };

struct PartitionConfig {
    int n_clients = 2;
    PartitionScheme scheme = PartitionScheme::iid;
    double alpha = 0.5;  // Dirichlet concentration for group_skew
    std::uint64_t seed = 0;

    void validate() const;
};

struct PartitionResult {
    std::vector<Dataset> shards;
    // Clients left without any sample of some sensitive group (only possible
    // when that group has fewer samples than there are clients).
    std::vector<int> clients_missing_group;
};

Dataset generate_synthetic(const SynthConfig& cfg);

// CSV schema: header "f0,...,f{d-1},sensitive,label", UTF-8, '.' decimal
// separator, LF or CRLF line endings.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& data, const std::string& path);

// Splits a dataset into n_clients disjoint shards whose union is the input.
PartitionResult partition(const Dataset& data, const PartitionConfig& cfg);

// Deterministic train/eval split; eval_fraction of the samples (rounded
// down, at least one sample kept on each side) goes to the second dataset.
std::pair<Dataset, Dataset> train_eval_split(const Dataset& data, double eval_fraction,
                                             std::uint64_t seed);

}  // namespace fairfl
