#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "abt/model.hpp"
#include "abt/phantom.hpp"
#include "abt/volume.hpp"

namespace abt::train {

// One training sample: paired axial slices plus the {0,1} brain mask.
struct SlicePair {
    std::string subject_id;
    Image2D mri;
    Image2D pet;
    Image2D mask;
};

struct Dataset {
    std::vector<SlicePair> pairs;
};

// Appends every axial slice whose mask is non-empty; slices with an empty
// mask are excluded because the masked loss is undefined there.
void append_subject_slices(Dataset& dataset, const std::string& subject_id, const Volume& mri,
                           const Volume& pet_suvr, const BrainMask& mask);

struct TrainConfig {
    int epochs = 20;
    int batch_size = 4;
    std::uint64_t seed = 77;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int checkpoint_every = 10;  // epochs; 0 disables periodic checkpoints
    model::LossWeights loss_weights;
    model::GeneratorConfig gen;
    model::DiscriminatorConfig disc;
    // when set, periodic and final checkpoints are written here
    std::optional<std::filesystem::path> out_dir;
};

struct EpochLoss {
    int epoch = 0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_masked_l1 = 0.0;
};

struct TrainResult {
    model::Checkpoint checkpoint;  // includes optimizer state for resume
    std::vector<EpochLoss> loss_log;
    std::vector<std::filesystem::path> checkpoints_written;
};

// Alternating adversarial loop: per batch one discriminator update on the
// real pair and the detached fake pair, then one generator update on the
// adversarial plus masked-L1 objective. Fully deterministic for a given
// config seed, including across checkpoint/resume boundaries. A non-finite
// loss aborts with NonFiniteLoss; previously written checkpoints stay valid.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const model::Checkpoint* resume = nullptr);

// --- stratified splitting ---

struct StratumSummary {
    std::string name;  // e.g. "F/CN"
    int train_count = 0;
    int test_count = 0;
};

struct SplitManifest {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::vector<StratumSummary> strata;
};

// Per-(sex x impairment) stratum test quota of round(size * test_fraction),
// corrected by largest remainder (ties by stratum name) to hit the global
// round(n * test_fraction). Membership within a stratum is a seeded shuffle.
SplitManifest stratified_split(const std::vector<phantom::SubjectRecord>& cohort,
                               double test_fraction, std::uint64_t seed);

// Load-time hygiene: throws if any dataset pair belongs to a test subject.
void assert_no_test_leakage(const Dataset& dataset, const SplitManifest& split);

}  // namespace abt::train
