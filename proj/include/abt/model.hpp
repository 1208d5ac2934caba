#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "abt/adam.hpp"
#include "abt/ops.hpp"
#include "abt/params.hpp"
#include "abt/volume.hpp"

namespace abt::model {

// Encoder-decoder translator. No normalization layers anywhere: the output
// must stay on the quantitative SUVR scale, which normalization would erase.
struct GeneratorConfig {
    int in_channels = 1;
    int out_channels = 1;
    int base_filters = 16;
    int depth = 3;  // stride-2 stages; the slice side must be divisible by 2^depth
    bool use_skips = true;
    double dropout_rate = 0.5;  // applied to the two innermost decoder stages
};

// Conditioned classifier: stride-2 conv stack on the (MRI, PET) pair, one
// sigmoid probability per item.
struct DiscriminatorConfig {
    int in_channels = 2;
    int base_filters = 16;
    int depth = 3;
    int input_size = 64;  // slice side; fixes the linear head size
};

struct LossWeights {
    double lambda_masked_l1 = 100.0;
    double lambda_adv = 1.0;
};

// Gaussian(0, 0.02) weights, zero biases, reproducible per seed.
ModelParams init_generator(const GeneratorConfig& config, std::uint64_t seed);
ModelParams init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

// Dropout keying: the mask for a layer depends only on (seed, layer, step),
// so a resumed run replays the identical masks.
struct DropoutContext {
    bool training = false;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

// mri [N,in,H,W] -> PET estimate [N,out,H,W], non-negative (final relu).
Tensor generator_forward(const ModelParams& params, const GeneratorConfig& config,
                         const Tensor& mri, const DropoutContext& ctx = {});

// (mri, pet) [N,1,H,W] each -> probability real in (0,1), shape [N,1].
Tensor discriminator_forward(const ModelParams& params, const DiscriminatorConfig& config,
                             const Tensor& mri, const Tensor& pet);

// sum(|pred - target| * mask) / sum(mask); the loss is blind to anything
// outside the mask. mask holds {0,1} and does not require gradients.
Tensor masked_l1_loss(const Tensor& pred, const Tensor& target, const Tensor& mask);

struct AdvLosses {
    Tensor d_loss;      // -mean log D(real) - mean log(1 - D(fake))
    Tensor g_adv_loss;  // -mean log D(fake)
};

// Probabilities are clamped to [1e-7, 1-1e-7] before the logs.
AdvLosses adversarial_losses(const Tensor& d_real, const Tensor& d_fake);

Tensor generator_objective(const Tensor& g_adv_loss, const Tensor& masked_l1,
                           const LossWeights& weights);

// Structural audit of a parameter set by name and shape.
struct ParamAudit {
    int conv_tensors = 0;
    int tconv_tensors = 0;
    int linear_tensors = 0;
    int norm_or_unknown_tensors = 0;
};
ParamAudit audit_params(const ModelParams& params);

// --- checkpoints ---
// File layout: "ABTC" | u32 LE header length | header JSON | f64 LE payload.
// Round-trips bit-exactly, including optimizer state when present.
struct TrainState {
    std::int64_t epoch = 0;
    std::int64_t global_step = 0;
    std::uint64_t seed = 0;
    AdamState gen_opt;
    AdamState disc_opt;
};

struct Checkpoint {
    GeneratorConfig gen_config;
    DiscriminatorConfig disc_config;
    ModelParams generator;
    ModelParams discriminator;
    bool has_train_state = false;
    TrainState train_state;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- slice/tensor adapters ---
Tensor tensor_from_images(const std::vector<const Image2D*>& images);
Image2D image_from_tensor(const Tensor& t, int batch_index, int channel = 0);

}  // namespace abt::model
