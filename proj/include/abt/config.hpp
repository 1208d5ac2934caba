#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "abt/model.hpp"
#include "abt/phantom.hpp"
#include "abt/preprocess.hpp"

namespace abt::config {

// Whole-pipeline configuration. Every field has a default; unknown keys in a
// config file are rejected with the offending key named.
struct RunConfig {
    std::uint64_t seed = 77;
    std::filesystem::path data_dir = "data";
    std::filesystem::path run_dir = "runs/default";

    // phantom
    int subjects = 200;
    phantom::PhantomConfig phantom;
    phantom::StrataProportions strata;

    // preprocess
    double late_window_start_min = 30.0;
    prep::RegistrationOptions registration;  // axial_smooth_passes defaults to 2 here

    // model
    model::GeneratorConfig gen;
    model::DiscriminatorConfig disc;

    // train
    int epochs = 20;
    int batch_size = 4;
    double test_fraction = 0.2;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    model::LossWeights loss_weights;
    int checkpoint_every = 10;

    // eval / report
    bool difference_maps = false;
    int report_subjects = 4;

    // derived: SSIM/PSNR data range fixed at the phantom model maximum
    double data_range() const { return 1.0 + phantom.uptake_gain * phantom.burden_max; }
};

RunConfig default_config();

// Strict parse: unknown keys anywhere raise ConfigParseError naming the key.
RunConfig parse_config_text(const std::string& text, const std::string& source_name);
RunConfig load_config_file(const std::filesystem::path& path);

std::string config_to_text(const RunConfig& config);

}  // namespace abt::config
