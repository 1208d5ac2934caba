#pragma once

#include <functional>
#include <string>
#include <vector>

#include "abt/volume.hpp"

namespace abt::eval {

// Windowed SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01*range)^2,
// C2=(0.03*range)^2, averaged over windows whose center lies inside the mask.
// Window taps falling outside the image are dropped and the remaining
// weights renormalized.
double ssim(const Image2D& x, const Image2D& y, const Image2D& mask, double data_range);

// 10*log10(range^2 / masked MSE), capped at 100 dB (the zero-MSE sentinel).
double psnr(const Image2D& x, const Image2D& y, const Image2D& mask, double data_range);
constexpr double kPsnrCapDb = 100.0;

// Mean voxel value inside the mask.
double global_suvr(const Volume& pet, const BrainMask& mask);

// Coefficient of determination of predicted against true: 1 - SSres/SStot.
double r_squared(const std::vector<std::pair<double, double>>& pairs);

// (synth - true) inside the mask, zero outside.
Volume difference_map(const Volume& true_pet, const Volume& synth_pet, const BrainMask& mask);
Image2D difference_map(const Image2D& true_pet, const Image2D& synth_pet, const Image2D& mask);

struct MetricsRecord {
    std::string subject_id;
    double ssim = 0.0;
    double psnr_db = 0.0;
    double suvr_true = 0.0;
    double suvr_synth = 0.0;
};

struct Histogram {
    std::vector<double> edges;  // bin_count + 1 edges, uniform
    std::vector<int> counts;
};

struct CohortReport {
    std::vector<MetricsRecord> records;
    Histogram ssim_histogram;
    Histogram psnr_histogram;
    double r_squared = 0.0;
    double mean_ssim = 0.0;
    double std_ssim = 0.0;
    double mean_psnr = 0.0;
    double std_psnr = 0.0;
};

// One evaluation subject: preprocessed volumes plus the mask.
struct SubjectData {
    std::string subject_id;
    Volume mri;
    Volume pet_suvr;
    BrainMask mask;
};

// Produces the synthetic PET volume for a subject; the production pipeline
// plugs the generator in here, tests may substitute an oracle.
using Synthesizer = std::function<Volume(const SubjectData&)>;

// Per-subject metrics: slice SSIM/PSNR averaged over non-empty mask slices,
// weighted by mask size; global SUVR over the 3D mask.
MetricsRecord evaluate_subject(const SubjectData& subject, const Volume& synth,
                               double data_range);

// Whole-cohort evaluation: per-subject records, 20-bin histograms over the
// observed range, R-squared over the global SUVR pairs.
CohortReport evaluate_cohort(const std::vector<SubjectData>& subjects,
                             const Synthesizer& synthesize, double data_range);

Histogram make_histogram(const std::vector<double>& values, int bins = 20);

}  // namespace abt::eval
