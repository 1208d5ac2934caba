#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abt/volume.hpp"

namespace abt::phantom {

enum class Sex { F, M };
enum class Impairment { CN, impaired, AD };

std::string to_string(Sex s);
std::string to_string(Impairment i);
Sex sex_from_string(const std::string& s);
Impairment impairment_from_string(const std::string& s);

struct SubjectRecord {
    std::string id;
    Sex sex = Sex::F;
    Impairment impairment = Impairment::CN;
    double age_factor = 0.5;  // [0,1]
    double atrophy = 0.0;     // [0,1]
    double burden = 0.0;      // [0, burden_max]
    std::uint64_t seed = 0;
};

struct PhantomConfig {
    std::array<int, 3> dims{64, 64, 16};
    std::array<double, 3> spacing_mm{2.0, 2.0, 2.0};
    double uptake_gain = 0.5;  // gray SUVR = 1 + uptake_gain * burden
    double burden_max = 2.0;
    double mri_noise = 0.02;
    double pet_noise = 0.01;
    bool misalign = true;
    double max_shift_voxels = 1.5;   // per-axis synthetic PET offset
    double max_scale_delta = 0.08;   // diagonal perturbation of the linear part
    double max_shear_delta = 0.05;   // off-diagonal perturbation
    int frame_count = 6;
    double scan_minutes = 60.0;
};

struct SubjectVolumes {
    Volume mri;                  // arbitrary units, aligned to the grid
    FrameSequence pet_frames;    // arbitrary units; misaligned when enabled
    Volume truth_mask;           // exact brain support of the MRI (1 inside)
    AffineTransform pet_offset;  // ground-truth misalignment (identity if off)
};

// Deterministic paired phantom: nested-ellipsoid MRI (background, CSF core,
// white matter, cortical gray ribbon), a dynamic PET whose late-window gray
// SUVR equals 1 + uptake_gain * burden, and the exact brain support mask.
// Atrophy thins the gray ribbon and dilates the ventricle.
SubjectVolumes generate_subject(const SubjectRecord& record, const PhantomConfig& config);

struct StrataProportions {
    double female = 0.5;  // male share is 1 - female
    double cn = 0.6;
    double impaired = 0.2;
    double ad = 0.2;
};

// Stratified cohort records: per-(sex x impairment) counts follow the
// proportions by largest remainder (ties broken by lexicographic stratum
// name), covariates drawn per subject from seeded streams. burden follows
// clip(base(impairment) + 0.8*atrophy + N(0,0.1), 0, burden_max) with base
// CN=0.1, impaired=0.8, AD=1.5.
std::vector<SubjectRecord> generate_cohort(int n, const StrataProportions& strata,
                                           std::uint64_t seed,
                                           double burden_max = 2.0);

// Canonical mid-atrophy phantom at a fixed seed; the registration template.
SubjectVolumes canonical_template(const PhantomConfig& config);

}  // namespace abt::phantom
