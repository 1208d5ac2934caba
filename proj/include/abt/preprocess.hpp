#pragma once

#include <vector>

#include "abt/volume.hpp"

namespace abt::prep {

// Voxelwise sum of every frame whose midpoint time is >= window_start_min.
// Output units stay arbitrary; suvr_normalize applies the reference-region
// scaling afterwards. Throws NoQualifyingFrames when the window is empty.
Volume sum_late_frames(const FrameSequence& frames, double window_start_min);

// Divides by the mean value inside ref and tags the result as SUVR.
Volume suvr_normalize(const Volume& vol, const BrainMask& ref);

// White-core surrogate used as the SUVR reference region: voxels inside the
// brain mask whose intensity is at or above the given in-mask quantile.
BrainMask reference_region(const Volume& mri, const BrainMask& brain, double quantile = 0.75);

// Otsu threshold, largest 6-connected component, one pass of 3x3x3 closing.
BrainMask extract_brain_mask(const Volume& vol);

// Head support at a fixed fraction of the maximum intensity (largest
// 6-connected component). Used as the registration channel: unlike Otsu it
// cuts at the same anatomical boundary in both MRI and PET. The default
// fraction sits near half the boundary-tissue level, which keeps the
// partial-volume edge of a resampled volume localized on the true boundary.
BrainMask support_mask(const Volume& vol, double max_fraction = 0.35);

// Applies the mask (zero outside).
Volume apply_mask(const Volume& vol, const BrainMask& mask);

struct RegistrationResult {
    AffineTransform transform;
    bool converged = false;
    double final_mse = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;  // accepted objective values, non-increasing
};

struct RegistrationOptions {
    int max_iters = 500;
    double rel_tolerance = 1e-6;
    double translation_scale_mm = 1.0;  // parameter preconditioning
    double matrix_scale = 0.02;
    double fd_step = 0.05;              // central-difference step, scaled units
    double initial_step = 1.0;          // line-search start, scaled units
    // 3-tap z blur applied to both volumes before the metric; anti-aliases
    // thin structures on grids that are coarse along z. The returned
    // transform still maps the original volumes.
    int axial_smooth_passes = 0;
    // metric subsampling in x and y (1 = every voxel)
    int sample_stride_xy = 1;
};

// Two-stage intensity registration: translation only (3 parameters), then the
// full affine (12 parameters), both minimizing the mean squared intensity
// error of the resampled moving volume against fixed. Gradients come from
// central differences on the parameters; steps use backtracking halving. A
// run that exhausts max_iters returns best-so-far with converged=false.
RegistrationResult register_affine(const Volume& moving, const Volume& fixed,
                                   const AffineTransform& init,
                                   const RegistrationOptions& opts = {});

// Trilinear resample of vol through t (pulls via the inverse transform);
// voxels mapping outside the field of view are 0.
Volume resample(const Volume& vol, const AffineTransform& t, std::array<int, 3> out_dims);

// Nearest-neighbour variant for masks.
BrainMask resample_mask(const BrainMask& mask, std::array<double, 3> spacing_mm,
                        const AffineTransform& t, std::array<int, 3> out_dims);

// Axial split: slice k is vol[:,:,k]; stacking the result reproduces the
// volume bit for bit.
std::vector<Image2D> slice_axial(const Volume& vol);
Volume stack_axial(const std::vector<Image2D>& slices, std::array<double, 3> spacing_mm,
                   VolumeUnits units);

// Registration settings the pipeline uses: z anti-aliasing for the coarse
// axis plus 2x metric subsampling in-plane.
RegistrationOptions pipeline_registration_options();

// Per-subject preprocessing chain: late-window sum, brain extraction,
// registration of the PET onto the MRI grid via a rendered PET-like
// reference, SUVR scaling.
struct SubjectPreproc {
    Volume pet_suvr;
    BrainMask brain_mask;  // MRI-derived; the mask used for training and eval
    RegistrationResult registration;
};

SubjectPreproc preprocess_subject(const Volume& mri, const FrameSequence& pet_frames,
                                  double window_start_min,
                                  const RegistrationOptions& reg_opts =
                                      pipeline_registration_options());

}  // namespace abt::prep
