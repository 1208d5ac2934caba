#include "abt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "abt/preprocess.hpp"
#include "abt/rng.hpp"

namespace abt::phantom {

std::string to_string(Sex s) { return s == Sex::F ? "F" : "M"; }

std::string to_string(Impairment i) {
    switch (i) {
    case Impairment::CN: return "CN";
    case Impairment::impaired: return "impaired";
    case Impairment::AD: return "AD";
    }
    return "CN";
}

Sex sex_from_string(const std::string& s) {
    if (s == "F") return Sex::F;
    if (s == "M") return Sex::M;
    throw InvalidProportions("unknown sex label: " + s);
}

Impairment impairment_from_string(const std::string& s) {
    if (s == "CN") return Impairment::CN;
    if (s == "impaired") return Impairment::impaired;
    if (s == "AD") return Impairment::AD;
    throw InvalidProportions("unknown impairment label: " + s);
}

namespace {

struct Ellipsoid {
    std::array<double, 3> center;     // voxel coordinates
    std::array<double, 3> semi_axes;  // voxels

    double rho2(double x, double y, double z) const {
        const double dx = (x - center[0]) / semi_axes[0];
        const double dy = (y - center[1]) / semi_axes[1];
        const double dz = (z - center[2]) / semi_axes[2];
        return dx * dx + dy * dy + dz * dz;
    }
};

enum class TissueLabel : std::uint8_t { background = 0, csf = 1, gray = 2, white = 3 };

struct Anatomy {
    Ellipsoid brain;
    Ellipsoid ventricle;
    double gray_inner;  // normalized radius where the gray ribbon starts
};

Anatomy make_anatomy(const SubjectRecord& rec, const PhantomConfig& cfg, double size_factor) {
    Anatomy a;
    a.brain.center = {(cfg.dims[0] - 1) / 2.0, (cfg.dims[1] - 1) / 2.0,
                      (cfg.dims[2] - 1) / 2.0};
    // z stays clear of the field-of-view edge even under the synthetic offset
    a.brain.semi_axes = {0.38 * cfg.dims[0] * size_factor, 0.42 * cfg.dims[1] * size_factor,
                         0.34 * cfg.dims[2] * size_factor};
    const double vent = 0.20 + 0.14 * rec.atrophy;  // atrophy dilates the ventricle
    a.ventricle.center = a.brain.center;
    a.ventricle.semi_axes = {0.80 * vent * a.brain.semi_axes[0],
                             1.25 * vent * a.brain.semi_axes[1],
                             0.90 * vent * a.brain.semi_axes[2]};
    const double thickness = 0.26 * (1.0 - 0.55 * rec.atrophy);  // atrophy thins the ribbon
    a.gray_inner = 1.0 - thickness;
    return a;
}

TissueLabel label_at(const Anatomy& a, double x, double y, double z) {
    const double rb2 = a.brain.rho2(x, y, z);
    if (rb2 > 1.0) return TissueLabel::background;
    if (a.ventricle.rho2(x, y, z) <= 1.0) return TissueLabel::csf;
    if (rb2 > a.gray_inner * a.gray_inner) return TissueLabel::gray;
    return TissueLabel::white;
}

// MRI tissue intensities (T1-like ordering: white brightest).
double mri_value(TissueLabel t) {
    switch (t) {
    case TissueLabel::background: return 0.0;
    case TissueLabel::csf: return 0.28;
    case TissueLabel::gray: return 0.65;
    case TissueLabel::white: return 0.95;
    }
    return 0.0;
}

// PET amplitudes relative to the white-matter reference; the shared kinetic
// curve cancels in the SUVR ratio.
double pet_amplitude(TissueLabel t, double burden, double uptake_gain) {
    switch (t) {
    case TissueLabel::background: return 0.0;
    case TissueLabel::csf: return 0.25;
    case TissueLabel::gray: return 1.0 + uptake_gain * burden;
    case TissueLabel::white: return 1.0;
    }
    return 0.0;
}

// Two-compartment-style time-activity shape shared by every tissue.
double kinetic(double t_min) {
    return (1.0 - std::exp(-t_min / 8.0)) * std::exp(-t_min / 90.0);
}

}  // namespace

SubjectVolumes generate_subject(const SubjectRecord& record, const PhantomConfig& cfg) {
    for (int d : cfg.dims) {
        if (d < 16) throw InvalidDims("phantom dims must be >= 16, got " + std::to_string(d));
    }
    if (cfg.frame_count < 1) throw InvalidDims("frame_count must be >= 1");

    // Independent streams per purpose so that e.g. toggling misalignment does
    // not shift the tissue noise.
    Rng rng_geom(derive_seed(record.seed, 1));
    Rng rng_mri(derive_seed(record.seed, 2));
    Rng rng_pet(derive_seed(record.seed, 3));
    Rng rng_offset(derive_seed(record.seed, 4));

    const double size_factor = 1.0 + 0.05 * (2.0 * rng_geom.uniform() - 1.0);
    const Anatomy anatomy = make_anatomy(record, cfg, size_factor);

    SubjectVolumes out;
    out.mri = Volume::zeros(cfg.dims, cfg.spacing_mm, VolumeUnits::arbitrary);
    out.truth_mask = Volume::zeros(cfg.dims, cfg.spacing_mm, VolumeUnits::arbitrary);

    std::vector<TissueLabel> labels(static_cast<std::size_t>(out.mri.numel()));
    for (int z = 0; z < cfg.dims[2]; ++z) {
        for (int y = 0; y < cfg.dims[1]; ++y) {
            for (int x = 0; x < cfg.dims[0]; ++x) {
                const TissueLabel t = label_at(anatomy, x, y, z);
                const std::int64_t idx = out.mri.offset(x, y, z);
                labels[idx] = t;
                if (t == TissueLabel::background) continue;
                out.truth_mask.voxels[idx] = 1.0;
                out.mri.voxels[idx] =
                    std::max(0.01, mri_value(t) + cfg.mri_noise * rng_mri.normal());
            }
        }
    }

    // Synthetic PET offset: small affine about the volume center.
    out.pet_offset = AffineTransform::identity();
    if (cfg.misalign) {
        std::array<std::array<double, 3>, 3> linear{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double mag = (i == j) ? cfg.max_scale_delta : cfg.max_shear_delta;
                linear[i][j] += mag * (2.0 * rng_offset.uniform() - 1.0);
            }
        }
        std::array<double, 3> shift_mm;
        for (int i = 0; i < 3; ++i) {
            shift_mm[i] = cfg.max_shift_voxels * (2.0 * rng_offset.uniform() - 1.0) *
                          cfg.spacing_mm[i];
        }
        const std::array<double, 3> center_mm = {anatomy.brain.center[0] * cfg.spacing_mm[0],
                                                 anatomy.brain.center[1] * cfg.spacing_mm[1],
                                                 anatomy.brain.center[2] * cfg.spacing_mm[2]};
        out.pet_offset = AffineTransform::about_center(linear, center_mm, shift_mm);
    }

    // Noiseless tissue activity template; per-frame scaling by the kinetic
    // curve, then misalignment, then voxel noise (clipped at zero, which also
    // provides the out-of-head scatter that brain extraction removes).
    Volume activity = Volume::zeros(cfg.dims, cfg.spacing_mm, VolumeUnits::arbitrary);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        activity.voxels[i] = pet_amplitude(labels[i], record.burden, cfg.uptake_gain);
    }

    const double frame_minutes = cfg.scan_minutes / cfg.frame_count;
    for (int f = 0; f < cfg.frame_count; ++f) {
        const double t0 = f * frame_minutes;
        const double t1 = t0 + frame_minutes;
        const double c = kinetic(0.5 * (t0 + t1));
        Volume frame = activity;
        for (double& v : frame.voxels) v *= c;
        if (cfg.misalign) frame = prep::resample(frame, out.pet_offset, cfg.dims);
        for (double& v : frame.voxels) {
            v = std::max(0.0, v + cfg.pet_noise * rng_pet.normal());
        }
        out.pet_frames.frames.push_back(std::move(frame));
        out.pet_frames.start_min.push_back(t0);
        out.pet_frames.end_min.push_back(t1);
    }
    return out;
}

namespace {

double impairment_base(Impairment i) {
    switch (i) {
    case Impairment::CN: return 0.1;
    case Impairment::impaired: return 0.8;
    case Impairment::AD: return 1.5;
    }
    return 0.1;
}

// Disjoint atrophy bands per impairment level keep the structural signal in
// the MRI predictive of burden, which is what the translation model learns.
std::pair<double, double> atrophy_band(Impairment i) {
    switch (i) {
    case Impairment::CN: return {0.02, 0.32};
    case Impairment::impaired: return {0.35, 0.65};
    case Impairment::AD: return {0.68, 0.98};
    }
    return {0.02, 0.32};
}

struct Stratum {
    std::string name;
    Sex sex;
    Impairment impairment;
    double proportion;
};

}  // namespace

std::vector<SubjectRecord> generate_cohort(int n, const StrataProportions& strata,
                                           std::uint64_t seed, double burden_max) {
    if (n < 1) throw InvalidProportions("cohort size must be >= 1");
    const double imp_sum = strata.cn + strata.impaired + strata.ad;
    if (std::fabs(imp_sum - 1.0) > 1e-9) {
        throw InvalidProportions("impairment proportions sum to " + std::to_string(imp_sum));
    }
    if (strata.female < 0.0 || strata.female > 1.0 || strata.cn < 0.0 || strata.impaired < 0.0 ||
        strata.ad < 0.0) {
        throw InvalidProportions("proportions must be non-negative");
    }

    std::vector<Stratum> cells;
    for (Sex sex : {Sex::F, Sex::M}) {
        const double sp = sex == Sex::F ? strata.female : 1.0 - strata.female;
        for (Impairment imp : {Impairment::CN, Impairment::impaired, Impairment::AD}) {
            const double ip = imp == Impairment::CN
                                  ? strata.cn
                                  : (imp == Impairment::impaired ? strata.impaired : strata.ad);
            cells.push_back({to_string(sex) + "/" + to_string(imp), sex, imp, sp * ip});
        }
    }
    std::sort(cells.begin(), cells.end(),
              [](const Stratum& a, const Stratum& b) { return a.name < b.name; });

    // largest remainder, ties by lexicographic stratum name
    std::vector<int> counts(cells.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double quota = n * cells[i].proportion;
        counts[i] = static_cast<int>(std::floor(quota));
        assigned += counts[i];
        remainders.emplace_back(quota - counts[i], i);
    }
    std::sort(remainders.begin(), remainders.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return cells[a.second].name < cells[b.second].name;
    });
    for (int leftover = n - assigned, k = 0; leftover > 0; --leftover, ++k) {
        counts[remainders[static_cast<std::size_t>(k)].second] += 1;
    }

    std::vector<SubjectRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    int index = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (int k = 0; k < counts[c]; ++k) {
            ++index;
            SubjectRecord rec;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "sub-%04d", index);
            rec.id = buf;
            rec.sex = cells[c].sex;
            rec.impairment = cells[c].impairment;
            rec.seed = derive_seed(seed, 0x5b, static_cast<std::uint64_t>(index));
            Rng rng(derive_seed(rec.seed, 0xc0));
            const auto [lo, hi] = atrophy_band(rec.impairment);
            rec.atrophy = rng.uniform(lo, hi);
            rec.age_factor = std::clamp(0.15 + 0.6 * rec.atrophy + 0.15 * rng.normal(), 0.0, 1.0);
            rec.burden = std::clamp(
                impairment_base(rec.impairment) + 0.8 * rec.atrophy + rng.normal(0.0, 0.1), 0.0,
                burden_max);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

SubjectVolumes canonical_template(const PhantomConfig& config) {
    SubjectRecord rec;
    rec.id = "template";
    rec.sex = Sex::F;
    rec.impairment = Impairment::impaired;
    rec.atrophy = 0.5;
    rec.burden = impairment_base(Impairment::impaired) + 0.8 * 0.5;
    rec.seed = 0x7e11a7e;
    PhantomConfig cfg = config;
    cfg.misalign = false;
    return generate_subject(rec, cfg);
}

}  // namespace abt::phantom
