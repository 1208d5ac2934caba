#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "abt/phantom.hpp"
#include "abt/preprocess.hpp"

using namespace abt;
using namespace abt::phantom;

namespace {

PhantomConfig small_config(bool misalign = false) {
    PhantomConfig cfg;
    cfg.dims = {32, 32, 16};
    cfg.spacing_mm = {2.0, 2.0, 2.0};
    cfg.misalign = misalign;
    return cfg;
}

SubjectRecord record_with(double atrophy, double burden, std::uint64_t seed) {
    SubjectRecord rec;
    rec.id = "test";
    rec.atrophy = atrophy;
    rec.burden = burden;
    rec.seed = seed;
    return rec;
}

BrainMask truth_to_mask(const Volume& truth) {
    BrainMask m = BrainMask::empty_like(truth.dims);
    for (std::size_t i = 0; i < truth.voxels.size(); ++i) m.bits[i] = truth.voxels[i] > 0.5;
    return m;
}

// gray ribbon voxels identified from the clean tissue intensity bands
std::vector<std::size_t> gray_voxels(const Volume& mri, const Volume& truth) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mri.voxels.size(); ++i) {
        if (truth.voxels[i] > 0.5 && std::fabs(mri.voxels[i] - 0.65) < 0.12) idx.push_back(i);
    }
    return idx;
}

double gray_suvr_mean(const SubjectVolumes& sv, const PhantomConfig& cfg) {
    const Volume pet_sum = prep::sum_late_frames(sv.pet_frames, cfg.scan_minutes - 30.0);
    const BrainMask brain = truth_to_mask(sv.truth_mask);
    const BrainMask ref = prep::reference_region(sv.mri, brain);
    const Volume suvr = prep::suvr_normalize(pet_sum, ref);
    const auto gray = gray_voxels(sv.mri, sv.truth_mask);
    REQUIRE(!gray.empty());
    double acc = 0.0;
    for (std::size_t i : gray) acc += suvr.voxels[i];
    return acc / static_cast<double>(gray.size());
}

}  // namespace

TEST_CASE("zero burden gives unit gray SUVR") {
    const PhantomConfig cfg = small_config();
    const auto sv = generate_subject(record_with(0.3, 0.0, 17), cfg);
    const double m = gray_suvr_mean(sv, cfg);
    CHECK(m > 0.95);
    CHECK(m < 1.05);
}

TEST_CASE("global SUVR increases with burden at fixed seed and atrophy") {
    const PhantomConfig cfg = small_config();
    const auto lo = generate_subject(record_with(0.4, 0.5, 99), cfg);
    const auto hi = generate_subject(record_with(0.4, 1.5, 99), cfg);
    const BrainMask brain = truth_to_mask(lo.truth_mask);
    const BrainMask ref_lo = prep::reference_region(lo.mri, brain);

    auto global_suvr = [&](const SubjectVolumes& sv) {
        const Volume pet_sum = prep::sum_late_frames(sv.pet_frames, 30.0);
        const Volume suvr = prep::suvr_normalize(pet_sum, ref_lo);
        double acc = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i < suvr.voxels.size(); ++i) {
            if (brain.bits[i]) {
                acc += suvr.voxels[i];
                ++n;
            }
        }
        return acc / static_cast<double>(n);
    };
    CHECK(global_suvr(hi) > global_suvr(lo));
}

TEST_CASE("identical record generates bit-identical volumes") {
    const PhantomConfig cfg = small_config(true);
    const auto a = generate_subject(record_with(0.6, 1.2, 4242), cfg);
    const auto b = generate_subject(record_with(0.6, 1.2, 4242), cfg);
    CHECK(a.mri.voxels == b.mri.voxels);
    CHECK(a.truth_mask.voxels == b.truth_mask.voxels);
    REQUIRE(a.pet_frames.frames.size() == b.pet_frames.frames.size());
    for (std::size_t f = 0; f < a.pet_frames.frames.size(); ++f) {
        CHECK(a.pet_frames.frames[f].voxels == b.pet_frames.frames[f].voxels);
    }
    CHECK(a.pet_offset.translation_mm == b.pet_offset.translation_mm);
}

TEST_CASE("truth mask is exactly the non-background support") {
    const auto sv = generate_subject(record_with(0.5, 1.0, 7), small_config());
    for (std::size_t i = 0; i < sv.mri.voxels.size(); ++i) {
        CHECK((sv.truth_mask.voxels[i] > 0.5) == (sv.mri.voxels[i] > 0.0));
    }
}

TEST_CASE("MRI and PET are aligned before the synthetic offset") {
    // with misalignment disabled the offset is identity and the late-window
    // PET support matches the MRI support
    const PhantomConfig cfg = small_config(false);
    const auto sv = generate_subject(record_with(0.4, 1.0, 31), cfg);
    CHECK(sv.pet_offset.translation_mm == std::array<double, 3>{0.0, 0.0, 0.0});
    const Volume pet_sum = prep::sum_late_frames(sv.pet_frames, 30.0);
    const BrainMask pet_support = prep::support_mask(pet_sum);
    const BrainMask mri_support = prep::support_mask(sv.mri);
    std::int64_t mismatched = 0;
    for (std::size_t i = 0; i < pet_support.bits.size(); ++i) {
        mismatched += pet_support.bits[i] != mri_support.bits[i];
    }
    // boundary voxels may flip from noise; the bulk must agree
    CHECK(mismatched < mri_support.count() / 50);
}

TEST_CASE("misalignment stays within the configured bounds") {
    PhantomConfig cfg = small_config(true);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto sv = generate_subject(record_with(0.4, 1.0, 1000 + s), cfg);
        const auto& t = sv.pet_offset;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double expect = i == j ? 1.0 : 0.0;
                const double bound = i == j ? cfg.max_scale_delta : cfg.max_shear_delta;
                CHECK(std::fabs(t.matrix[i][j] - expect) <= bound + 1e-12);
            }
        }
    }
}

TEST_CASE("increasing atrophy strictly shrinks the gray ribbon") {
    const PhantomConfig cfg = small_config();
    std::int64_t prev = -1;
    for (int k = 0; k < 20; ++k) {
        const double atrophy = k / 19.0;
        const auto sv = generate_subject(record_with(atrophy, 0.5, 555), cfg);
        const auto gray = gray_voxels(sv.mri, sv.truth_mask);
        if (prev >= 0) CHECK(static_cast<std::int64_t>(gray.size()) < prev);
        prev = static_cast<std::int64_t>(gray.size());
    }
}

TEST_CASE("phantom rejects tiny grids") {
    PhantomConfig cfg = small_config();
    cfg.dims = {8, 32, 16};
    CHECK_THROWS_AS(generate_subject(record_with(0.5, 1.0, 1), cfg), InvalidDims);
}

TEST_CASE("cohort stratification follows the largest-remainder rule") {
    SUBCASE("rounding-exact case") {
        StrataProportions strata;  // 0.5 F, CN/impaired/AD = 0.6/0.2/0.2
        const auto records = generate_cohort(100, strata, 42);
        REQUIRE(records.size() == 100);
        std::map<std::string, int> by_sex, by_imp;
        std::set<std::string> ids;
        for (const auto& r : records) {
            by_sex[to_string(r.sex)]++;
            by_imp[to_string(r.impairment)]++;
            ids.insert(r.id);
        }
        CHECK(by_sex["F"] == 50);
        CHECK(by_sex["M"] == 50);
        CHECK(by_imp["CN"] == 60);
        CHECK(by_imp["impaired"] == 20);
        CHECK(by_imp["AD"] == 20);
        CHECK(ids.size() == 100);  // unique ids
    }
    SUBCASE("single subject lands in the highest-proportion stratum") {
        const auto records = generate_cohort(1, StrataProportions{}, 7);
        REQUIRE(records.size() == 1);
        CHECK(to_string(records[0].sex) == "F");  // F/CN wins the lexicographic tie
        CHECK(to_string(records[0].impairment) == "CN");
    }
    SUBCASE("same seed reproduces the cohort") {
        const auto a = generate_cohort(37, StrataProportions{}, 123);
        const auto b = generate_cohort(37, StrataProportions{}, 123);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].id == b[i].id);
            CHECK(a[i].seed == b[i].seed);
            CHECK(a[i].atrophy == b[i].atrophy);
            CHECK(a[i].burden == b[i].burden);
        }
    }
    SUBCASE("bad proportions rejected") {
        StrataProportions bad;
        bad.cn = 0.5;  // sums to 0.9
        CHECK_THROWS_AS(generate_cohort(10, bad, 1), InvalidProportions);
        CHECK_THROWS_AS(generate_cohort(0, StrataProportions{}, 1), InvalidProportions);
    }
}

TEST_CASE("burden respects the covariate model") {
    const auto records = generate_cohort(120, StrataProportions{}, 2025);
    for (const auto& r : records) {
        CHECK(r.burden >= 0.0);
        CHECK(r.burden <= 2.0);
        CHECK(r.atrophy >= 0.0);
        CHECK(r.atrophy <= 1.0);
        // disjoint atrophy bands per impairment level
        if (r.impairment == Impairment::CN) CHECK(r.atrophy < 0.33);
        if (r.impairment == Impairment::impaired) {
            CHECK(r.atrophy > 0.34);
            CHECK(r.atrophy < 0.66);
        }
        if (r.impairment == Impairment::AD) CHECK(r.atrophy > 0.67);
    }
}

TEST_CASE("canonical template is reproducible and mid-atrophy") {
    const auto a = canonical_template(small_config());
    const auto b = canonical_template(small_config());
    CHECK(a.mri.voxels == b.mri.voxels);
    CHECK(a.pet_offset.translation_mm == std::array<double, 3>{0.0, 0.0, 0.0});
}
