#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "abt/eval.hpp"
#include "abt/rng.hpp"
#include "oracles.hpp"

using namespace abt;
using namespace abt::eval;

namespace {

Image2D random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 2.0) {
    Rng rng(seed);
    Image2D img = Image2D::zeros(w, h);
    for (double& p : img.pixels) p = rng.uniform(lo, hi);
    return img;
}

Image2D ones_mask(int w, int h) {
    Image2D img = Image2D::zeros(w, h);
    std::fill(img.pixels.begin(), img.pixels.end(), 1.0);
    return img;
}

Image2D random_mask(int w, int h, std::uint64_t seed, double density = 0.5) {
    Rng rng(seed);
    Image2D img = Image2D::zeros(w, h);
    bool any = false;
    for (double& p : img.pixels) {
        p = rng.uniform() < density ? 1.0 : 0.0;
        any = any || p > 0.0;
    }
    if (!any) img.pixels[0] = 1.0;
    return img;
}

}  // namespace

TEST_CASE("ssim basics") {
    const Image2D x = random_image(32, 32, 1);
    const Image2D y = random_image(32, 32, 2);
    const Image2D mask = ones_mask(32, 32);
    CHECK(ssim(x, x, mask, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(x, y, mask, 2.0) == doctest::Approx(ssim(y, x, mask, 2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(ssim(x, y, Image2D::zeros(32, 32), 2.0), EmptyMask);
    CHECK_THROWS_AS(ssim(x, y, mask, 0.0), InvalidRange);
}

TEST_CASE("ssim matches the brute-force windowed formula") {
    for (int trial = 0; trial < 10; ++trial) {
        const Image2D x = random_image(32, 32, 100 + trial);
        const Image2D y = random_image(32, 32, 200 + trial);
        const Image2D mask = random_mask(32, 32, 300 + trial);
        const double mine = ssim(x, y, mask, 2.0);
        const double ref = oracle::ssim_bruteforce(x.pixels, y.pixels, mask.pixels, 32, 32, 2.0);
        CHECK(std::fabs(mine - ref) < 1e-10);
    }
}

TEST_CASE("ssim stays within [-1,1] and hits 1 only on identical content") {
    for (int trial = 0; trial < 25; ++trial) {
        const Image2D x = random_image(24, 24, 400 + trial);
        Image2D y = random_image(24, 24, 500 + trial);
        const Image2D mask = random_mask(24, 24, 600 + trial, 0.4);
        const double s = ssim(x, y, mask, 2.0);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
        if (std::fabs(s - 1.0) < 1e-12) {
            for (std::size_t i = 0; i < x.pixels.size(); ++i) {
                if (mask.pixels[i] > 0) CHECK(x.pixels[i] == doctest::Approx(y.pixels[i]));
            }
        }
    }
}

TEST_CASE("psnr pinned values") {
    const int n = 16;
    const double range = 2.0;
    Image2D x = Image2D::zeros(n, n);
    Image2D y = Image2D::zeros(n, n);
    const Image2D mask = ones_mask(n, n);
    SUBCASE("identical images cap at 100 dB") {
        CHECK(psnr(x, y, mask, range) == kPsnrCapDb);
    }
    SUBCASE("mse of range^2/100 gives 20 dB") {
        for (double& p : y.pixels) p = range / 10.0;  // mse == range^2/100
        CHECK(psnr(x, y, mask, range) == doctest::Approx(20.0).epsilon(1e-12));
    }
    SUBCASE("mse of range^2 gives 0 dB") {
        for (double& p : y.pixels) p = range;
        CHECK(psnr(x, y, mask, range) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("psnr decreases as masked mse grows") {
        double prev = kPsnrCapDb;
        for (double noise : {0.01, 0.05, 0.1, 0.4, 1.0}) {
            for (double& p : y.pixels) p = noise;
            const double v = psnr(x, y, mask, range);
            CHECK(v < prev);
            prev = v;
        }
    }
    SUBCASE("empty mask") {
        CHECK_THROWS_AS(psnr(x, y, Image2D::zeros(n, n), range), EmptyMask);
    }
}

TEST_CASE("global SUVR is the masked mean") {
    Volume pet = Volume::zeros({4, 4, 2}, {1, 1, 1}, VolumeUnits::suvr);
    BrainMask mask = BrainMask::empty_like({4, 4, 2});
    SUBCASE("constant value") {
        for (double& v : pet.voxels) v = 1.4;
        for (int i = 0; i < 4; ++i) mask.set(i, 0, 0, true);
        CHECK(global_suvr(pet, mask) == doctest::Approx(1.4));
    }
    SUBCASE("half and half") {
        pet.at(0, 0, 0) = 1.0;
        pet.at(1, 0, 0) = 1.0;
        pet.at(2, 0, 0) = 2.0;
        pet.at(3, 0, 0) = 2.0;
        for (int i = 0; i < 4; ++i) mask.set(i, 0, 0, true);
        CHECK(global_suvr(pet, mask) == doctest::Approx(1.5));
    }
    SUBCASE("empty mask") { CHECK_THROWS_AS(global_suvr(pet, mask), EmptyMask); }
    SUBCASE("linearity") {
        Rng rng(9);
        for (double& v : pet.voxels) v = rng.uniform(0.5, 2.0);
        for (int i = 0; i < 4; ++i) mask.set(i, i % 4, i % 2, true);
        Volume scaled = pet;
        for (double& v : scaled.voxels) v *= 4.0;
        CHECK(global_suvr(scaled, mask) == doctest::Approx(4.0 * global_suvr(pet, mask)));
    }
}

TEST_CASE("r_squared") {
    SUBCASE("perfect prediction") {
        CHECK(r_squared({{1, 1}, {2, 2}, {3, 3}}) == doctest::Approx(1.0));
    }
    SUBCASE("mean predictor") {
        CHECK(r_squared({{1, 2}, {2, 2}, {3, 2}}) == doctest::Approx(0.0));
    }
    SUBCASE("hand-computed decomposition") {
        // mean_true = 2; ss_tot = 2; ss_res = 0.01 + 0.01 + 0.04 = 0.06
        const double expect = 1.0 - 0.06 / 2.0;
        CHECK(std::fabs(r_squared({{1, 1.1}, {2, 1.9}, {3, 3.2}}) - expect) < 1e-12);
    }
    SUBCASE("order invariance") {
        const double a = r_squared({{1, 1.1}, {2, 1.9}, {3, 3.2}});
        const double b = r_squared({{3, 3.2}, {1, 1.1}, {2, 1.9}});
        CHECK(a == doctest::Approx(b).epsilon(1e-15));
    }
    SUBCASE("degenerate data") {
        CHECK_THROWS_AS(r_squared({{1, 1}}), DegenerateData);
        CHECK_THROWS_AS(r_squared({{2, 1}, {2, 3}}), DegenerateData);
    }
}

TEST_CASE("difference map") {
    Volume t = Volume::zeros({4, 4, 2}, {1, 1, 1}, VolumeUnits::suvr);
    Volume s = t;
    BrainMask mask = BrainMask::empty_like({4, 4, 2});
    mask.set(1, 1, 0, true);
    mask.set(2, 2, 1, true);
    SUBCASE("identical inputs give zero") {
        const Volume d = difference_map(t, s, mask);
        for (double v : d.voxels) CHECK(v == 0.0);
    }
    SUBCASE("constant offset inside the mask only") {
        for (double& v : s.voxels) v += 0.3;
        const Volume d = difference_map(t, s, mask);
        CHECK(d.at(1, 1, 0) == doctest::Approx(0.3));
        CHECK(d.at(2, 2, 1) == doctest::Approx(0.3));
        CHECK(d.at(0, 0, 0) == 0.0);
    }
    SUBCASE("antisymmetry and mask integral") {
        Rng rng(4);
        for (double& v : t.voxels) v = rng.uniform(0, 2);
        for (double& v : s.voxels) v = rng.uniform(0, 2);
        const Volume ab = difference_map(t, s, mask);
        const Volume ba = difference_map(s, t, mask);
        double integral = 0.0, expected = 0.0;
        for (std::size_t i = 0; i < ab.voxels.size(); ++i) {
            CHECK(ab.voxels[i] == doctest::Approx(-ba.voxels[i]));
            integral += ab.voxels[i];
            if (mask.bits[i]) expected += s.voxels[i] - t.voxels[i];
        }
        CHECK(integral == doctest::Approx(expected).epsilon(1e-14));
    }
}

namespace {

// tiny synthetic cohort with a known relationship for evaluate_cohort tests
std::vector<SubjectData> toy_cohort(int n) {
    std::vector<SubjectData> subjects;
    for (int i = 0; i < n; ++i) {
        SubjectData s;
        s.subject_id = "t-" + std::to_string(i);
        s.mri = Volume::zeros({16, 16, 4}, {1, 1, 1});
        s.pet_suvr = Volume::zeros({16, 16, 4}, {1, 1, 1}, VolumeUnits::suvr);
        Rng rng(1000 + static_cast<std::uint64_t>(i));
        for (double& v : s.pet_suvr.voxels) v = rng.uniform(0.5, 0.5 + 0.3 * (i + 1));
        s.mask = BrainMask::empty_like({16, 16, 4});
        for (int z = 0; z < 4; ++z) {
            for (int y = 4; y < 12; ++y) {
                for (int x = 4; x < 12; ++x) s.mask.set(x, y, z, true);
            }
        }
        subjects.push_back(std::move(s));
    }
    return subjects;
}

}  // namespace

TEST_CASE("evaluate_cohort bookkeeping and oracle short-circuit") {
    const auto subjects = toy_cohort(6);
    // feeding the true PET back as "synthetic" must produce perfect scores
    const auto report = evaluate_cohort(
        subjects, [](const SubjectData& s) { return s.pet_suvr; }, 2.0);
    REQUIRE(report.records.size() == 6);
    int hist_total = 0;
    for (int c : report.ssim_histogram.counts) hist_total += c;
    CHECK(hist_total == 6);
    double mean_check = 0.0;
    for (const auto& r : report.records) {
        CHECK(r.ssim == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.psnr_db == kPsnrCapDb);
        CHECK(r.suvr_true == doctest::Approx(r.suvr_synth));
        mean_check += r.ssim;
    }
    mean_check /= 6.0;
    CHECK(std::fabs(report.mean_ssim - mean_check) < 1e-12);
    CHECK(report.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("histogram counts cover all records") {
    const auto h = make_histogram({0.1, 0.2, 0.2, 0.9, 1.0}, 20);
    int total = 0;
    for (int c : h.counts) total += c;
    CHECK(total == 5);
    CHECK(h.edges.size() == 21);
    CHECK(h.edges.front() == doctest::Approx(0.1));
    CHECK(h.edges.back() == doctest::Approx(1.0));
    // degenerate spread still produces a valid histogram
    const auto d = make_histogram({0.5, 0.5, 0.5}, 20);
    total = 0;
    for (int c : d.counts) total += c;
    CHECK(total == 3);
}
