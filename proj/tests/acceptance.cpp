// Acceptance suite: one checkable criterion per function, one PASS/FAIL line
// each. Run with no arguments for the full suite or `acceptance --only K` for
// a single criterion. Exit code 0 iff everything that ran passed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "abt/cli.hpp"
#include "abt/eval.hpp"
#include "abt/model.hpp"
#include "abt/phantom.hpp"
#include "abt/preprocess.hpp"
#include "abt/rng.hpp"
#include "abt/train.hpp"
#include "oracles.hpp"

using namespace abt;
namespace fs = std::filesystem;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------- criterion 1

Tensor rand_tensor(const Shape& shape, Rng& rng, double margin = 0.0) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (double& x : v) {
        x = rng.normal();
        if (margin > 0.0 && std::fabs(x) < margin) x += (x >= 0 ? margin : -margin);
    }
    return Tensor::from_data(shape, std::move(v));
}

Outcome criterion1_gradients() {
    double worst_primitive = 0.0;

    auto cotangent_loss = [](Tensor out, Tensor cot) { return sum(mul(out, cot)); };

    // elementwise / structural primitives over many seeds
    struct Case {
        const char* name;
        oracle::GraphBuilder build;
        bool off_zero;
        bool positive;
    };
    std::vector<Case> cases = {
        {"add", [&](std::vector<Tensor>& l) { return cotangent_loss(add(l[0], l[1]), l[2]); },
         false, false},
        {"sub", [&](std::vector<Tensor>& l) { return cotangent_loss(sub(l[0], l[1]), l[2]); },
         false, false},
        {"mul", [&](std::vector<Tensor>& l) { return cotangent_loss(mul(l[0], l[1]), l[2]); },
         false, false},
        {"abs", [&](std::vector<Tensor>& l) { return cotangent_loss(abs_val(l[0]), l[2]); },
         true, false},
        {"log", [&](std::vector<Tensor>& l) { return cotangent_loss(log_val(l[0]), l[2]); },
         false, true},
        {"clamp",
         [&](std::vector<Tensor>& l) { return cotangent_loss(clamp(l[0], -0.9, 0.9), l[2]); },
         true, false},
        {"mean", [&](std::vector<Tensor>& l) { return mean(mul(l[0], l[1])); }, false, false},
        {"relu",
         [&](std::vector<Tensor>& l) {
             return cotangent_loss(activation(l[0], Activation::relu()), l[2]);
         },
         true, false},
        {"leaky_relu",
         [&](std::vector<Tensor>& l) {
             return cotangent_loss(activation(l[0], Activation::leaky_relu(0.2)), l[2]);
         },
         true, false},
        {"sigmoid",
         [&](std::vector<Tensor>& l) {
             return cotangent_loss(activation(l[0], Activation::sigmoid()), l[2]);
         },
         false, false},
        {"tanh",
         [&](std::vector<Tensor>& l) {
             return cotangent_loss(activation(l[0], Activation::tanh()), l[2]);
         },
         false, false},
        {"dropout",
         [&](std::vector<Tensor>& l) {
             return cotangent_loss(dropout(l[0], 0.4, true, 99), l[2]);
         },
         false, false},
    };
    for (const auto& c : cases) {
        for (int seed = 0; seed < 25; ++seed) {
            Rng rng(31000 + seed);
            oracle::FdProblem prob;
            for (int leaf = 0; leaf < 3; ++leaf) {
                Tensor t = rand_tensor({3, 4}, rng, c.off_zero ? 0.05 : 0.0);
                auto v = std::vector<double>(t.data().begin(), t.data().end());
                if (c.positive && leaf == 0) {
                    for (double& x : v) x = 0.5 + std::fabs(x);
                }
                prob.shapes.push_back({3, 4});
                prob.values.push_back(std::move(v));
            }
            prob.differentiable = {true, true, false};
            worst_primitive = std::max(worst_primitive, oracle::fd_max_rel_err(c.build, prob));
        }
    }

    // conv2d / conv_transpose2d / linear
    for (int seed = 0; seed < 25; ++seed) {
        Rng rng(32000 + seed);
        {
            oracle::FdProblem prob;
            prob.shapes = {{1, 2, 5, 5}, {3, 2, 3, 3}, {3}, {1, 3, 3, 3}};
            for (const auto& s : prob.shapes) {
                std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
                for (double& x : v) x = rng.normal();
                prob.values.push_back(std::move(v));
            }
            prob.differentiable = {true, true, true, false};
            auto build = [](std::vector<Tensor>& l) {
                return sum(mul(conv2d(l[0], l[1], l[2], 2, 1), l[3]));
            };
            worst_primitive = std::max(worst_primitive, oracle::fd_max_rel_err(build, prob));
        }
        {
            oracle::FdProblem prob;
            prob.shapes = {{1, 2, 3, 3}, {2, 3, 2, 2}, {3}, {1, 3, 6, 6}};
            for (const auto& s : prob.shapes) {
                std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
                for (double& x : v) x = rng.normal();
                prob.values.push_back(std::move(v));
            }
            prob.differentiable = {true, true, true, false};
            auto build = [](std::vector<Tensor>& l) {
                return sum(mul(conv_transpose2d(l[0], l[1], l[2], 2, 0), l[3]));
            };
            worst_primitive = std::max(worst_primitive, oracle::fd_max_rel_err(build, prob));
        }
        {
            oracle::FdProblem prob;
            prob.shapes = {{3, 5}, {2, 5}, {2}, {3, 2}};
            for (const auto& s : prob.shapes) {
                std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
                for (double& x : v) x = rng.normal();
                prob.values.push_back(std::move(v));
            }
            prob.differentiable = {true, true, true, false};
            auto build = [](std::vector<Tensor>& l) {
                return sum(mul(linear(l[0], l[1], l[2]), l[3]));
            };
            worst_primitive = std::max(worst_primitive, oracle::fd_max_rel_err(build, prob));
        }
    }

    // composed generator objective on the tiny config (depth 2, 8x8)
    model::GeneratorConfig gcfg;
    gcfg.base_filters = 4;
    gcfg.depth = 2;
    gcfg.dropout_rate = 0.0;
    model::DiscriminatorConfig dcfg;
    dcfg.base_filters = 4;
    dcfg.depth = 2;
    dcfg.input_size = 8;
    ModelParams gen = model::init_generator(gcfg, 21);
    const ModelParams disc = model::init_discriminator(dcfg, 22);
    for (auto& [name, tensor] : gen.entries) {
        if (name.ends_with(".bias")) {
            for (double& v : tensor.mutable_data()) v = 0.15;
        }
    }
    Rng im_rng(23);
    std::vector<double> mri_v(64), tgt_v(64), mask_v(64, 1.0);
    for (double& v : mri_v) v = im_rng.uniform(0.1, 1.0);
    for (double& v : tgt_v) v = im_rng.uniform(0.5, 2.0);
    for (std::size_t i = 0; i < 16; ++i) mask_v[i] = 0.0;
    const Tensor mri = Tensor::from_data({1, 1, 8, 8}, mri_v);
    const Tensor target = Tensor::from_data({1, 1, 8, 8}, tgt_v);
    const Tensor mask = Tensor::from_data({1, 1, 8, 8}, mask_v);
    const model::LossWeights weights;
    auto loss_value = [&]() {
        const Tensor fake = model::generator_forward(gen, gcfg, mri);
        const Tensor d_fake = model::discriminator_forward(disc, dcfg, mri, fake);
        const auto adv = model::adversarial_losses(d_fake.detach(), d_fake);
        return model::generator_objective(adv.g_adv_loss,
                                          model::masked_l1_loss(fake, target, mask), weights);
    };
    gen.zero_grad();
    Tensor loss = loss_value();
    loss.backward();
    double worst_composed = 0.0;
    Rng pick(25);
    const double h = 1e-5;
    for (auto& [name, tensor] : gen.entries) {
        double grad_norm = 0.0;
        for (double g : tensor.grad()) grad_norm = std::max(grad_norm, std::fabs(g));
        double diff = 0.0, num_norm = 0.0;
        const int probes = tensor.numel() < 12 ? static_cast<int>(tensor.numel()) : 10;
        for (int p = 0; p < probes; ++p) {
            const std::int64_t e =
                tensor.numel() < 12 ? p : pick.uniform_int(0, tensor.numel() - 1);
            const double saved = tensor.data()[static_cast<std::size_t>(e)];
            tensor.mutable_data()[static_cast<std::size_t>(e)] = saved + h;
            const double lp = loss_value().item();
            tensor.mutable_data()[static_cast<std::size_t>(e)] = saved - h;
            const double lm = loss_value().item();
            tensor.mutable_data()[static_cast<std::size_t>(e)] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            diff = std::max(diff,
                            std::fabs(tensor.grad()[static_cast<std::size_t>(e)] - numeric));
            num_norm = std::max(num_norm, std::fabs(numeric));
        }
        worst_composed = std::max(worst_composed, diff / std::max({grad_norm, num_norm, 1e-8}));
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf), "primitive rel err %.2e (tol 1e-6), composed %.2e (tol 1e-4)",
                  worst_primitive, worst_composed);
    return {worst_primitive < 1e-6 && worst_composed < 1e-4, buf};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2_masked_loss() {
    Rng rng(777);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int w = 4 + static_cast<int>(rng.uniform_int(0, 8));
        const int hgt = 4 + static_cast<int>(rng.uniform_int(0, 8));
        const Shape shape = {1, 1, hgt, w};
        const std::size_t n = static_cast<std::size_t>(shape_numel(shape));
        std::vector<double> pred(n), tgt(n), mask(n);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.normal();
            tgt[i] = rng.normal();
            mask[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
            any = any || mask[i] > 0.0;
        }
        if (!any) mask[0] = 1.0;
        const double base = model::masked_l1_loss(Tensor::from_data(shape, pred),
                                                  Tensor::from_data(shape, tgt),
                                                  Tensor::from_data(shape, mask))
                                .item();
        auto pred2 = pred;
        auto tgt2 = tgt;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask[i] == 0.0) {
                pred2[i] += rng.normal() * std::pow(10.0, rng.uniform_int(-3, 6));
                tgt2[i] -= rng.normal() * std::pow(10.0, rng.uniform_int(-3, 6));
            }
        }
        const double perturbed = model::masked_l1_loss(Tensor::from_data(shape, pred2),
                                                       Tensor::from_data(shape, tgt2),
                                                       Tensor::from_data(shape, mask))
                                     .item();
        worst = std::max(worst, std::fabs(perturbed - base));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "1000 trials, max |delta| %.2e (tol 1e-15)", worst);
    return {worst <= 1e-15, buf};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3_scale_sensitivity() {
    Rng rng(888);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Shape shape = {1, 1, 6, 6};
        std::vector<double> tgt(36), mask(36);
        bool any = false;
        for (std::size_t i = 0; i < 36; ++i) {
            tgt[i] = rng.uniform(0.1, 2.5);
            mask[i] = rng.uniform() < 0.6 ? 1.0 : 0.0;
            any = any || mask[i] > 0.0;
        }
        if (!any) mask[0] = 1.0;
        const Tensor zero = Tensor::zeros(shape);
        const Tensor mask_t = Tensor::from_data(shape, mask);
        const double base =
            model::masked_l1_loss(zero, Tensor::from_data(shape, tgt), mask_t).item();
        for (double c : {0.5, 2.0, 4.0}) {
            auto scaled = tgt;
            for (double& v : scaled) v *= c;
            const double got =
                model::masked_l1_loss(zero, Tensor::from_data(shape, scaled), mask_t).item();
            worst = std::max(worst, std::fabs(got - c * base) / (c * base));
        }
    }

    // structural audit of the default generator and a deep variant
    bool audit_ok = true;
    for (int depth : {2, 3, 4}) {
        model::GeneratorConfig g;
        g.depth = depth;
        const auto audit = model::audit_params(model::init_generator(g, 5));
        audit_ok = audit_ok && audit.norm_or_unknown_tensors == 0 && audit.linear_tensors == 0;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "scale rel err %.2e (tol 1e-12), zero normalization parameters: %s", worst,
                  audit_ok ? "yes" : "NO");
    return {worst < 1e-12 && audit_ok, buf};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion4_metric_oracles() {
    Rng rng(999);
    double worst_ssim = 0.0, worst_psnr = 0.0, worst_r2 = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Image2D x = Image2D::zeros(32, 32);
        Image2D y = Image2D::zeros(32, 32);
        Image2D mask = Image2D::zeros(32, 32);
        bool any = false;
        for (std::size_t i = 0; i < x.pixels.size(); ++i) {
            x.pixels[i] = rng.uniform(0.0, 2.0);
            y.pixels[i] = rng.uniform(0.0, 2.0);
            mask.pixels[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
            any = any || mask.pixels[i] > 0.0;
        }
        if (!any) mask.pixels[17] = 1.0;
        const double range = 2.0;
        worst_ssim = std::max(
            worst_ssim, std::fabs(eval::ssim(x, y, mask, range) -
                                  oracle::ssim_bruteforce(x.pixels, y.pixels, mask.pixels, 32,
                                                          32, range)));
        // direct PSNR formula
        double mse = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i < x.pixels.size(); ++i) {
            if (mask.pixels[i] > 0.0) {
                mse += (x.pixels[i] - y.pixels[i]) * (x.pixels[i] - y.pixels[i]);
                ++n;
            }
        }
        mse /= static_cast<double>(n);
        const double ref_psnr =
            mse == 0.0 ? 100.0 : std::min(100.0, 10.0 * std::log10(range * range / mse));
        worst_psnr = std::max(worst_psnr, std::fabs(eval::psnr(x, y, mask, range) - ref_psnr));
    }
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<double, double>> pairs;
        const int n = 3 + static_cast<int>(rng.uniform_int(0, 20));
        for (int i = 0; i < n; ++i) {
            pairs.emplace_back(rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0));
        }
        pairs[0].first += 0.5;  // guarantee variance
        double mean_true = 0.0;
        for (auto& [t, p] : pairs) mean_true += t;
        mean_true /= n;
        double ss_tot = 0.0, ss_res = 0.0;
        for (auto& [t, p] : pairs) {
            ss_tot += (t - mean_true) * (t - mean_true);
            ss_res += (t - p) * (t - p);
        }
        worst_r2 = std::max(worst_r2,
                            std::fabs(eval::r_squared(pairs) - (1.0 - ss_res / ss_tot)));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "ssim err %.2e, psnr err %.2e (tol 1e-10), r2 err %.2e (tol 1e-12)",
                  worst_ssim, worst_psnr, worst_r2);
    return {worst_ssim < 1e-10 && worst_psnr < 1e-10 && worst_r2 < 1e-12, buf};
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5_registration() {
    const double t0 = now_s();
    double worst_t = 0.0, worst_m = 0.0;
    phantom::PhantomConfig cfg;  // default 64x64x16 grid
    for (int k = 0; k < 20; ++k) {
        phantom::SubjectRecord rec;
        rec.id = "c5-" + std::to_string(k);
        rec.atrophy = 0.08 + 0.045 * k;
        rec.burden = 0.2 + 0.08 * k;
        rec.seed = derive_seed(0xacce97, static_cast<std::uint64_t>(k));

        cfg.misalign = true;
        const auto misaligned = phantom::generate_subject(rec, cfg);
        cfg.misalign = false;
        const auto aligned = phantom::generate_subject(rec, cfg);

        const Volume moving = prep::sum_late_frames(misaligned.pet_frames, 30.0);
        const Volume fixed = prep::sum_late_frames(aligned.pet_frames, 30.0);
        const auto result = prep::register_affine(moving, fixed, AffineTransform::identity(),
                                                  prep::pipeline_registration_options());
        const AffineTransform composite =
            AffineTransform::compose(result.transform, misaligned.pet_offset);

        const std::array<double, 3> center = {(cfg.dims[0] - 1) * 0.5 * cfg.spacing_mm[0],
                                              (cfg.dims[1] - 1) * 0.5 * cfg.spacing_mm[1],
                                              (cfg.dims[2] - 1) * 0.5 * cfg.spacing_mm[2]};
        const auto moved = composite.apply(center);
        for (int i = 0; i < 3; ++i) {
            worst_t = std::max(worst_t,
                               std::fabs(moved[i] - center[i]) / cfg.spacing_mm[i]);
            for (int j = 0; j < 3; ++j) {
                worst_m = std::max(worst_m, std::fabs(composite.matrix[i][j] -
                                                      (i == j ? 1.0 : 0.0)));
            }
        }
    }
    const double elapsed = now_s() - t0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "20 subjects: worst translation %.3f vox (tol 0.2), worst linear %.4f "
                  "(tol 0.02), %.0fs (budget 300s)",
                  worst_t, worst_m, elapsed);
    return {worst_t < 0.2 && worst_m < 0.02 && elapsed < 300.0, buf};
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion6_late_frames() {
    phantom::PhantomConfig cfg;
    cfg.dims = {32, 32, 16};
    bool exact = true;
    for (int k = 0; k < 5; ++k) {
        phantom::SubjectRecord rec;
        rec.id = "c6-" + std::to_string(k);
        rec.atrophy = 0.2 * k / 4.0 + 0.3;
        rec.burden = 0.5 + 0.3 * k;
        rec.seed = derive_seed(0xc6, static_cast<std::uint64_t>(k));
        const auto sv = phantom::generate_subject(rec, cfg);
        const Volume sum = prep::sum_late_frames(sv.pet_frames, 30.0);
        // independent recomputation of the same rule
        Volume ref = Volume::zeros(sum.dims, sum.spacing_mm);
        for (std::size_t f = 0; f < sv.pet_frames.frames.size(); ++f) {
            if (sv.pet_frames.midpoint_min(f) < 30.0) continue;
            for (std::size_t i = 0; i < ref.voxels.size(); ++i) {
                ref.voxels[i] += sv.pet_frames.frames[f].voxels[i];
            }
        }
        exact = exact && (sum.voxels == ref.voxels);
    }

    // midpoint boundary behaviour
    FrameSequence fs;
    for (int f = 0; f < 3; ++f) {
        fs.frames.push_back(Volume::zeros({4, 4, 2}, {1, 1, 1}));
        std::fill(fs.frames.back().voxels.begin(), fs.frames.back().voxels.end(),
                  static_cast<double>(1 << f));
    }
    fs.start_min = {20.0, 27.5, 35.0};
    fs.end_min = {30.0, 32.5, 45.0};  // midpoints 25, 30, 40
    const Volume sum = prep::sum_late_frames(fs, 30.0);
    const bool boundary_ok = sum.voxels[0] == 6.0;  // frames 2 and 3 qualify
    bool empty_ok = false;
    try {
        prep::sum_late_frames(fs, 50.0);
    } catch (const NoQualifyingFrames&) {
        empty_ok = true;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "bit-exact sums: %s, midpoint rule: %s, empty window: %s",
                  exact ? "yes" : "NO", boundary_ok ? "yes" : "NO", empty_ok ? "yes" : "NO");
    return {exact && boundary_ok && empty_ok, buf};
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion7_end_to_end() {
    const double t0 = now_s();
    const std::uint64_t seed = 20240809;
    phantom::PhantomConfig pcfg;  // 64x64x16, spacing 2 mm, misalignment on

    const auto records = phantom::generate_cohort(200, {}, derive_seed(seed, 0x70));
    const auto split = train::stratified_split(records, 0.2, derive_seed(seed, 0x51));
    const std::set<std::string> test_ids(split.test_ids.begin(), split.test_ids.end());

    train::Dataset dataset;
    std::vector<eval::SubjectData> test_subjects;
    for (const auto& rec : records) {
        const auto sv = phantom::generate_subject(rec, pcfg);
        const auto pp = prep::preprocess_subject(sv.mri, sv.pet_frames, 30.0);
        if (test_ids.count(rec.id)) {
            test_subjects.push_back({rec.id, sv.mri, pp.pet_suvr, pp.brain_mask});
        } else {
            train::append_subject_slices(dataset, rec.id, sv.mri, pp.pet_suvr, pp.brain_mask);
        }
    }
    train::assert_no_test_leakage(dataset, split);

    train::TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 4;
    tc.seed = derive_seed(seed, 0x7a);
    tc.gen.base_filters = 16;
    tc.gen.depth = 3;
    tc.disc.base_filters = 16;
    tc.disc.depth = 3;
    tc.disc.input_size = 64;
    tc.checkpoint_every = 0;
    const auto result = train::train(dataset, tc);

    const double data_range = 1.0 + pcfg.uptake_gain * pcfg.burden_max;
    const auto report = eval::evaluate_cohort(
        test_subjects,
        [&](const eval::SubjectData& s) {
            const auto slices = prep::slice_axial(s.mri);
            std::vector<const Image2D*> batch;
            for (const auto& sl : slices) batch.push_back(&sl);
            const Tensor out = model::generator_forward(
                result.checkpoint.generator, result.checkpoint.gen_config,
                model::tensor_from_images(batch));
            std::vector<Image2D> out_slices;
            for (int z = 0; z < static_cast<int>(slices.size()); ++z) {
                out_slices.push_back(model::image_from_tensor(out, z));
            }
            return prep::stack_axial(out_slices, s.mri.spacing_mm, VolumeUnits::suvr);
        },
        data_range);

    const double minutes = (now_s() - t0) / 60.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "held-out mean SSIM %.4f (>=0.85), R^2 %.4f (>=0.90), mean PSNR %.2f dB "
                  "(>=25), runtime %.1f min (<30)",
                  report.mean_ssim, report.r_squared, report.mean_psnr, minutes);
    return {report.mean_ssim >= 0.85 && report.r_squared >= 0.90 && report.mean_psnr >= 25.0 &&
                minutes < 30.0,
            buf};
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome criterion8_determinism() {
    const fs::path base = fs::temp_directory_path() / "abt_acceptance_c8";
    fs::remove_all(base);

    auto pipeline = [&](const fs::path& dir) -> std::string {
        fs::create_directories(dir);
        const fs::path cfg_path = dir / "config.json";
        std::ofstream(cfg_path)
            << "{\n"
               "  \"seed\": 4242,\n"
               "  \"data_dir\": \"" << (dir / "data").string() << "\",\n"
               "  \"run_dir\": \"" << (dir / "run").string() << "\",\n"
               "  \"phantom\": {\"subjects\": 12, \"dims\": [32, 32, 16]},\n"
               "  \"model\": {\"base_filters\": 8, \"depth\": 2, "
               "\"disc_base_filters\": 8, \"disc_depth\": 2},\n"
               "  \"train\": {\"epochs\": 2, \"batch_size\": 4, \"checkpoint_every\": 0}\n"
               "}\n";
        const std::vector<std::vector<std::string>> commands = {
            {"gen-data", "--config", cfg_path.string()},
            {"preprocess", "--config", cfg_path.string()},
            {"train", "--config", cfg_path.string()},
            {"evaluate", "--config", cfg_path.string()},
        };
        for (const auto& cmd : commands) {
            std::ostringstream sink;
            std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
            const int code = abt::cli::run(cmd);
            std::cout.rdbuf(old);
            if (code != 0) return "";
        }
        return slurp(dir / "run" / "eval" / "metrics.csv") + "|" +
               slurp(dir / "run" / "loss_log.csv");
    };

    const std::string a = pipeline(base / "a");
    const std::string b = pipeline(base / "b");
    fs::remove_all(base);
    const bool ok = !a.empty() && a == b;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "two full pipeline runs, byte-identical CSVs: %s",
                  ok ? "yes" : "NO");
    return {ok, buf};
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9_split_hygiene() {
    Rng rng(0x5541);
    int bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        phantom::StrataProportions strata;
        strata.female = rng.uniform(0.3, 0.7);
        strata.cn = rng.uniform(0.2, 0.6);
        strata.impaired = rng.uniform(0.1, std::min(0.5, 0.95 - strata.cn));
        strata.ad = 1.0 - strata.cn - strata.impaired;
        const int n = 20 + static_cast<int>(rng.uniform_int(0, 130));
        const double tf = rng.uniform(0.15, 0.45);
        const auto cohort = phantom::generate_cohort(n, strata, rng.next_u64());
        const auto split = train::stratified_split(cohort, tf, rng.next_u64());

        std::set<std::string> train_set(split.train_ids.begin(), split.train_ids.end());
        std::set<std::string> test_set(split.test_ids.begin(), split.test_ids.end());
        bool ok = train_set.size() + test_set.size() == cohort.size();
        for (const auto& id : test_set) ok = ok && !train_set.count(id);
        for (const auto& s : split.strata) {
            const double quota = (s.train_count + s.test_count) * tf;
            ok = ok && std::fabs(s.test_count - quota) <= 1.0;
        }
        if (!ok) ++bad;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "100 randomized cohorts, violations: %d", bad);
    return {bad == 0, buf};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient-correctness", criterion1_gradients},
        {2, "masked-loss-blindness-outside-mask", criterion2_masked_loss},
        {3, "quantitative-scale-sensitivity", criterion3_scale_sensitivity},
        {4, "metric-oracles", criterion4_metric_oracles},
        {5, "registration-recovery", criterion5_registration},
        {6, "late-frame-summation", criterion6_late_frames},
        {7, "end-to-end-held-out-quality", criterion7_end_to_end},
        {8, "pipeline-determinism", criterion8_determinism},
        {9, "split-hygiene", criterion9_split_hygiene},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const double t0 = now_s();
        Outcome outcome;
        try {
            outcome = c.fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double dt = now_s() - t0;
        std::printf("[%s] C%d %s: %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                    outcome.detail.c_str(), dt);
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
