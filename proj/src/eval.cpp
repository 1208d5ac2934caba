#include "abt/eval.hpp"

#include <algorithm>
#include <cmath>

#include "abt/preprocess.hpp"

namespace abt::eval {

namespace {

constexpr int kWindowRadius = 5;  // 11x11 window
constexpr double kWindowSigma = 1.5;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> window = [] {
        std::vector<double> w(11 * 11);
        double total = 0.0;
        for (int dy = -kWindowRadius; dy <= kWindowRadius; ++dy) {
            for (int dx = -kWindowRadius; dx <= kWindowRadius; ++dx) {
                const double g =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * kWindowSigma * kWindowSigma));
                w[(dy + kWindowRadius) * 11 + (dx + kWindowRadius)] = g;
                total += g;
            }
        }
        for (double& v : w) v /= total;
        return w;
    }();
    return window;
}

void check_metric_inputs(const Image2D& x, const Image2D& y, const Image2D& mask,
                         double data_range) {
    if (x.width != y.width || x.height != y.height || x.width != mask.width ||
        x.height != mask.height) {
        throw ShapeMismatch("metric images differ in size");
    }
    if (!(data_range > 0.0)) throw InvalidRange("data_range must be positive");
}

}  // namespace

double ssim(const Image2D& x, const Image2D& y, const Image2D& mask, double data_range) {
    check_metric_inputs(x, y, mask, data_range);
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const auto& window = gaussian_window();

    double acc = 0.0;
    std::int64_t centers = 0;
    for (int cy = 0; cy < x.height; ++cy) {
        for (int cx = 0; cx < x.width; ++cx) {
            if (mask.at(cx, cy) == 0.0) continue;
            double wsum = 0.0, mx = 0.0, my = 0.0;
            for (int dy = -kWindowRadius; dy <= kWindowRadius; ++dy) {
                const int py = cy + dy;
                if (py < 0 || py >= x.height) continue;
                for (int dx = -kWindowRadius; dx <= kWindowRadius; ++dx) {
                    const int px = cx + dx;
                    if (px < 0 || px >= x.width) continue;
                    const double w = window[(dy + kWindowRadius) * 11 + (dx + kWindowRadius)];
                    wsum += w;
                    mx += w * x.at(px, py);
                    my += w * y.at(px, py);
                }
            }
            mx /= wsum;
            my /= wsum;
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (int dy = -kWindowRadius; dy <= kWindowRadius; ++dy) {
                const int py = cy + dy;
                if (py < 0 || py >= x.height) continue;
                for (int dx = -kWindowRadius; dx <= kWindowRadius; ++dx) {
                    const int px = cx + dx;
                    if (px < 0 || px >= x.width) continue;
                    const double w =
                        window[(dy + kWindowRadius) * 11 + (dx + kWindowRadius)] / wsum;
                    const double ex = x.at(px, py) - mx;
                    const double ey = y.at(px, py) - my;
                    vx += w * ex * ex;
                    vy += w * ey * ey;
                    cov += w * ex * ey;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++centers;
        }
    }
    if (centers == 0) throw EmptyMask("ssim mask has no centers");
    return acc / static_cast<double>(centers);
}

double psnr(const Image2D& x, const Image2D& y, const Image2D& mask, double data_range) {
    check_metric_inputs(x, y, mask, data_range);
    double mse = 0.0;
    std::int64_t n = 0;
    for (int py = 0; py < x.height; ++py) {
        for (int px = 0; px < x.width; ++px) {
            if (mask.at(px, py) == 0.0) continue;
            const double d = x.at(px, py) - y.at(px, py);
            mse += d * d;
            ++n;
        }
    }
    if (n == 0) throw EmptyMask("psnr mask is empty");
    mse /= static_cast<double>(n);
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

double global_suvr(const Volume& pet, const BrainMask& mask) {
    if (pet.dims != mask.dims) throw ShapeMismatch("mask grid differs from volume");
    double acc = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < pet.voxels.size(); ++i) {
        if (mask.bits[i]) {
            acc += pet.voxels[i];
            ++n;
        }
    }
    if (n == 0) throw EmptyMask("global_suvr mask is empty");
    return acc / static_cast<double>(n);
}

double r_squared(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2) throw DegenerateData("r_squared needs at least two pairs");
    double mean_true = 0.0;
    for (const auto& [t, p] : pairs) mean_true += t;
    mean_true /= static_cast<double>(pairs.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (const auto& [t, p] : pairs) {
        ss_tot += (t - mean_true) * (t - mean_true);
        ss_res += (t - p) * (t - p);
    }
    if (ss_tot == 0.0) throw DegenerateData("true values have zero variance");
    return 1.0 - ss_res / ss_tot;
}

Volume difference_map(const Volume& true_pet, const Volume& synth_pet, const BrainMask& mask) {
    if (true_pet.dims != synth_pet.dims || true_pet.dims != mask.dims) {
        throw ShapeMismatch("difference_map inputs on different grids");
    }
    Volume out = Volume::zeros(true_pet.dims, true_pet.spacing_mm, VolumeUnits::arbitrary);
    for (std::size_t i = 0; i < out.voxels.size(); ++i) {
        if (mask.bits[i]) out.voxels[i] = synth_pet.voxels[i] - true_pet.voxels[i];
    }
    return out;
}

Image2D difference_map(const Image2D& true_pet, const Image2D& synth_pet, const Image2D& mask) {
    if (true_pet.width != synth_pet.width || true_pet.height != synth_pet.height ||
        true_pet.width != mask.width || true_pet.height != mask.height) {
        throw ShapeMismatch("difference_map images differ in size");
    }
    Image2D out = Image2D::zeros(true_pet.width, true_pet.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        if (mask.pixels[i] != 0.0) out.pixels[i] = synth_pet.pixels[i] - true_pet.pixels[i];
    }
    return out;
}

MetricsRecord evaluate_subject(const SubjectData& subject, const Volume& synth,
                               double data_range) {
    if (subject.pet_suvr.dims != synth.dims) {
        throw ShapeMismatch("synthetic volume grid differs from the true PET");
    }
    const auto true_slices = prep::slice_axial(subject.pet_suvr);
    const auto synth_slices = prep::slice_axial(synth);
    const auto mask_slices =
        prep::slice_axial(subject.mask.to_volume(subject.pet_suvr.spacing_mm));

    MetricsRecord rec;
    rec.subject_id = subject.subject_id;
    double weight_total = 0.0;
    double ssim_acc = 0.0, psnr_acc = 0.0;
    for (std::size_t z = 0; z < true_slices.size(); ++z) {
        double mask_px = 0.0;
        for (double v : mask_slices[z].pixels) mask_px += v;
        if (mask_px <= 0.0) continue;
        ssim_acc +=
            mask_px * ssim(true_slices[z], synth_slices[z], mask_slices[z], data_range);
        psnr_acc +=
            mask_px * psnr(true_slices[z], synth_slices[z], mask_slices[z], data_range);
        weight_total += mask_px;
    }
    if (weight_total <= 0.0) throw EmptyMask("subject " + subject.subject_id + " has no mask");
    rec.ssim = ssim_acc / weight_total;
    rec.psnr_db = psnr_acc / weight_total;
    rec.suvr_true = global_suvr(subject.pet_suvr, subject.mask);
    rec.suvr_synth = global_suvr(synth, subject.mask);
    return rec;
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
    Histogram h;
    if (values.empty() || bins < 1) return h;
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (!(hi > lo)) hi = lo + 1.0;  // degenerate spread
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) {
        h.edges[b] = lo + (hi - lo) * b / static_cast<double>(bins);
    }
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);  // right edge of the last bin is inclusive
        h.counts[b]++;
    }
    return h;
}

CohortReport evaluate_cohort(const std::vector<SubjectData>& subjects,
                             const Synthesizer& synthesize, double data_range) {
    if (subjects.empty()) throw MissingSubjectData("no subjects to evaluate");
    CohortReport report;
    std::vector<std::pair<double, double>> suvr_pairs;
    std::vector<double> ssims, psnrs;
    for (const SubjectData& subject : subjects) {
        const Volume synth = synthesize(subject);
        MetricsRecord rec = evaluate_subject(subject, synth, data_range);
        suvr_pairs.emplace_back(rec.suvr_true, rec.suvr_synth);
        ssims.push_back(rec.ssim);
        psnrs.push_back(rec.psnr_db);
        report.records.push_back(std::move(rec));
    }
    report.ssim_histogram = make_histogram(ssims);
    report.psnr_histogram = make_histogram(psnrs);
    report.r_squared = r_squared(suvr_pairs);

    auto mean_std = [](const std::vector<double>& v, double& mean, double& stddev) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        stddev = std::sqrt(var / static_cast<double>(v.size()));
    };
    mean_std(ssims, report.mean_ssim, report.std_ssim);
    mean_std(psnrs, report.mean_psnr, report.std_psnr);
    return report;
}

}  // namespace abt::eval
