#include "abt/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "abt/config.hpp"
#include "abt/eval.hpp"
#include "abt/model.hpp"
#include "abt/phantom.hpp"
#include "abt/preprocess.hpp"
#include "abt/rng.hpp"
#include "abt/train.hpp"
#include "abt/volume_io.hpp"

namespace abt::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// stream seeds for the pipeline stages, all derived from the one config seed
constexpr std::uint64_t kCohortKey = 0x70;
constexpr std::uint64_t kSplitKey = 0x51;
constexpr std::uint64_t kTrainKey = 0x7a;

json transform_to_json(const AffineTransform& t) {
    return json{{"matrix", t.matrix}, {"translation_mm", t.translation_mm}};
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw HeaderMismatch(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    const std::string text = j.dump(2) + "\n";
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("short write to " + path.string());
}

struct CohortEntry {
    phantom::SubjectRecord record;
    fs::path dir;  // relative to data_dir
    int frame_count = 0;
};

struct CohortManifest {
    std::vector<CohortEntry> entries;
    double data_range = 2.0;
};

fs::path cohort_manifest_path(const config::RunConfig& cfg) {
    return cfg.data_dir / "cohort.json";
}

CohortManifest load_cohort_manifest(const config::RunConfig& cfg) {
    const json j = load_json_file(cohort_manifest_path(cfg));
    CohortManifest manifest;
    manifest.data_range = j.at("data_range").get<double>();
    for (const json& s : j.at("subjects")) {
        CohortEntry e;
        e.record.id = s.at("id").get<std::string>();
        e.record.sex = phantom::sex_from_string(s.at("sex").get<std::string>());
        e.record.impairment =
            phantom::impairment_from_string(s.at("impairment").get<std::string>());
        e.record.age_factor = s.at("age_factor").get<double>();
        e.record.atrophy = s.at("atrophy").get<double>();
        e.record.burden = s.at("burden").get<double>();
        e.record.seed = s.at("seed").get<std::uint64_t>();
        e.dir = s.at("dir").get<std::string>();
        e.frame_count = s.at("frame_count").get<int>();
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

FrameSequence load_frames(const config::RunConfig& cfg, const CohortEntry& entry) {
    const json j = load_json_file(cfg.data_dir / entry.dir / "frames.json");
    FrameSequence frames;
    frames.start_min = j.at("start_min").get<std::vector<double>>();
    frames.end_min = j.at("end_min").get<std::vector<double>>();
    for (int f = 0; f < entry.frame_count; ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame-%02d.abtv", f);
        frames.frames.push_back(io::read_volume(cfg.data_dir / entry.dir / name));
    }
    return frames;
}

int cmd_gen_data(const config::RunConfig& cfg) {
    const auto records = phantom::generate_cohort(cfg.subjects, cfg.strata,
                                                  derive_seed(cfg.seed, kCohortKey),
                                                  cfg.phantom.burden_max);
    json subjects = json::array();
    for (const auto& rec : records) {
        const fs::path rel = fs::path("raw") / rec.id;
        const fs::path dir = cfg.data_dir / rel;
        fs::create_directories(dir);
        const auto sv = phantom::generate_subject(rec, cfg.phantom);
        io::write_volume(dir / "mri.abtv", sv.mri);
        io::write_volume(dir / "truth_mask.abtv", sv.truth_mask);
        for (std::size_t f = 0; f < sv.pet_frames.frames.size(); ++f) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame-%02zu.abtv", f);
            io::write_volume(dir / name, sv.pet_frames.frames[f]);
        }
        write_json_file(dir / "frames.json", json{{"start_min", sv.pet_frames.start_min},
                                                  {"end_min", sv.pet_frames.end_min}});
        subjects.push_back(json{{"id", rec.id},
                                {"sex", phantom::to_string(rec.sex)},
                                {"impairment", phantom::to_string(rec.impairment)},
                                {"age_factor", rec.age_factor},
                                {"atrophy", rec.atrophy},
                                {"burden", rec.burden},
                                {"seed", rec.seed},
                                {"dir", rel.string()},
                                {"frame_count", sv.pet_frames.frames.size()},
                                {"pet_offset", transform_to_json(sv.pet_offset)}});
    }
    write_json_file(cohort_manifest_path(cfg),
                    json{{"data_range", cfg.data_range()},
                         {"config", json::parse(config::config_to_text(cfg))},
                         {"subjects", subjects}});
    std::cout << "wrote " << records.size() << " subjects under " << cfg.data_dir.string()
              << "\n";
    return 0;
}

int cmd_preprocess(const config::RunConfig& cfg) {
    const CohortManifest manifest = load_cohort_manifest(cfg);
    json subjects = json::array();
    for (const auto& entry : manifest.entries) {
        const Volume mri = io::read_volume(cfg.data_dir / entry.dir / "mri.abtv");
        const FrameSequence frames = load_frames(cfg, entry);
        const auto pp = prep::preprocess_subject(mri, frames, cfg.late_window_start_min,
                                                 cfg.registration);
        const fs::path rel = fs::path("preproc") / entry.record.id;
        const fs::path dir = cfg.data_dir / rel;
        fs::create_directories(dir);
        io::write_volume(dir / "pet_suvr.abtv", pp.pet_suvr);
        io::write_volume(dir / "brain_mask.abtv", pp.brain_mask.to_volume(mri.spacing_mm));
        write_json_file(dir / "transform.json", transform_to_json(pp.registration.transform));
        subjects.push_back(json{{"id", entry.record.id},
                                {"dir", rel.string()},
                                {"registration",
                                 {{"converged", pp.registration.converged},
                                  {"final_mse", pp.registration.final_mse},
                                  {"iterations", pp.registration.iterations}}}});
    }
    write_json_file(cfg.data_dir / "preproc.json",
                    json{{"window_start_min", cfg.late_window_start_min},
                         {"data_range", manifest.data_range},
                         {"subjects", subjects}});
    std::cout << "preprocessed " << manifest.entries.size() << " subjects\n";
    return 0;
}

BrainMask mask_from_volume(const Volume& v) {
    BrainMask m = BrainMask::empty_like(v.dims);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) m.bits[i] = v.voxels[i] > 0.5;
    return m;
}

struct LoadedSubject {
    Volume mri;
    Volume pet_suvr;
    BrainMask mask;
};

LoadedSubject load_preprocessed(const config::RunConfig& cfg, const std::string& id) {
    LoadedSubject s;
    s.mri = io::read_volume(cfg.data_dir / "raw" / id / "mri.abtv");
    const fs::path dir = cfg.data_dir / "preproc" / id;
    if (!fs::exists(dir / "pet_suvr.abtv")) {
        throw MissingSubjectData("no preprocessed data for " + id);
    }
    s.pet_suvr = io::read_volume(dir / "pet_suvr.abtv");
    s.mask = mask_from_volume(io::read_volume(dir / "brain_mask.abtv"));
    return s;
}

json split_to_json(const train::SplitManifest& split, double test_fraction,
                   std::uint64_t seed) {
    json strata = json::array();
    for (const auto& s : split.strata) {
        strata.push_back(
            json{{"name", s.name}, {"train", s.train_count}, {"test", s.test_count}});
    }
    return json{{"test_fraction", test_fraction},
                {"seed", seed},
                {"train_ids", split.train_ids},
                {"test_ids", split.test_ids},
                {"strata", strata}};
}

int cmd_train(const config::RunConfig& cfg) {
    const CohortManifest manifest = load_cohort_manifest(cfg);
    std::vector<phantom::SubjectRecord> records;
    for (const auto& e : manifest.entries) records.push_back(e.record);

    const std::uint64_t split_seed = derive_seed(cfg.seed, kSplitKey);
    const auto split = train::stratified_split(records, cfg.test_fraction, split_seed);
    fs::create_directories(cfg.run_dir);
    write_json_file(cfg.run_dir / "split.json",
                    split_to_json(split, cfg.test_fraction, split_seed));

    train::Dataset dataset;
    for (const std::string& id : split.train_ids) {
        const LoadedSubject s = load_preprocessed(cfg, id);
        train::append_subject_slices(dataset, id, s.mri, s.pet_suvr, s.mask);
    }
    train::assert_no_test_leakage(dataset, split);

    train::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.seed = derive_seed(cfg.seed, kTrainKey);
    tc.learning_rate = cfg.learning_rate;
    tc.beta1 = cfg.beta1;
    tc.beta2 = cfg.beta2;
    tc.checkpoint_every = cfg.checkpoint_every;
    tc.loss_weights = cfg.loss_weights;
    tc.gen = cfg.gen;
    tc.disc = cfg.disc;
    tc.out_dir = cfg.run_dir;
    const auto result = train::train(dataset, tc);

    io::CsvWriter csv(cfg.run_dir / "loss_log.csv");
    csv.row({"epoch", "d_loss", "g_adv", "g_masked_l1"});
    for (const auto& e : result.loss_log) {
        csv.row({io::CsvWriter::integer(e.epoch), io::CsvWriter::number(e.d_loss),
                 io::CsvWriter::number(e.g_adv), io::CsvWriter::number(e.g_masked_l1)});
    }
    csv.close();
    std::cout << "trained on " << dataset.pairs.size() << " slices from "
              << split.train_ids.size() << " subjects; checkpoints in "
              << cfg.run_dir.string() << "\n";
    return 0;
}

Volume synthesize_volume(const model::Checkpoint& ckpt, const LoadedSubject& subject) {
    const auto slices = prep::slice_axial(subject.mri);
    std::vector<const Image2D*> batch;
    for (const auto& s : slices) batch.push_back(&s);
    const Tensor mri = model::tensor_from_images(batch);
    const Tensor out = model::generator_forward(ckpt.generator, ckpt.gen_config, mri);
    std::vector<Image2D> out_slices;
    for (int z = 0; z < static_cast<int>(slices.size()); ++z) {
        out_slices.push_back(model::image_from_tensor(out, z));
    }
    return prep::stack_axial(out_slices, subject.mri.spacing_mm, VolumeUnits::suvr);
}

fs::path default_checkpoint(const config::RunConfig& cfg) {
    return cfg.run_dir / "checkpoint-final.abtc";
}

int cmd_synthesize(const config::RunConfig& cfg, const std::string& checkpoint_arg,
                   const std::string& subject_arg) {
    const fs::path ckpt_path =
        checkpoint_arg.empty() ? default_checkpoint(cfg) : fs::path(checkpoint_arg);
    const auto ckpt = model::load_checkpoint(ckpt_path);

    std::vector<std::string> ids;
    if (!subject_arg.empty()) {
        ids.push_back(subject_arg);
    } else {
        const json j = load_json_file(cfg.run_dir / "split.json");
        ids = j.at("test_ids").get<std::vector<std::string>>();
    }
    const fs::path out_dir = cfg.run_dir / "synth";
    fs::create_directories(out_dir);
    for (const std::string& id : ids) {
        const LoadedSubject s = load_preprocessed(cfg, id);
        io::write_volume(out_dir / (id + ".abtv"), synthesize_volume(ckpt, s));
    }
    std::cout << "synthesized " << ids.size() << " volumes into " << out_dir.string() << "\n";
    return 0;
}

json histogram_to_json(const eval::Histogram& h) {
    return json{{"edges", h.edges}, {"counts", h.counts}};
}

int cmd_evaluate(const config::RunConfig& cfg, const std::string& checkpoint_arg) {
    const fs::path ckpt_path =
        checkpoint_arg.empty() ? default_checkpoint(cfg) : fs::path(checkpoint_arg);
    const auto ckpt = model::load_checkpoint(ckpt_path);
    const json split_json = load_json_file(cfg.run_dir / "split.json");
    const auto test_ids = split_json.at("test_ids").get<std::vector<std::string>>();
    const json preproc = load_json_file(cfg.data_dir / "preproc.json");
    const double data_range = preproc.at("data_range").get<double>();

    std::vector<eval::SubjectData> subjects;
    for (const std::string& id : test_ids) {
        LoadedSubject s = load_preprocessed(cfg, id);
        subjects.push_back(
            {id, std::move(s.mri), std::move(s.pet_suvr), std::move(s.mask)});
    }

    const fs::path eval_dir = cfg.run_dir / "eval";
    fs::create_directories(eval_dir);
    if (cfg.difference_maps) fs::create_directories(eval_dir / "diff");

    const auto synthesizer = [&](const eval::SubjectData& subject) {
        LoadedSubject view;
        view.mri = subject.mri;
        Volume synth = synthesize_volume(ckpt, view);
        if (cfg.difference_maps) {
            io::write_volume(eval_dir / "diff" / (subject.subject_id + ".abtv"),
                             eval::difference_map(subject.pet_suvr, synth, subject.mask));
        }
        return synth;
    };
    const auto report = eval::evaluate_cohort(subjects, synthesizer, data_range);

    io::CsvWriter csv(eval_dir / "metrics.csv");
    csv.row({"subject_id", "ssim", "psnr_db", "suvr_true", "suvr_synth"});
    for (const auto& r : report.records) {
        csv.row({r.subject_id, io::CsvWriter::number(r.ssim), io::CsvWriter::number(r.psnr_db),
                 io::CsvWriter::number(r.suvr_true), io::CsvWriter::number(r.suvr_synth)});
    }
    csv.close();

    write_json_file(eval_dir / "summary.json",
                    json{{"subjects", report.records.size()},
                         {"r_squared", report.r_squared},
                         {"mean_ssim", report.mean_ssim},
                         {"std_ssim", report.std_ssim},
                         {"mean_psnr", report.mean_psnr},
                         {"std_psnr", report.std_psnr},
                         {"data_range", data_range},
                         {"ssim_histogram", histogram_to_json(report.ssim_histogram)},
                         {"psnr_histogram", histogram_to_json(report.psnr_histogram)}});
    std::cout << "evaluated " << report.records.size() << " subjects: mean SSIM "
              << report.mean_ssim << ", mean PSNR " << report.mean_psnr << " dB, R^2 "
              << report.r_squared << "\n";
    return 0;
}

int cmd_report(const config::RunConfig& cfg, const std::string& checkpoint_arg) {
    const fs::path ckpt_path =
        checkpoint_arg.empty() ? default_checkpoint(cfg) : fs::path(checkpoint_arg);
    const auto ckpt = model::load_checkpoint(ckpt_path);
    const json split_json = load_json_file(cfg.run_dir / "split.json");
    const auto test_ids = split_json.at("test_ids").get<std::vector<std::string>>();
    const json preproc = load_json_file(cfg.data_dir / "preproc.json");
    const double data_range = preproc.at("data_range").get<double>();

    const fs::path report_dir = cfg.run_dir / "report";
    fs::create_directories(report_dir);

    const int n = std::min<int>(cfg.report_subjects, static_cast<int>(test_ids.size()));
    for (int k = 0; k < n; ++k) {
        const std::string& id = test_ids[static_cast<std::size_t>(k)];
        const LoadedSubject s = load_preprocessed(cfg, id);
        const Volume synth = synthesize_volume(ckpt, s);
        const Volume diff = eval::difference_map(s.pet_suvr, synth, s.mask);
        const int mid = s.mri.dims[2] / 2;
        const auto mri_slices = prep::slice_axial(s.mri);
        const auto pet_slices = prep::slice_axial(s.pet_suvr);
        const auto synth_slices = prep::slice_axial(synth);
        const auto diff_slices = prep::slice_axial(diff);
        io::render_slice_pgm(mri_slices[mid], 0.0, 1.0, report_dir / (id + "_mri.pgm"));
        io::render_slice_pgm(pet_slices[mid], 0.0, data_range,
                             report_dir / (id + "_pet_true.pgm"));
        io::render_slice_pgm(synth_slices[mid], 0.0, data_range,
                             report_dir / (id + "_pet_synth.pgm"));
        io::render_slice_pgm(diff_slices[mid], -0.5, 0.5, report_dir / (id + "_diff.pgm"));
    }

    const fs::path summary_path = cfg.run_dir / "eval" / "summary.json";
    std::string summary_line = "no evaluation summary found; run `abt evaluate` first";
    if (fs::exists(summary_path)) {
        const json summary = load_json_file(summary_path);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "subjects=%zu mean_ssim=%.4f mean_psnr=%.2f r_squared=%.4f",
                      summary.at("subjects").get<std::size_t>(),
                      summary.at("mean_ssim").get<double>(),
                      summary.at("mean_psnr").get<double>(),
                      summary.at("r_squared").get<double>());
        summary_line = buf;
    }
    std::ofstream txt(report_dir / "summary.txt");
    txt << summary_line << "\n";
    std::cout << "report for " << n << " subjects in " << report_dir.string() << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"structural MRI to amyloid PET translation pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::string data_dir_override, run_dir_override;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed_override, "override the config seed everywhere");
    app.add_option("--data-dir", data_dir_override, "override data_dir");
    app.add_option("--run-dir", run_dir_override, "override run_dir");

    auto* gen_data = app.add_subcommand("gen-data", "generate the phantom cohort");
    auto* preprocess = app.add_subcommand("preprocess", "late-window sum, masks, registration");
    auto* train_cmd = app.add_subcommand("train", "stratified split and adversarial training");
    auto* synthesize = app.add_subcommand("synthesize", "write synthetic PET volumes");
    auto* evaluate = app.add_subcommand("evaluate", "SSIM/PSNR/SUVR metrics on held-out data");
    auto* report = app.add_subcommand("report", "render PGM panels and a text summary");

    std::string checkpoint_arg;
    std::string subject_arg;
    for (CLI::App* cmd : {synthesize, evaluate, report}) {
        cmd->add_option("--checkpoint", checkpoint_arg,
                        "checkpoint file (default: <run_dir>/checkpoint-final.abtc)");
    }
    synthesize->add_option("--subject", subject_arg, "synthesize one subject id");

    // spot unknown subcommands up front; CLI11 folds them into a generic
    // "subcommand required" complaint otherwise
    {
        const std::set<std::string> known = {"gen-data",   "preprocess", "train",
                                             "synthesize", "evaluate",   "report"};
        const std::set<std::string> value_opts = {"--config",   "--seed",    "--data-dir",
                                                  "--run-dir",  "--checkpoint", "--subject"};
        bool skip_value = false;
        for (const std::string& a : args) {
            if (skip_value) {
                skip_value = false;
                continue;
            }
            if (!a.empty() && a[0] == '-') {
                const auto eq = a.find('=');
                const std::string name = eq == std::string::npos ? a : a.substr(0, eq);
                skip_value = value_opts.count(name) > 0 && eq == std::string::npos;
                continue;
            }
            if (!known.count(a)) {
                std::cerr << "error: UnknownCommand: \"" << a << "\"\n";
                return 2;
            }
            break;
        }
    }

    try {
        std::vector<std::string> argv_rev(args.rbegin(), args.rend());
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const bool unknown = std::string(e.get_name()) == "ExtrasError";
        std::cerr << "error: " << (unknown ? "UnknownCommand" : "Usage") << ": " << e.what()
                  << "\n";
        return 2;
    }

    try {
        config::RunConfig cfg =
            config_path.empty() ? config::default_config() : config::load_config_file(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (!data_dir_override.empty()) cfg.data_dir = data_dir_override;
        if (!run_dir_override.empty()) cfg.run_dir = run_dir_override;

        if (gen_data->parsed()) return cmd_gen_data(cfg);
        if (preprocess->parsed()) return cmd_preprocess(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (synthesize->parsed()) return cmd_synthesize(cfg, checkpoint_arg, subject_arg);
        if (evaluate->parsed()) return cmd_evaluate(cfg, checkpoint_arg);
        if (report->parsed()) return cmd_report(cfg, checkpoint_arg);
        std::cerr << "error: UnknownCommand: no subcommand given\n";
        return 2;
    } catch (const ConfigParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownCommand& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace abt::cli
