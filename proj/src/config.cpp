#include "abt/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace abt::config {

namespace {

using nlohmann::json;

// Tracks which keys of one JSON object were consumed and rejects leftovers.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigParseError(path_ + " must be a JSON object");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        if (auto it = obj_.find(key); it != obj_.end()) {
            seen_.insert(key);
            try {
                out = it->get<T>();
            } catch (const json::exception&) {
                throw ConfigParseError(path_ + "." + key + " has the wrong type");
            }
        }
    }

    bool has(const char* key) {
        if (obj_.contains(key)) {
            seen_.insert(key);
            return true;
        }
        return false;
    }

    const json& sub(const char* key) { return obj_.at(key); }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigParseError("unknown key \"" + it.key() + "\" in " + path_);
            }
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_phantom(const json& j, RunConfig& cfg) {
    ObjectReader r(j, "phantom");
    r.get("subjects", cfg.subjects);
    std::vector<int> dims = {cfg.phantom.dims[0], cfg.phantom.dims[1], cfg.phantom.dims[2]};
    r.get("dims", dims);
    if (dims.size() != 3) throw ConfigParseError("phantom.dims must have 3 entries");
    cfg.phantom.dims = {dims[0], dims[1], dims[2]};
    std::vector<double> spacing = {cfg.phantom.spacing_mm[0], cfg.phantom.spacing_mm[1],
                                   cfg.phantom.spacing_mm[2]};
    r.get("spacing_mm", spacing);
    if (spacing.size() != 3) throw ConfigParseError("phantom.spacing_mm must have 3 entries");
    cfg.phantom.spacing_mm = {spacing[0], spacing[1], spacing[2]};
    r.get("uptake_gain", cfg.phantom.uptake_gain);
    r.get("burden_max", cfg.phantom.burden_max);
    r.get("mri_noise", cfg.phantom.mri_noise);
    r.get("pet_noise", cfg.phantom.pet_noise);
    r.get("misalign", cfg.phantom.misalign);
    r.get("max_shift_voxels", cfg.phantom.max_shift_voxels);
    r.get("max_scale_delta", cfg.phantom.max_scale_delta);
    r.get("max_shear_delta", cfg.phantom.max_shear_delta);
    r.get("frame_count", cfg.phantom.frame_count);
    r.get("scan_minutes", cfg.phantom.scan_minutes);
    r.get("female_fraction", cfg.strata.female);
    if (r.has("impairment_proportions")) {
        ObjectReader p(r.sub("impairment_proportions"), "phantom.impairment_proportions");
        p.get("CN", cfg.strata.cn);
        p.get("impaired", cfg.strata.impaired);
        p.get("AD", cfg.strata.ad);
        p.finish();
    }
    r.finish();
}

void parse_preprocess(const json& j, RunConfig& cfg) {
    ObjectReader r(j, "preprocess");
    r.get("late_window_start_min", cfg.late_window_start_min);
    if (r.has("registration")) {
        ObjectReader reg(r.sub("registration"), "preprocess.registration");
        reg.get("max_iters", cfg.registration.max_iters);
        reg.get("rel_tolerance", cfg.registration.rel_tolerance);
        reg.get("axial_smooth_passes", cfg.registration.axial_smooth_passes);
        reg.get("sample_stride_xy", cfg.registration.sample_stride_xy);
        reg.finish();
    }
    r.finish();
}

void parse_model(const json& j, RunConfig& cfg) {
    ObjectReader r(j, "model");
    r.get("base_filters", cfg.gen.base_filters);
    r.get("depth", cfg.gen.depth);
    r.get("use_skips", cfg.gen.use_skips);
    r.get("dropout_rate", cfg.gen.dropout_rate);
    r.get("disc_base_filters", cfg.disc.base_filters);
    r.get("disc_depth", cfg.disc.depth);
    r.finish();
}

void parse_train(const json& j, RunConfig& cfg) {
    ObjectReader r(j, "train");
    r.get("epochs", cfg.epochs);
    r.get("batch_size", cfg.batch_size);
    r.get("test_fraction", cfg.test_fraction);
    r.get("learning_rate", cfg.learning_rate);
    r.get("beta1", cfg.beta1);
    r.get("beta2", cfg.beta2);
    r.get("lambda_masked_l1", cfg.loss_weights.lambda_masked_l1);
    r.get("lambda_adv", cfg.loss_weights.lambda_adv);
    r.get("checkpoint_every", cfg.checkpoint_every);
    r.finish();
}

void parse_eval(const json& j, RunConfig& cfg) {
    ObjectReader r(j, "eval");
    r.get("difference_maps", cfg.difference_maps);
    r.get("report_subjects", cfg.report_subjects);
    r.finish();
}

}  // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.registration = prep::pipeline_registration_options();
    return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& source_name) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigParseError(source_name + ": " + e.what());
    }
    RunConfig cfg = default_config();

    ObjectReader r(root, source_name);
    r.get("seed", cfg.seed);
    std::string dir;
    dir = cfg.data_dir.string();
    r.get("data_dir", dir);
    cfg.data_dir = dir;
    dir = cfg.run_dir.string();
    r.get("run_dir", dir);
    cfg.run_dir = dir;
    if (r.has("phantom")) parse_phantom(r.sub("phantom"), cfg);
    if (r.has("preprocess")) parse_preprocess(r.sub("preprocess"), cfg);
    if (r.has("model")) parse_model(r.sub("model"), cfg);
    if (r.has("train")) parse_train(r.sub("train"), cfg);
    if (r.has("eval")) parse_eval(r.sub("eval"), cfg);
    r.finish();

    // the discriminator head is sized by the slice side
    cfg.disc.input_size = cfg.phantom.dims[0];
    if (cfg.phantom.dims[0] != cfg.phantom.dims[1]) {
        throw ConfigParseError("phantom.dims x and y must match (square axial slices)");
    }
    return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, path.string());
}

std::string config_to_text(const RunConfig& c) {
    const json j{
        {"seed", c.seed},
        {"data_dir", c.data_dir.string()},
        {"run_dir", c.run_dir.string()},
        {"phantom",
         {{"subjects", c.subjects},
          {"dims", c.phantom.dims},
          {"spacing_mm", c.phantom.spacing_mm},
          {"uptake_gain", c.phantom.uptake_gain},
          {"burden_max", c.phantom.burden_max},
          {"mri_noise", c.phantom.mri_noise},
          {"pet_noise", c.phantom.pet_noise},
          {"misalign", c.phantom.misalign},
          {"max_shift_voxels", c.phantom.max_shift_voxels},
          {"max_scale_delta", c.phantom.max_scale_delta},
          {"max_shear_delta", c.phantom.max_shear_delta},
          {"frame_count", c.phantom.frame_count},
          {"scan_minutes", c.phantom.scan_minutes},
          {"female_fraction", c.strata.female},
          {"impairment_proportions",
           {{"CN", c.strata.cn}, {"impaired", c.strata.impaired}, {"AD", c.strata.ad}}}}},
        {"preprocess",
         {{"late_window_start_min", c.late_window_start_min},
          {"registration",
           {{"max_iters", c.registration.max_iters},
            {"rel_tolerance", c.registration.rel_tolerance},
            {"axial_smooth_passes", c.registration.axial_smooth_passes},
            {"sample_stride_xy", c.registration.sample_stride_xy}}}}},
        {"model",
         {{"base_filters", c.gen.base_filters},
          {"depth", c.gen.depth},
          {"use_skips", c.gen.use_skips},
          {"dropout_rate", c.gen.dropout_rate},
          {"disc_base_filters", c.disc.base_filters},
          {"disc_depth", c.disc.depth}}},
        {"train",
         {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"test_fraction", c.test_fraction},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"lambda_masked_l1", c.loss_weights.lambda_masked_l1},
          {"lambda_adv", c.loss_weights.lambda_adv},
          {"checkpoint_every", c.checkpoint_every}}},
        {"eval",
         {{"difference_maps", c.difference_maps}, {"report_subjects", c.report_subjects}}}};
    return j.dump(2) + "\n";
}

}  // namespace abt::config
