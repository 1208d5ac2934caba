#include "abt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "abt/rng.hpp"

namespace abt::model {

namespace {

using nlohmann::json;

// channel width per encoder level, capped at 8x base
int level_channels(int base, int level) {
    return base * (1 << std::min(level - 1, 3));
}

Tensor gaussian_tensor(const Shape& shape, Rng& rng, double stddev) {
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (double& v : data) v = stddev * rng.normal();
    return Tensor::from_data(shape, std::move(data), true);
}

// Fan-in-scaled initialization. Without normalization layers the activation
// scale must be preserved by the weights themselves; a fixed small stddev
// shrinks the signal by roughly an order of magnitude per stage and the
// quantitative pathway never trains.
double conv_init_std(int fan_in) { return std::sqrt(2.0 / fan_in); }

void validate_generator_config(const GeneratorConfig& c) {
    if (c.depth < 2) throw InvalidHyperparam("generator depth must be >= 2");
    if (c.base_filters < 1) throw InvalidHyperparam("base_filters must be >= 1");
    if (c.in_channels < 1 || c.out_channels < 1) {
        throw InvalidHyperparam("channel counts must be >= 1");
    }
    if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
        throw InvalidHyperparam("dropout rate must lie in [0,1)");
    }
}

void validate_discriminator_config(const DiscriminatorConfig& c) {
    if (c.depth < 1) throw InvalidHyperparam("discriminator depth must be >= 1");
    if (c.base_filters < 1) throw InvalidHyperparam("base_filters must be >= 1");
    if (c.input_size % (1 << c.depth) != 0) {
        throw InvalidHyperparam("input size must be divisible by 2^depth");
    }
}

}  // namespace

ModelParams init_generator(const GeneratorConfig& config, std::uint64_t seed) {
    validate_generator_config(config);
    ModelParams p;
    int in_ch = config.in_channels;
    for (int i = 1; i <= config.depth; ++i) {
        const int out_ch = level_channels(config.base_filters, i);
        Rng rng(derive_seed(seed, 0xe, static_cast<std::uint64_t>(i)));
        p.add("enc" + std::to_string(i) + ".conv.weight",
              gaussian_tensor({out_ch, in_ch, 4, 4}, rng, conv_init_std(in_ch * 16)));
        p.add("enc" + std::to_string(i) + ".conv.bias", Tensor::zeros({out_ch}, true));
        in_ch = out_ch;
    }
    for (int i = config.depth; i >= 2; --i) {
        const int out_ch = level_channels(config.base_filters, i - 1);
        Rng rng(derive_seed(seed, 0xd, static_cast<std::uint64_t>(i)));
        // stride-2 transpose convs spread each input over ~4 output taps
        p.add("dec" + std::to_string(i) + ".tconv.weight",
              gaussian_tensor({in_ch, out_ch, 4, 4}, rng, conv_init_std(in_ch * 4)));
        p.add("dec" + std::to_string(i) + ".tconv.bias", Tensor::zeros({out_ch}, true));
        in_ch = config.use_skips ? 2 * out_ch : out_ch;
    }
    Rng rng(derive_seed(seed, 0xd, 1));
    p.add("out.tconv.weight",
          gaussian_tensor({in_ch, config.out_channels, 4, 4}, rng, conv_init_std(in_ch * 4)));
    p.add("out.tconv.bias", Tensor::zeros({config.out_channels}, true));
    return p;
}

ModelParams init_discriminator(const DiscriminatorConfig& config, std::uint64_t seed) {
    validate_discriminator_config(config);
    ModelParams p;
    int in_ch = config.in_channels;
    for (int i = 1; i <= config.depth; ++i) {
        const int out_ch = level_channels(config.base_filters, i);
        Rng rng(derive_seed(seed, 0xb, static_cast<std::uint64_t>(i)));
        p.add("blk" + std::to_string(i) + ".conv.weight",
              gaussian_tensor({out_ch, in_ch, 4, 4}, rng, conv_init_std(in_ch * 16)));
        p.add("blk" + std::to_string(i) + ".conv.bias", Tensor::zeros({out_ch}, true));
        in_ch = out_ch;
    }
    const int spatial = config.input_size >> config.depth;
    const int features = in_ch * spatial * spatial;
    Rng rng(derive_seed(seed, 0xf));
    p.add("head.linear.weight",
          gaussian_tensor({1, features}, rng, std::sqrt(1.0 / features)));
    p.add("head.linear.bias", Tensor::zeros({1}, true));
    return p;
}

Tensor generator_forward(const ModelParams& params, const GeneratorConfig& config,
                         const Tensor& mri, const DropoutContext& ctx) {
    validate_generator_config(config);
    const Shape& s = mri.shape();
    if (s.size() != 4 || s[1] != config.in_channels) {
        throw ShapeMismatch("generator expects [N," + std::to_string(config.in_channels) +
                            ",H,W], got " + shape_str(s));
    }
    const int stride_total = 1 << config.depth;
    if (s[2] % stride_total != 0 || s[3] % stride_total != 0) {
        throw ShapeMismatch("slice side must be divisible by 2^depth");
    }

    std::vector<Tensor> enc_out;
    Tensor x = mri;
    for (int i = 1; i <= config.depth; ++i) {
        const std::string base = "enc" + std::to_string(i) + ".conv.";
        x = conv2d(x, params.at(base + "weight"), params.at(base + "bias"), 2, 1);
        x = activation(x, Activation::leaky_relu(0.2));
        enc_out.push_back(x);
    }

    for (int i = config.depth; i >= 2; --i) {
        const std::string base = "dec" + std::to_string(i) + ".tconv.";
        x = conv_transpose2d(x, params.at(base + "weight"), params.at(base + "bias"), 2, 1);
        x = activation(x, Activation::relu());
        const bool innermost_two = i >= config.depth - 1;
        if (innermost_two && config.dropout_rate > 0.0) {
            x = dropout(x, config.dropout_rate, ctx.training,
                        derive_seed(ctx.seed, 0xd0 + static_cast<std::uint64_t>(i), ctx.step));
        }
        if (config.use_skips) x = concat_channels(x, enc_out[static_cast<std::size_t>(i - 2)]);
    }
    x = conv_transpose2d(x, params.at("out.tconv.weight"), params.at("out.tconv.bias"), 2, 1);
    return activation(x, Activation::relu());
}

Tensor discriminator_forward(const ModelParams& params, const DiscriminatorConfig& config,
                             const Tensor& mri, const Tensor& pet) {
    validate_discriminator_config(config);
    if (mri.shape() != pet.shape()) {
        throw ShapeMismatch("discriminator inputs differ: " + shape_str(mri.shape()) + " vs " +
                            shape_str(pet.shape()));
    }
    if (mri.shape()[2] != config.input_size || mri.shape()[3] != config.input_size) {
        throw ShapeMismatch("discriminator built for side " + std::to_string(config.input_size));
    }
    Tensor x = concat_channels(mri, pet);
    if (x.shape()[1] != config.in_channels) {
        throw ShapeMismatch("conditioned pair has " + std::to_string(x.shape()[1]) +
                            " channels, config expects " + std::to_string(config.in_channels));
    }
    for (int i = 1; i <= config.depth; ++i) {
        const std::string base = "blk" + std::to_string(i) + ".conv.";
        x = conv2d(x, params.at(base + "weight"), params.at(base + "bias"), 2, 1);
        x = activation(x, Activation::leaky_relu(0.2));
    }
    const Shape& xs = x.shape();
    x = reshape(x, {xs[0], xs[1] * xs[2] * xs[3]});
    x = linear(x, params.at("head.linear.weight"), params.at("head.linear.bias"));
    return activation(x, Activation::sigmoid());
}

Tensor masked_l1_loss(const Tensor& pred, const Tensor& target, const Tensor& mask) {
    if (pred.shape() != target.shape() || pred.shape() != mask.shape()) {
        throw ShapeMismatch("masked_l1_loss shapes disagree");
    }
    double mask_sum = 0.0;
    for (double v : mask.data()) mask_sum += v;
    if (mask_sum <= 0.0) throw EmptyMask("masked_l1_loss needs a non-empty mask");
    return mul_scalar(sum(mul(abs_val(sub(pred, target)), mask)), 1.0 / mask_sum);
}

AdvLosses adversarial_losses(const Tensor& d_real, const Tensor& d_fake) {
    constexpr double kEps = 1e-7;
    const Tensor real_c = clamp(d_real, kEps, 1.0 - kEps);
    const Tensor fake_c = clamp(d_fake, kEps, 1.0 - kEps);
    const Tensor one_minus_fake = add_scalar(mul_scalar(fake_c, -1.0), 1.0);
    AdvLosses out;
    out.d_loss = mul_scalar(add(mean(log_val(real_c)), mean(log_val(one_minus_fake))), -1.0);
    out.g_adv_loss = mul_scalar(mean(log_val(fake_c)), -1.0);
    return out;
}

Tensor generator_objective(const Tensor& g_adv_loss, const Tensor& masked_l1,
                           const LossWeights& weights) {
    if (!(weights.lambda_masked_l1 > 0.0) || !(weights.lambda_adv > 0.0)) {
        throw InvalidHyperparam("loss weights must be strictly positive");
    }
    return add(mul_scalar(g_adv_loss, weights.lambda_adv),
               mul_scalar(masked_l1, weights.lambda_masked_l1));
}

ParamAudit audit_params(const ModelParams& params) {
    ParamAudit audit;
    for (const auto& [name, t] : params.entries) {
        const bool is_weight = name.ends_with(".weight");
        const bool is_bias = name.ends_with(".bias");
        const std::size_t rank = t.shape().size();
        if (name.find(".conv.") != std::string::npos && is_weight && rank == 4) {
            audit.conv_tensors++;
        } else if (name.find(".conv.") != std::string::npos && is_bias && rank == 1) {
            audit.conv_tensors++;
        } else if (name.find(".tconv.") != std::string::npos && is_weight && rank == 4) {
            audit.tconv_tensors++;
        } else if (name.find(".tconv.") != std::string::npos && is_bias && rank == 1) {
            audit.tconv_tensors++;
        } else if (name.find(".linear.") != std::string::npos && is_weight && rank == 2) {
            audit.linear_tensors++;
        } else if (name.find(".linear.") != std::string::npos && is_bias && rank == 1) {
            audit.linear_tensors++;
        } else {
            audit.norm_or_unknown_tensors++;
        }
    }
    return audit;
}

// --- checkpoint io ---

namespace {

constexpr char kMagic[4] = {'A', 'B', 'T', 'C'};

json config_to_json(const GeneratorConfig& c) {
    return json{{"in_channels", c.in_channels},   {"out_channels", c.out_channels},
                {"base_filters", c.base_filters}, {"depth", c.depth},
                {"use_skips", c.use_skips},       {"dropout_rate", c.dropout_rate}};
}

GeneratorConfig generator_config_from_json(const json& j) {
    GeneratorConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.out_channels = j.at("out_channels").get<int>();
    c.base_filters = j.at("base_filters").get<int>();
    c.depth = j.at("depth").get<int>();
    c.use_skips = j.at("use_skips").get<bool>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    return c;
}

json config_to_json(const DiscriminatorConfig& c) {
    return json{{"in_channels", c.in_channels},
                {"base_filters", c.base_filters},
                {"depth", c.depth},
                {"input_size", c.input_size}};
}

DiscriminatorConfig discriminator_config_from_json(const json& j) {
    DiscriminatorConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.base_filters = j.at("base_filters").get<int>();
    c.depth = j.at("depth").get<int>();
    c.input_size = j.at("input_size").get<int>();
    return c;
}

struct PayloadWriter {
    std::vector<double> payload;
    json arrays = json::array();

    void add(const std::string& name, const Shape& shape, std::span<const double> data) {
        arrays.push_back(json{{"name", name},
                              {"shape", shape},
                              {"offset", payload.size()},
                              {"length", data.size()}});
        payload.insert(payload.end(), data.begin(), data.end());
    }

    void add_params(const std::string& prefix, const ModelParams& params) {
        for (const auto& [name, t] : params.entries) add(prefix + name, t.shape(), t.data());
    }

    void add_adam(const std::string& prefix, const AdamState& st) {
        for (std::size_t i = 0; i < st.first_moment.size(); ++i) {
            add(prefix + "m" + std::to_string(i), {static_cast<int>(st.first_moment[i].size())},
                st.first_moment[i]);
            add(prefix + "v" + std::to_string(i), {static_cast<int>(st.second_moment[i].size())},
                st.second_moment[i]);
        }
    }
};

struct PayloadReader {
    const json* arrays;
    const std::vector<double>* payload;

    std::vector<double> get(const std::string& name, Shape* shape_out = nullptr) const {
        for (const auto& entry : *arrays) {
            if (entry.at("name").get<std::string>() != name) continue;
            const std::size_t offset = entry.at("offset").get<std::size_t>();
            const std::size_t length = entry.at("length").get<std::size_t>();
            if (offset + length > payload->size()) {
                throw TruncatedPayload("array " + name + " exceeds payload");
            }
            if (shape_out) {
                *shape_out = entry.at("shape").get<Shape>();
            }
            return std::vector<double>(payload->begin() + offset,
                                       payload->begin() + offset + length);
        }
        throw HeaderMismatch("missing array " + name);
    }
};

json adam_meta(const AdamState& st) {
    return json{{"learning_rate", st.learning_rate},
                {"beta1", st.beta1},
                {"beta2", st.beta2},
                {"epsilon", st.epsilon},
                {"step_count", st.step_count},
                {"slots", st.first_moment.size()}};
}

AdamState adam_from_meta(const json& j, const std::string& prefix, const PayloadReader& reader) {
    AdamState st;
    st.learning_rate = j.at("learning_rate").get<double>();
    st.beta1 = j.at("beta1").get<double>();
    st.beta2 = j.at("beta2").get<double>();
    st.epsilon = j.at("epsilon").get<double>();
    st.step_count = j.at("step_count").get<std::int64_t>();
    const std::size_t slots = j.at("slots").get<std::size_t>();
    for (std::size_t i = 0; i < slots; ++i) {
        st.first_moment.push_back(reader.get(prefix + "m" + std::to_string(i)));
        st.second_moment.push_back(reader.get(prefix + "v" + std::to_string(i)));
    }
    return st;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    PayloadWriter w;
    w.add_params("g.", ckpt.generator);
    w.add_params("d.", ckpt.discriminator);
    json header{{"version", 1},
                {"generator_config", config_to_json(ckpt.gen_config)},
                {"discriminator_config", config_to_json(ckpt.disc_config)},
                {"generator_params", ckpt.generator.size()},
                {"discriminator_params", ckpt.discriminator.size()}};
    if (ckpt.has_train_state) {
        w.add_adam("opt.g.", ckpt.train_state.gen_opt);
        w.add_adam("opt.d.", ckpt.train_state.disc_opt);
        header["train_state"] = json{{"epoch", ckpt.train_state.epoch},
                                     {"global_step", ckpt.train_state.global_step},
                                     {"seed", ckpt.train_state.seed},
                                     {"gen_opt", adam_meta(ckpt.train_state.gen_opt)},
                                     {"disc_opt", adam_meta(ckpt.train_state.disc_opt)}};
    }
    header["arrays"] = std::move(w.arrays);

    const std::string header_str = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    char lenbuf[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                      static_cast<char>((len >> 16) & 0xff),
                      static_cast<char>((len >> 24) & 0xff)};
    out.write(lenbuf, 4);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(w.payload.data()),
              static_cast<std::streamsize>(w.payload.size() * sizeof(double)));
    if (!out) throw Error("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw BadMagic("not a checkpoint file: " + path.string());
    }
    unsigned char lenbuf[4];
    in.read(reinterpret_cast<char*>(lenbuf), 4);
    if (!in) throw TruncatedPayload("missing header length");
    const std::uint32_t len = static_cast<std::uint32_t>(lenbuf[0]) |
                              (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                              (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                              (static_cast<std::uint32_t>(lenbuf[3]) << 24);
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (!in) throw TruncatedPayload("header shorter than declared");
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw HeaderMismatch(std::string("bad checkpoint header: ") + e.what());
    }

    std::vector<double> payload;
    {
        std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
        if (raw.size() % sizeof(double) != 0) {
            throw TruncatedPayload("payload is not a whole number of doubles");
        }
        payload.resize(raw.size() / sizeof(double));
        std::memcpy(payload.data(), raw.data(), raw.size());
    }

    Checkpoint ckpt;
    try {
        ckpt.gen_config = generator_config_from_json(header.at("generator_config"));
        ckpt.disc_config = discriminator_config_from_json(header.at("discriminator_config"));
        const PayloadReader reader{&header.at("arrays"), &payload};

        // parameter order and names come from the manifest order
        for (const auto& entry : header.at("arrays")) {
            const std::string name = entry.at("name").get<std::string>();
            if (name.starts_with("g.") || name.starts_with("d.")) {
                Shape shape;
                std::vector<double> data = reader.get(name, &shape);
                ModelParams& target = name.starts_with("g.") ? ckpt.generator
                                                             : ckpt.discriminator;
                target.add(name.substr(2), Tensor::from_data(shape, std::move(data), true));
            }
        }
        if (header.contains("train_state")) {
            const json& ts = header.at("train_state");
            ckpt.has_train_state = true;
            ckpt.train_state.epoch = ts.at("epoch").get<std::int64_t>();
            ckpt.train_state.global_step = ts.at("global_step").get<std::int64_t>();
            ckpt.train_state.seed = ts.at("seed").get<std::uint64_t>();
            ckpt.train_state.gen_opt = adam_from_meta(ts.at("gen_opt"), "opt.g.", reader);
            ckpt.train_state.disc_opt = adam_from_meta(ts.at("disc_opt"), "opt.d.", reader);
        }
    } catch (const json::exception& e) {
        throw HeaderMismatch(std::string("checkpoint header fields: ") + e.what());
    }
    return ckpt;
}

Tensor tensor_from_images(const std::vector<const Image2D*>& images) {
    if (images.empty()) throw ShapeMismatch("empty batch");
    const int w = images[0]->width, h = images[0]->height;
    std::vector<double> data;
    data.reserve(images.size() * static_cast<std::size_t>(w) * h);
    for (const Image2D* img : images) {
        if (img->width != w || img->height != h) throw ShapeMismatch("batch sizes differ");
        data.insert(data.end(), img->pixels.begin(), img->pixels.end());
    }
    return Tensor::from_data({static_cast<int>(images.size()), 1, h, w}, std::move(data));
}

Image2D image_from_tensor(const Tensor& t, int batch_index, int channel) {
    const Shape& s = t.shape();
    if (s.size() != 4) throw ShapeMismatch("expected [N,C,H,W]");
    Image2D img = Image2D::zeros(s[3], s[2]);
    const std::int64_t plane = static_cast<std::int64_t>(s[2]) * s[3];
    const std::int64_t offset = (static_cast<std::int64_t>(batch_index) * s[1] + channel) * plane;
    std::copy(t.data().begin() + offset, t.data().begin() + offset + plane, img.pixels.begin());
    return img;
}

}  // namespace abt::model
