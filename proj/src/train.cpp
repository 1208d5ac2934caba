#include "abt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "abt/preprocess.hpp"
#include "abt/rng.hpp"

namespace abt::train {

void append_subject_slices(Dataset& dataset, const std::string& subject_id, const Volume& mri,
                           const Volume& pet_suvr, const BrainMask& mask) {
    if (mri.dims != pet_suvr.dims || mri.dims != mask.dims) {
        throw ShapeMismatch("subject volumes are on different grids");
    }
    const auto mri_slices = prep::slice_axial(mri);
    const auto pet_slices = prep::slice_axial(pet_suvr);
    const auto mask_slices = prep::slice_axial(mask.to_volume(mri.spacing_mm));
    for (std::size_t z = 0; z < mri_slices.size(); ++z) {
        double mask_sum = 0.0;
        for (double v : mask_slices[z].pixels) mask_sum += v;
        if (mask_sum <= 0.0) continue;
        dataset.pairs.push_back(
            {subject_id, mri_slices[z], pet_slices[z], mask_slices[z]});
    }
}

namespace {

Tensor batch_tensor(const Dataset& data, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end, Image2D SlicePair::*field) {
    std::vector<const Image2D*> items;
    items.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        items.push_back(&(data.pairs[order[i]].*field));
    }
    return model::tensor_from_images(items);
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const model::Checkpoint* resume) {
    if (dataset.pairs.empty()) throw ShapeMismatch("training dataset is empty");
    if (config.epochs < 1 || config.batch_size < 1) {
        throw InvalidHyperparam("epochs and batch_size must be >= 1");
    }

    model::Checkpoint state;
    if (resume) {
        if (!resume->has_train_state) {
            throw InvalidHyperparam("resume checkpoint lacks optimizer state");
        }
        state = *resume;
    } else {
        state.gen_config = config.gen;
        state.disc_config = config.disc;
        state.generator = model::init_generator(config.gen, derive_seed(config.seed, 0x9e));
        state.discriminator =
            model::init_discriminator(config.disc, derive_seed(config.seed, 0xd1));
        state.has_train_state = true;
        state.train_state.seed = config.seed;
        state.train_state.gen_opt = AdamState::init(state.generator, config.learning_rate,
                                                    config.beta1, config.beta2);
        state.train_state.disc_opt = AdamState::init(state.discriminator, config.learning_rate,
                                                     config.beta1, config.beta2);
    }

    TrainResult result;
    const std::int64_t start_epoch = state.train_state.epoch;
    for (std::int64_t epoch = start_epoch; epoch < start_epoch + config.epochs; ++epoch) {
        std::vector<std::size_t> order(dataset.pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(state.train_state.seed, 0x54,
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        EpochLoss log;
        log.epoch = static_cast<int>(epoch);
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            const Tensor mri = batch_tensor(dataset, order, begin, end, &SlicePair::mri);
            const Tensor pet = batch_tensor(dataset, order, begin, end, &SlicePair::pet);
            const Tensor mask = batch_tensor(dataset, order, begin, end, &SlicePair::mask);

            const model::DropoutContext ctx{
                true, state.train_state.seed,
                static_cast<std::uint64_t>(state.train_state.global_step)};
            const Tensor fake =
                model::generator_forward(state.generator, state.gen_config, mri, ctx);

            // discriminator update: real pair up, detached fake pair down
            state.discriminator.zero_grad();
            const Tensor d_real = model::discriminator_forward(state.discriminator,
                                                               state.disc_config, mri, pet);
            const Tensor d_fake_detached = model::discriminator_forward(
                state.discriminator, state.disc_config, mri, fake.detach());
            auto d_losses = model::adversarial_losses(d_real, d_fake_detached);
            d_losses.d_loss.backward();
            adam_step(state.discriminator, state.train_state.disc_opt);

            // generator update against the refreshed discriminator
            state.generator.zero_grad();
            state.discriminator.zero_grad();
            const Tensor d_fake_live = model::discriminator_forward(state.discriminator,
                                                                    state.disc_config, mri, fake);
            const auto g_losses = model::adversarial_losses(d_real.detach(), d_fake_live);
            const Tensor ml1 = model::masked_l1_loss(fake, pet, mask);
            Tensor objective =
                model::generator_objective(g_losses.g_adv_loss, ml1, config.loss_weights);
            objective.backward();
            adam_step(state.generator, state.train_state.gen_opt);

            const double dl = d_losses.d_loss.item();
            const double ga = g_losses.g_adv_loss.item();
            const double gm = ml1.item();
            if (!std::isfinite(dl) || !std::isfinite(ga) || !std::isfinite(gm)) {
                throw NonFiniteLoss("epoch " + std::to_string(epoch) + " batch " +
                                    std::to_string(batches));
            }
            log.d_loss += dl;
            log.g_adv += ga;
            log.g_masked_l1 += gm;
            ++batches;
            state.train_state.global_step += 1;
        }
        log.d_loss /= static_cast<double>(batches);
        log.g_adv /= static_cast<double>(batches);
        log.g_masked_l1 /= static_cast<double>(batches);
        result.loss_log.push_back(log);
        state.train_state.epoch = epoch + 1;

        if (config.out_dir && config.checkpoint_every > 0 &&
            (epoch + 1 - start_epoch) % config.checkpoint_every == 0) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint-epoch-%04lld.abtc",
                          static_cast<long long>(epoch + 1));
            const auto path = *config.out_dir / name;
            model::save_checkpoint(path, state);
            result.checkpoints_written.push_back(path);
        }
    }

    if (config.out_dir) {
        const auto path = *config.out_dir / "checkpoint-final.abtc";
        model::save_checkpoint(path, state);
        result.checkpoints_written.push_back(path);
    }
    result.checkpoint = std::move(state);
    return result;
}

SplitManifest stratified_split(const std::vector<phantom::SubjectRecord>& cohort,
                               double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw InvalidHyperparam("test_fraction must lie in (0,1)");
    }
    if (cohort.empty()) throw StratumTooSmall("cohort is empty");

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        strata[phantom::to_string(cohort[i].sex) + "/" +
               phantom::to_string(cohort[i].impairment)]
            .push_back(i);
    }

    const int global_test =
        static_cast<int>(std::llround(cohort.size() * test_fraction));

    struct Cell {
        std::string name;
        std::vector<std::size_t> members;
        int test_count = 0;
        double remainder = 0.0;
    };
    std::vector<Cell> cells;
    int assigned = 0;
    for (auto& [name, members] : strata) {  // std::map iterates by name
        Cell c;
        c.name = name;
        c.members = std::move(members);
        const double quota = c.members.size() * test_fraction;
        c.test_count = static_cast<int>(std::floor(quota));
        c.remainder = quota - c.test_count;
        assigned += c.test_count;
        cells.push_back(std::move(c));
    }

    std::vector<std::size_t> by_remainder(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) by_remainder[i] = i;
    std::sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
        if (cells[a].remainder != cells[b].remainder) {
            return cells[a].remainder > cells[b].remainder;
        }
        return cells[a].name < cells[b].name;
    });
    int leftover = global_test - assigned;
    for (std::size_t k = 0; leftover > 0; ++k) {
        if (k == by_remainder.size()) {
            throw StratumTooSmall("cannot place remaining test quota");
        }
        Cell& c = cells[by_remainder[k]];
        if (c.test_count < static_cast<int>(c.members.size())) {
            c.test_count += 1;
            --leftover;
        }
    }

    SplitManifest manifest;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        Cell& c = cells[ci];
        Rng rng(derive_seed(seed, 0x57, static_cast<std::uint64_t>(ci)));
        rng.shuffle(c.members);
        StratumSummary summary;
        summary.name = c.name;
        for (std::size_t k = 0; k < c.members.size(); ++k) {
            const std::string& id = cohort[c.members[k]].id;
            if (static_cast<int>(k) < c.test_count) {
                manifest.test_ids.push_back(id);
                summary.test_count++;
            } else {
                manifest.train_ids.push_back(id);
                summary.train_count++;
            }
        }
        manifest.strata.push_back(summary);
    }
    std::sort(manifest.train_ids.begin(), manifest.train_ids.end());
    std::sort(manifest.test_ids.begin(), manifest.test_ids.end());
    return manifest;
}

void assert_no_test_leakage(const Dataset& dataset, const SplitManifest& split) {
    const std::set<std::string> test_ids(split.test_ids.begin(), split.test_ids.end());
    for (const auto& pair : dataset.pairs) {
        if (test_ids.count(pair.subject_id)) {
            throw Error("test subject " + pair.subject_id +
                        " leaked into the training dataset");
        }
    }
}

}  // namespace abt::train
