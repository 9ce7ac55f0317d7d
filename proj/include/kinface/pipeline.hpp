// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinface/augment.hpp"
#include "kinface/checkpoint.hpp"
#include "kinface/codec.hpp"
#include "kinface/errors.hpp"
#include "kinface/image.hpp"
#include "kinface/labels.hpp"
#include "kinface/manifest.hpp"
#include "kinface/mlp.hpp"
#include "kinface/png_io.hpp"
#include "kinface/rng.hpp"

namespace kinface {

enum class LossSpace { kLatent, kImage };

inline const char* to_string(LossSpace s) {
    return s == LossSpace::kLatent ? "latent" : "image";
}

inline LossSpace loss_space_from_string(const std::string& s) {
    if (s == "latent") return LossSpace::kLatent;
    if (s == "image") return LossSpace::kImage;
    throw ConfigError("loss_space must be latent|image, got '" + s + "'");
}

struct TrainConfig {
    std::size_t batch_size = 16;
    double lr = 1e-5;
    std::size_t epochs = 200;
    double train_fraction = 0.8;
    LossSpace loss_space = LossSpace::kLatent;  // per the paper's training text;
                                                // image honors the loss equation literally
    bool use_segmentation = false;
    std::uint64_t seed = 0;
    CodecDescriptor codec;
    AugmentConfig augment;

    void validate() const {
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (!(lr >= 0.0)) throw ConfigError("TrainConfig: lr must be non-negative");
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
            throw ConfigError("TrainConfig: train_fraction must be in [0,1]");
        augment.validate();
    }
};

// Digest over everything a checkpoint needs to agree with at predict time:
// the codec descriptor and the segmentation switch.
inline std::uint64_t config_digest(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "codec:type=" << cfg.codec.type << ";seed=" << cfg.codec.seed
       << ";wres=" << cfg.codec.working_resolution << ";ores=" << cfg.codec.output_resolution
       << ";endpoint=" << cfg.codec.endpoint << "|seg=" << (cfg.use_segmentation ? 1 : 0);
    return SeededRng::fnv1a(os.str());
}

inline std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
    return std::string(buf);
}

// RNG stream tags used by train(); public so tests can recompute any stage
// independently from the run seed.
namespace streams {
inline constexpr const char* kMlpInit = "mlp-init";
inline constexpr const char* kDropout = "dropout";
inline constexpr const char* kBatchShuffle = "batch-shuffle";
inline constexpr const char* kPreprocessFamily = "preprocess-family";
}  // namespace streams

inline SeededRng family_stream(std::uint64_t run_seed, const std::string& family_id) {
    return SeededRng(run_seed).split(streams::kPreprocessFamily,
                                     SeededRng::fnv1a(family_id));
}

struct FamilyImages {
    ImagePlane father, mother, child;
    std::optional<LabelMap> father_labels, mother_labels, child_labels;
};

struct FamilyLatents {
    Latent father, mother, child;
};

inline FamilyImages load_family_images(const FamilyTriplet& triplet, bool need_labels) {
    FamilyImages imgs;
    imgs.father = load_image(triplet.father_img);
    imgs.mother = load_image(triplet.mother_img);
    imgs.child = load_image(triplet.child_img);
    if (need_labels) {
        if (!triplet.father_labels || !triplet.mother_labels || !triplet.child_labels) {
            throw ConfigError("family '" + triplet.family_id +
                              "': use_segmentation requires father/mother/child label maps");
        }
        imgs.father_labels = load_labelmap(*triplet.father_labels);
        imgs.mother_labels = load_labelmap(*triplet.mother_labels);
        imgs.child_labels = load_labelmap(*triplet.child_labels);
    }
    return imgs;
}

// Preprocessing for one family: augment the parents (never the child), then,
// with segmentation enabled, embed the colorized label maps instead of the
// photos; the codec handles the resize to its working resolution. `augment`
// may be null for the no-augmentation path (validation, prediction).
inline FamilyLatents preprocess_images(const FamilyImages& images, const Codec& codec,
                                       bool use_segmentation, const AugmentConfig* augment,
                                       SeededRng& rng) {
    ImagePlane father = images.father;
    ImagePlane mother = images.mother;
    if (augment) {
        augment_family(father, mother, images.child, *augment, rng);
    }
    FamilyLatents latents;
    if (use_segmentation) {
        const Palette palette = Palette::defaults();
        if (!images.father_labels || !images.mother_labels || !images.child_labels) {
            throw ConfigError("preprocess_images: use_segmentation requires label maps");
        }
        latents.father = codec.embed(colorize_labels(*images.father_labels, palette));
        latents.mother = codec.embed(colorize_labels(*images.mother_labels, palette));
        latents.child = codec.embed(colorize_labels(*images.child_labels, palette));
    } else {
        latents.father = codec.embed(father);
        latents.mother = codec.embed(mother);
        latents.child = codec.embed(images.child);
    }
    return latents;
}

inline FamilyLatents preprocess_family(const FamilyTriplet& triplet, const TrainConfig& cfg,
                                       const Codec& codec, SeededRng& rng) {
    FamilyImages images = load_family_images(triplet, cfg.use_segmentation);
    return preprocess_images(images, codec, cfg.use_segmentation, &cfg.augment, rng);
}

// Father rows first, then mother rows, flattened row-major: a (1, 16384) input
// for the aggregator.
inline Tensor concat_parents(const Latent& father, const Latent& mother) {
    Tensor out({std::size_t{1}, 2 * Latent::kSize});
    for (std::size_t i = 0; i < Latent::kSize; ++i) out[i] = father.data[i];
    for (std::size_t i = 0; i < Latent::kSize; ++i) out[Latent::kSize + i] = mother.data[i];
    return out;
}

struct EpochMetrics {
    std::size_t epoch = 0;   // zero-based
    double train_mse = 0.0;  // configured loss space
    double val_mse = 0.0;    // configured loss space; NaN when the val split is empty
};

struct MetricsHistory {
    std::vector<EpochMetrics> epochs;
    double first_batch_train_mse = 0.0;
    std::size_t best_epoch = 0;
    double best_val_mse_latent = 0.0;  // selection metric; NaN when val split empty
    std::string loss_space = "latent";
    std::uint64_t config_digest = 0;
};

inline void write_metrics_csv(const MetricsHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_metrics_csv: cannot write '" + path.string() + "'");
    out << "epoch,train_mse,val_mse\n";
    char buf[64];
    for (const auto& e : history.epochs) {
        out << e.epoch << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", e.train_mse);
        out << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", e.val_mse);
        out << buf << "\n";
    }
}

inline void write_metrics_json(const MetricsHistory& history,
                               const std::filesystem::path& path) {
    nlohmann::json j;
    j["loss_space"] = history.loss_space;
    j["config_digest"] = digest_hex(history.config_digest);
    j["first_batch_train_mse"] = history.first_batch_train_mse;
    j["best_epoch"] = history.best_epoch;
    j["best_val_mse_latent"] = history.best_val_mse_latent;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : history.epochs) {
        j["epochs"].push_back(
            {{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("write_metrics_json: cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

struct TrainResult {
    Checkpoint checkpoint;
    MetricsHistory history;
};

namespace detail {

struct PreparedDataset {
    std::vector<std::size_t> train_indices;  // into manifest.families
    std::vector<std::size_t> val_indices;
    std::vector<Tensor> inputs;          // per family, (1, 16384)
    std::vector<Latent> child_latents;   // per family
    std::vector<ImagePlane> child_images;  // output-resolution targets, image loss only
};

// Preprocess every family once, up front. Train families draw their
// augmentation from per-family streams; validation families are embedded
// clean (no augmentation at evaluation time).
inline PreparedDataset prepare_dataset(const DatasetManifest& manifest, const TrainConfig& cfg,
                                       const Codec& codec) {
    PreparedDataset ds;
    SplitAssignment split = split_families(manifest, cfg.seed, cfg.train_fraction);
    ds.train_indices = std::move(split.train);
    ds.val_indices = std::move(split.val);
    if (ds.train_indices.empty()) {
        throw ConfigError("train: no training families (dataset of " +
                          std::to_string(manifest.families.size()) + " with train_fraction " +
                          std::to_string(cfg.train_fraction) + ")");
    }

    std::vector<bool> is_train(manifest.families.size(), false);
    for (std::size_t i : ds.train_indices) is_train[i] = true;

    ds.inputs.resize(manifest.families.size());
    ds.child_latents.resize(manifest.families.size());
    if (cfg.loss_space == LossSpace::kImage) ds.child_images.resize(manifest.families.size());

    for (std::size_t i = 0; i < manifest.families.size(); ++i) {
        const FamilyTriplet& triplet = manifest.families[i];
        FamilyImages images = load_family_images(triplet, cfg.use_segmentation);
        SeededRng rng = family_stream(cfg.seed, triplet.family_id);
        FamilyLatents latents =
            preprocess_images(images, codec, cfg.use_segmentation,
                              is_train[i] ? &cfg.augment : nullptr, rng);
        ds.inputs[i] = concat_parents(latents.father, latents.mother);
        ds.child_latents[i] = std::move(latents.child);
        if (cfg.loss_space == LossSpace::kImage) {
            ds.child_images[i] = resize(images.child, codec.output_resolution(),
                                        codec.output_resolution(), ResizeMode::kBilinear);
        }
    }
    return ds;
}

inline Tensor gather_inputs(const PreparedDataset& ds, const std::vector<std::size_t>& rows) {
    Tensor x({rows.size(), 2 * Latent::kSize});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Tensor& src = ds.inputs[rows[r]];
        for (std::size_t c = 0; c < src.size(); ++c) x[r * src.size() + c] = src[c];
    }
    return x;
}

inline Tensor gather_latent_targets(const PreparedDataset& ds,
                                    const std::vector<std::size_t>& rows) {
    Tensor t({rows.size(), Latent::kSize});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Latent& src = ds.child_latents[rows[r]];
        for (std::size_t c = 0; c < Latent::kSize; ++c) t[r * Latent::kSize + c] = src.data[c];
    }
    return t;
}

inline Latent latent_from_row(const Tensor& batch_out, std::size_t row) {
    Latent z;
    for (std::size_t c = 0; c < Latent::kSize; ++c) z.data[c] = batch_out[row * Latent::kSize + c];
    return z;
}

// Image-space objective for one batch: mean squared pixel error between the
// generated and real child images, plus the latent cotangent pulled back
// through the codec generator.
inline std::pair<double, Tensor> image_loss_and_delta(const Codec& codec,
                                                      const PreparedDataset& ds,
                                                      const std::vector<std::size_t>& rows,
                                                      const Tensor& batch_out) {
    const std::size_t batch = rows.size();
    const int res = codec.output_resolution();
    const double denom = static_cast<double>(batch) * res * res * 3;
    Tensor delta({batch, Latent::kSize});
    double loss = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        const Latent pred = latent_from_row(batch_out, r);
        const ImagePlane gen = codec.generate(pred);
        const ImagePlane& target = ds.child_images[rows[r]];
        ImagePlane cot(res, res);
        for (std::size_t i = 0; i < gen.data.size(); ++i) {
            const double diff = gen.data[i] - target.data[i];
            loss += diff * diff;
            cot.data[i] = 2.0 * diff / denom;
        }
        const Latent dz = codec.generate_vjp(pred, cot);
        for (std::size_t c = 0; c < Latent::kSize; ++c) delta[r * Latent::kSize + c] = dz.data[c];
    }
    return {loss / denom, std::move(delta)};
}

inline double image_loss_only(const Codec& codec, const PreparedDataset& ds,
                              const std::vector<std::size_t>& rows, const Tensor& batch_out) {
    const std::size_t batch = rows.size();
    const int res = codec.output_resolution();
    const double denom = static_cast<double>(batch) * res * res * 3;
    double loss = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
        const Latent pred = latent_from_row(batch_out, r);
        const ImagePlane gen = codec.generate(pred);
        const ImagePlane& target = ds.child_images[rows[r]];
        for (std::size_t i = 0; i < gen.data.size(); ++i) {
            const double diff = gen.data[i] - target.data[i];
            loss += diff * diff;
        }
    }
    return loss / denom;
}

}  // namespace detail

// The end-to-end training loop: preprocess -> embed parents -> concatenate ->
// aggregator -> child latent -> loss -> Adam, over seeded-shuffled batches
// (final partial batch included). Everything is a pure function of
// (manifest, config); reruns are byte-identical.
inline TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg) {
    cfg.validate();
    std::shared_ptr<const Codec> codec = make_codec(cfg.codec);
    if (cfg.loss_space == LossSpace::kImage && !codec->supports_generate_vjp()) {
        throw ConfigError("train: loss_space=image needs a codec with generator gradients");
    }

    detail::PreparedDataset ds = detail::prepare_dataset(manifest, cfg, *codec);

    SeededRng init_rng = SeededRng(cfg.seed).split(streams::kMlpInit);
    MlpParams params = MlpParams::he_init_production(init_rng);
    AdamState state = AdamState::init(params, cfg.lr);
    SeededRng dropout_rng = SeededRng(cfg.seed).split(streams::kDropout);

    const Tensor val_inputs = detail::gather_inputs(ds, ds.val_indices);
    const Tensor val_latent_targets = detail::gather_latent_targets(ds, ds.val_indices);

    MetricsHistory history;
    history.loss_space = to_string(cfg.loss_space);
    history.config_digest = config_digest(cfg);

    MlpParams best_params = params;
    AdamState best_state = state;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    bool have_first_batch_loss = false;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // seeded shuffle of the train families for this epoch
        std::vector<std::size_t> order = ds.train_indices;
        SeededRng shuffle_rng = SeededRng(cfg.seed).split(streams::kBatchShuffle, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t k = static_cast<std::size_t>(shuffle_rng.below(i));
            std::swap(order[i - 1], order[k]);
        }

        double epoch_loss_sum = 0.0;
        std::size_t epoch_rows = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            const std::vector<std::size_t> rows(order.begin() + start, order.begin() + end);
            const Tensor x = detail::gather_inputs(ds, rows);

            double loss = 0.0;
            MlpGrads grads;
            try {
                if (cfg.loss_space == LossSpace::kLatent) {
                    const Tensor t = detail::gather_latent_targets(ds, rows);
                    auto res = mlp_loss_and_grads(params, x, t, /*train_mode=*/true,
                                                  dropout_rng);
                    loss = res.first;
                    grads = std::move(res.second);
                } else {
                    MlpCache cache;
                    Tensor out = mlp_forward(params, x, /*train_mode=*/true, dropout_rng,
                                             &cache);
                    auto [img_loss, delta] = detail::image_loss_and_delta(*codec, ds, rows, out);
                    loss = img_loss;
                    grads = mlp_backward_from_delta(params, cache, delta);
                }
                adam_step(params, grads, state);
            } catch (const NumericError& e) {
                std::ostringstream os;
                os << "train: numeric failure at epoch " << epoch << ", batch starting at "
                   << start << " (families";
                for (std::size_t i : rows) os << " " << manifest.families[i].family_id;
                os << "): " << e.what();
                throw NumericError(os.str());
            }
            if (!have_first_batch_loss) {
                history.first_batch_train_mse = loss;
                have_first_batch_loss = true;
            }
            epoch_loss_sum += loss * static_cast<double>(rows.size());
            epoch_rows += rows.size();
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_mse = epoch_loss_sum / static_cast<double>(epoch_rows);

        double val_latent = std::numeric_limits<double>::quiet_NaN();
        if (!ds.val_indices.empty()) {
            SeededRng eval_rng(0);  // eval mode draws nothing
            const Tensor val_out =
                mlp_forward(params, val_inputs, /*train_mode=*/false, eval_rng);
            val_latent = mse(val_out, val_latent_targets);
            em.val_mse = cfg.loss_space == LossSpace::kLatent
                             ? val_latent
                             : detail::image_loss_only(*codec, ds, ds.val_indices, val_out);
            if (val_latent < best_val) {
                best_val = val_latent;
                best_params = params;
                best_state = state;
                best_epoch = epoch;
            }
        } else {
            em.val_mse = val_latent;  // NaN; selection falls back to the final epoch
            best_params = params;
            best_state = state;
            best_epoch = epoch;
        }
        history.epochs.push_back(em);
    }

    history.best_epoch = best_epoch;
    history.best_val_mse_latent =
        ds.val_indices.empty() ? std::numeric_limits<double>::quiet_NaN() : best_val;

    TrainResult result;
    result.checkpoint.params = std::move(best_params);
    result.checkpoint.state = std::move(best_state);
    result.checkpoint.config_digest = history.config_digest;
    result.checkpoint.seed = cfg.seed;
    result.history = std::move(history);
    return result;
}

struct PredictInput {
    ImagePlane father, mother;
    std::optional<LabelMap> father_labels, mother_labels;
};

struct Prediction {
    Latent child_latent;
    ImagePlane child_image;
};

// Eval-mode aggregation: no dropout, no augmentation, so the output is
// independent of p_apply and bit-reproducible. The checkpoint must have been
// trained under the same codec descriptor and segmentation switch.
inline Prediction predict(const Checkpoint& ckpt, const PredictInput& input,
                          const TrainConfig& cfg) {
    const std::uint64_t expected = config_digest(cfg);
    if (ckpt.config_digest != expected) {
        throw ConfigError("predict: checkpoint config digest " +
                          digest_hex(ckpt.config_digest) +
                          " does not match current config digest " + digest_hex(expected) +
                          " (codec seed / segmentation flag differ)");
    }
    std::shared_ptr<const Codec> codec = make_codec(cfg.codec);

    Latent father, mother;
    if (cfg.use_segmentation) {
        if (!input.father_labels || !input.mother_labels) {
            throw ConfigError("predict: use_segmentation requires parent label maps");
        }
        const Palette palette = Palette::defaults();
        father = codec->embed(colorize_labels(*input.father_labels, palette));
        mother = codec->embed(colorize_labels(*input.mother_labels, palette));
    } else {
        father = codec->embed(input.father);
        mother = codec->embed(input.mother);
    }

    const Tensor x = concat_parents(father, mother);
    SeededRng eval_rng(0);
    const Tensor out = mlp_forward(ckpt.params, x, /*train_mode=*/false, eval_rng);

    Prediction pred;
    pred.child_latent = detail::latent_from_row(out, 0);
    pred.child_image = codec->generate(pred.child_latent);
    return pred;
}

}  // namespace kinface
