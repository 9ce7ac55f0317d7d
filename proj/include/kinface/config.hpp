// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kinface/augment.hpp"
#include "kinface/codec.hpp"
#include "kinface/errors.hpp"
#include "kinface/manifest.hpp"
#include "kinface/pipeline.hpp"

namespace kinface {

// Everything a run needs, from one JSON config file plus command-line
// overrides (flags win). Unknown keys are rejected at every level; the fully
// resolved config is serialized into each output directory so a run can be
// reproduced with no overrides.
struct RunConfig {
    std::uint64_t seed = 42;
    bool strict = false;
    std::filesystem::path manifest;

    // train
    std::size_t batch_size = 16;
    double lr = 1e-5;
    std::size_t epochs = 200;
    double train_fraction = 0.8;
    LossSpace loss_space = LossSpace::kLatent;
    bool use_segmentation = false;

    AugmentConfig augment;
    CodecDescriptor codec;

    TrainConfig to_train_config() const {
        TrainConfig cfg;
        cfg.batch_size = batch_size;
        cfg.lr = lr;
        cfg.epochs = epochs;
        cfg.train_fraction = train_fraction;
        cfg.loss_space = loss_space;
        cfg.use_segmentation = use_segmentation;
        cfg.seed = seed;
        cfg.codec = codec;
        cfg.augment = augment;
        return cfg;
    }
};

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir) {
    detail::reject_unknown_keys(j, {"seed", "strict", "manifest", "train", "augment", "codec"},
                                "config");
    RunConfig cfg;
    detail::take(j, "seed", cfg.seed);
    detail::take(j, "strict", cfg.strict);
    if (j.contains("manifest")) {
        const std::filesystem::path p = j.at("manifest").get<std::string>();
        cfg.manifest = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(t,
                                    {"batch_size", "lr", "epochs", "train_fraction",
                                     "loss_space", "use_segmentation"},
                                    "config.train");
        detail::take(t, "batch_size", cfg.batch_size);
        detail::take(t, "lr", cfg.lr);
        detail::take(t, "epochs", cfg.epochs);
        detail::take(t, "train_fraction", cfg.train_fraction);
        if (t.contains("loss_space"))
            cfg.loss_space = loss_space_from_string(t.at("loss_space").get<std::string>());
        detail::take(t, "use_segmentation", cfg.use_segmentation);
    }
    if (j.contains("augment")) {
        const auto& a = j.at("augment");
        detail::reject_unknown_keys(a,
                                    {"p_apply", "mode", "rotate_range_deg", "shear_range",
                                     "translate_frac", "hue_range", "sat_range",
                                     "hue_sat_jitter", "chain_length"},
                                    "config.augment");
        detail::take(a, "p_apply", cfg.augment.p_apply);
        if (a.contains("mode"))
            cfg.augment.mode = augment_mode_from_string(a.at("mode").get<std::string>());
        detail::take(a, "rotate_range_deg", cfg.augment.rotate_range_deg);
        detail::take(a, "shear_range", cfg.augment.shear_range);
        detail::take(a, "translate_frac", cfg.augment.translate_frac);
        detail::take(a, "hue_range", cfg.augment.hue_range);
        detail::take(a, "sat_range", cfg.augment.sat_range);
        detail::take(a, "hue_sat_jitter", cfg.augment.hue_sat_jitter);
        detail::take(a, "chain_length", cfg.augment.chain_length);
        cfg.augment.validate();
    }
    if (j.contains("codec")) {
        const auto& c = j.at("codec");
        detail::reject_unknown_keys(
            c, {"type", "seed", "working_resolution", "output_resolution", "endpoint"},
            "config.codec");
        detail::take(c, "type", cfg.codec.type);
        detail::take(c, "seed", cfg.codec.seed);
        detail::take(c, "working_resolution", cfg.codec.working_resolution);
        detail::take(c, "output_resolution", cfg.codec.output_resolution);
        detail::take(c, "endpoint", cfg.codec.endpoint);
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_run_config: cannot read '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_run_config: '" + path.string() + "' is not valid JSON: " +
                          e.what());
    }
    const std::filesystem::path base =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    try {
        return parse_run_config(j, base);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_run_config: '" + path.string() + "': " + e.what());
    }
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["strict"] = cfg.strict;
    if (!cfg.manifest.empty())
        j["manifest"] = std::filesystem::absolute(cfg.manifest).string();
    j["train"] = {{"batch_size", cfg.batch_size},
                  {"lr", cfg.lr},
                  {"epochs", cfg.epochs},
                  {"train_fraction", cfg.train_fraction},
                  {"loss_space", to_string(cfg.loss_space)},
                  {"use_segmentation", cfg.use_segmentation}};
    j["augment"] = {{"p_apply", cfg.augment.p_apply},
                    {"mode", to_string(cfg.augment.mode)},
                    {"rotate_range_deg", cfg.augment.rotate_range_deg},
                    {"shear_range", cfg.augment.shear_range},
                    {"translate_frac", cfg.augment.translate_frac},
                    {"hue_range", cfg.augment.hue_range},
                    {"sat_range", cfg.augment.sat_range},
                    {"hue_sat_jitter", cfg.augment.hue_sat_jitter},
                    {"chain_length", cfg.augment.chain_length}};
    j["codec"] = {{"type", cfg.codec.type},
                  {"seed", cfg.codec.seed},
                  {"working_resolution", cfg.codec.working_resolution},
                  {"output_resolution", cfg.codec.output_resolution},
                  {"endpoint", cfg.codec.endpoint}};
    return j;
}

inline void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_run_config: cannot write '" + path.string() + "'");
    out << run_config_to_json(cfg).dump(2) << "\n";
}

}  // namespace kinface
