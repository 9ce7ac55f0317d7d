// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinface/checkpoint.hpp"
#include "kinface/codec.hpp"
#include "kinface/errors.hpp"
#include "kinface/manifest.hpp"
#include "kinface/pipeline.hpp"

namespace kinface {

// 1 - u.v/(|u||v|): a distance in [0, 2], lower is better, invariant under
// positive scaling of either argument. Matrices are compared flattened.
inline double cosine_distance(const double* u, const double* v, std::size_t n) {
    if (n == 0) throw DimensionError("cosine_distance: empty vectors");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        throw NumericError("cosine_distance: zero vector has no direction");
    }
    double ratio = dot / (std::sqrt(nu) * std::sqrt(nv));
    ratio = std::clamp(ratio, -1.0, 1.0);  // fp overshoot only
    const double dist = 1.0 - ratio;
    assert(dist >= 0.0 && dist <= 2.0);
    return dist;
}

inline double cosine_distance(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) {
        throw DimensionError("cosine_distance: length mismatch, expected " +
                             std::to_string(u.size()) + ", actual " + std::to_string(v.size()));
    }
    return cosine_distance(u.data(), v.data(), u.size());
}

inline double cosine_distance(const Latent& u, const Latent& v) {
    return cosine_distance(u.data, v.data);
}

inline double cosine_distance(const ImagePlane& u, const ImagePlane& v) {
    if (!u.same_dims(v)) {
        throw DimensionError("cosine_distance: image dims mismatch");
    }
    return cosine_distance(u.data, v.data);
}

struct EvalRow {
    std::string family_id;
    double mse_latent = 0.0;
    double mse_image = 0.0;
    double cosine = 0.0;
    // prior-work diagnostic: mean cosine distance between the predicted child
    // latent and the two parent latents
    std::optional<double> cosine_parent_latent;
};

struct EvalAggregates {
    double mse_latent = 0.0;
    double mse_image = 0.0;
    double cosine = 0.0;
    std::optional<double> cosine_parent_latent;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalAggregates aggregates;
    std::uint64_t config_digest = 0;
};

namespace detail {

// compensated (Kahan) mean so aggregates stay permutation-stable to 1e-12
class KahanMean {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
        ++count_;
    }
    double mean() const { return count_ == 0 ? 0.0 : sum_ / static_cast<double>(count_); }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    std::size_t count_ = 0;
};

}  // namespace detail

enum class EvalSplit { kTrain, kVal, kAll };

inline EvalSplit eval_split_from_string(const std::string& s) {
    if (s == "train") return EvalSplit::kTrain;
    if (s == "val") return EvalSplit::kVal;
    if (s == "all") return EvalSplit::kAll;
    throw ConfigError("split must be train|val|all, got '" + s + "'");
}

// Per-family latent MSE, image MSE at the codec's output resolution, and the
// cosine distance between the generated and real child image; aggregates are
// arithmetic means over families.
inline EvalReport evaluate(const Checkpoint& ckpt, const DatasetManifest& manifest,
                           const std::vector<std::size_t>& family_indices,
                           const TrainConfig& cfg, bool parent_diagnostic = false) {
    if (family_indices.empty()) throw ConfigError("evaluate: empty split");
    const std::uint64_t expected = config_digest(cfg);
    if (ckpt.config_digest != expected) {
        throw ConfigError("evaluate: checkpoint config digest " +
                          digest_hex(ckpt.config_digest) +
                          " does not match current config digest " + digest_hex(expected));
    }
    std::shared_ptr<const Codec> codec = make_codec(cfg.codec);
    const int res = codec->output_resolution();

    EvalReport report;
    report.config_digest = expected;
    detail::KahanMean agg_lat, agg_img, agg_cos, agg_parent;

    SeededRng eval_rng(0);
    for (std::size_t idx : family_indices) {
        if (idx >= manifest.families.size()) {
            throw ConfigError("evaluate: family index " + std::to_string(idx) +
                              " out of range");
        }
        const FamilyTriplet& triplet = manifest.families[idx];
        FamilyImages images = load_family_images(triplet, cfg.use_segmentation);
        SeededRng rng(0);  // no augmentation at evaluation time
        FamilyLatents latents =
            preprocess_images(images, *codec, cfg.use_segmentation, nullptr, rng);

        const Tensor x = concat_parents(latents.father, latents.mother);
        const Tensor out = mlp_forward(ckpt.params, x, /*train_mode=*/false, eval_rng);
        const Latent pred = detail::latent_from_row(out, 0);

        EvalRow row;
        row.family_id = triplet.family_id;
        row.mse_latent = mse(pred.as_tensor(), latents.child.as_tensor());

        const ImagePlane gen = codec->generate(pred);
        const ImagePlane real = resize(images.child, res, res, ResizeMode::kBilinear);
        double img_acc = 0.0;
        for (std::size_t i = 0; i < gen.data.size(); ++i) {
            const double d = gen.data[i] - real.data[i];
            img_acc += d * d;
        }
        row.mse_image = img_acc / static_cast<double>(gen.data.size());
        row.cosine = cosine_distance(gen, real);

        if (parent_diagnostic) {
            const double df = cosine_distance(pred, latents.father);
            const double dm = cosine_distance(pred, latents.mother);
            row.cosine_parent_latent = 0.5 * (df + dm);
            agg_parent.add(*row.cosine_parent_latent);
        }
        agg_lat.add(row.mse_latent);
        agg_img.add(row.mse_image);
        agg_cos.add(row.cosine);
        report.rows.push_back(std::move(row));
    }
    report.aggregates.mse_latent = agg_lat.mean();
    report.aggregates.mse_image = agg_img.mean();
    report.aggregates.cosine = agg_cos.mean();
    if (parent_diagnostic) report.aggregates.cosine_parent_latent = agg_parent.mean();
    return report;
}

enum class ReportFormat { kCsv, kJson };

// CSV column order is stable: family_id, mse_latent, mse_image, cosine, with
// the diagnostic column appended only when present. JSON mirrors the CSV plus
// aggregates and the config digest.
inline void write_report(const EvalReport& report, const std::filesystem::path& path,
                         ReportFormat format) {
    const bool with_parent =
        !report.rows.empty() && report.rows.front().cosine_parent_latent.has_value();
    if (format == ReportFormat::kCsv) {
        std::ofstream out(path);
        if (!out) throw IoError("write_report: cannot write '" + path.string() + "'");
        out << "family_id,mse_latent,mse_image,cosine";
        if (with_parent) out << ",cosine_parent_latent";
        out << "\n";
        char buf[64];
        for (const auto& row : report.rows) {
            out << row.family_id;
            for (double v : {row.mse_latent, row.mse_image, row.cosine}) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << "," << buf;
            }
            if (with_parent) {
                std::snprintf(buf, sizeof(buf), "%.17g", *row.cosine_parent_latent);
                out << "," << buf;
            }
            out << "\n";
        }
        return;
    }
    nlohmann::json j;
    j["config_digest"] = digest_hex(report.config_digest);
    j["families"] = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json rj = {{"family_id", row.family_id},
                             {"mse_latent", row.mse_latent},
                             {"mse_image", row.mse_image},
                             {"cosine", row.cosine}};
        if (row.cosine_parent_latent) rj["cosine_parent_latent"] = *row.cosine_parent_latent;
        j["families"].push_back(std::move(rj));
    }
    j["aggregates"] = {{"mse_latent", report.aggregates.mse_latent},
                       {"mse_image", report.aggregates.mse_image},
                       {"cosine", report.aggregates.cosine}};
    if (report.aggregates.cosine_parent_latent)
        j["aggregates"]["cosine_parent_latent"] = *report.aggregates.cosine_parent_latent;
    std::ofstream out(path);
    if (!out) throw IoError("write_report: cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

inline EvalReport read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_report_json: cannot read '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("read_report_json: '" + path.string() + "' is not valid JSON: " +
                      e.what());
    }
    EvalReport report;
    report.config_digest = std::stoull(j.at("config_digest").get<std::string>(), nullptr, 16);
    for (const auto& rj : j.at("families")) {
        EvalRow row;
        row.family_id = rj.at("family_id").get<std::string>();
        row.mse_latent = rj.at("mse_latent").get<double>();
        row.mse_image = rj.at("mse_image").get<double>();
        row.cosine = rj.at("cosine").get<double>();
        if (rj.contains("cosine_parent_latent"))
            row.cosine_parent_latent = rj["cosine_parent_latent"].get<double>();
        report.rows.push_back(std::move(row));
    }
    const auto& aj = j.at("aggregates");
    report.aggregates.mse_latent = aj.at("mse_latent").get<double>();
    report.aggregates.mse_image = aj.at("mse_image").get<double>();
    report.aggregates.cosine = aj.at("cosine").get<double>();
    if (aj.contains("cosine_parent_latent"))
        report.aggregates.cosine_parent_latent = aj["cosine_parent_latent"].get<double>();
    return report;
}

}  // namespace kinface
