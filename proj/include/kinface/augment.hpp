// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "kinface/errors.hpp"
#include "kinface/image.hpp"
#include "kinface/rng.hpp"

namespace kinface {

enum class AugmentMode { kNone, kMixup, kAugmix };

inline const char* to_string(AugmentMode m) {
    switch (m) {
        case AugmentMode::kNone: return "none";
        case AugmentMode::kMixup: return "mixup";
        case AugmentMode::kAugmix: return "augmix";
    }
    return "none";
}

inline AugmentMode augment_mode_from_string(const std::string& s) {
    if (s == "none") return AugmentMode::kNone;
    if (s == "mixup") return AugmentMode::kMixup;
    if (s == "augmix") return AugmentMode::kAugmix;
    throw ConfigError("augment mode must be one of none|mixup|augmix, got '" + s + "'");
}

struct AugmentConfig {
    double p_apply = 0.5;             // per-family gate probability
    AugmentMode mode = AugmentMode::kNone;
    double rotate_range_deg = 15.0;   // magnitudes sampled in +/- range
    double shear_range = 0.10;
    double translate_frac = 0.10;     // fraction of the translated dimension
    double hue_range = 5.0;
    double sat_range = 5.0;
    bool hue_sat_jitter = false;      // extra hue/saturation jitter on parents
    int chain_length = 1;             // affine ops per parent per pass

    void validate() const {
        if (!(p_apply >= 0.0 && p_apply <= 1.0))
            throw ConfigError("AugmentConfig: p_apply must be in [0,1], got " +
                              std::to_string(p_apply));
        if (rotate_range_deg < 0 || shear_range < 0 || translate_frac < 0 || hue_range < 0 ||
            sat_range < 0)
            throw ConfigError("AugmentConfig: ranges must be non-negative");
        if (hue_range > 5.0 || sat_range > 5.0)
            throw ConfigError("AugmentConfig: hue/saturation jitter ranges are capped at 5");
        if (chain_length < 1)
            throw ConfigError("AugmentConfig: chain_length must be at least 1");
    }
};

enum class AffineKind { kShearX, kShearY, kTranslateX, kTranslateY, kRotate, kHflip };

inline constexpr int kNumAffineKinds = 6;

inline const char* to_string(AffineKind k) {
    switch (k) {
        case AffineKind::kShearX: return "shear_x";
        case AffineKind::kShearY: return "shear_y";
        case AffineKind::kTranslateX: return "translate_x";
        case AffineKind::kTranslateY: return "translate_y";
        case AffineKind::kRotate: return "rotate";
        case AffineKind::kHflip: return "hflip";
    }
    return "?";
}

struct AffineOp {
    AffineKind kind = AffineKind::kHflip;
    double magnitude = 0.0;  // hflip carries none
};

// Uniform choice over the six concrete kinds; magnitude uniform in the kind's
// configured +/- range (hflip draws no magnitude).
inline AffineOp sample_affine(SeededRng& rng, const AugmentConfig& cfg) {
    cfg.validate();
    AffineOp op;
    op.kind = static_cast<AffineKind>(rng.below(kNumAffineKinds));
    switch (op.kind) {
        case AffineKind::kShearX:
        case AffineKind::kShearY:
            op.magnitude = rng.uniform(-cfg.shear_range, cfg.shear_range);
            break;
        case AffineKind::kTranslateX:
        case AffineKind::kTranslateY:
            op.magnitude = rng.uniform(-cfg.translate_frac, cfg.translate_frac);
            break;
        case AffineKind::kRotate:
            op.magnitude = rng.uniform(-cfg.rotate_range_deg, cfg.rotate_range_deg);
            break;
        case AffineKind::kHflip:
            op.magnitude = 0.0;
            break;
    }
    return op;
}

namespace detail {

inline double sample_bilinear_clamped(const ImagePlane& img, double fy, double fx, int c) {
    // edge-replicate padding
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
    const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
    const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
    const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
    return top * (1.0 - wy) + bot * wy;
}

}  // namespace detail

// Inverse-mapped affine warp about the image center with bilinear sampling and
// edge-replicate padding. hflip is an exact column reversal; zero magnitudes
// are exact identities.
inline ImagePlane apply_affine(const ImagePlane& img, const AffineOp& op) {
    if (op.kind == AffineKind::kHflip) {
        ImagePlane out(img.height, img.width);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
        return out;
    }

    const double cy = (img.height - 1) / 2.0;
    const double cx = (img.width - 1) / 2.0;
    ImagePlane out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double dy = y - cy;
            const double dx = x - cx;
            double sy = y, sx = x;
            switch (op.kind) {
                case AffineKind::kShearX:
                    // output(x,y) = input(x - m*dy, y)
                    sx = x - op.magnitude * dy;
                    break;
                case AffineKind::kShearY:
                    sy = y - op.magnitude * dx;
                    break;
                case AffineKind::kTranslateX:
                    sx = x - op.magnitude * img.width;
                    break;
                case AffineKind::kTranslateY:
                    sy = y - op.magnitude * img.height;
                    break;
                case AffineKind::kRotate: {
                    const double rad = op.magnitude * std::numbers::pi / 180.0;
                    const double cs = std::cos(rad), sn = std::sin(rad);
                    // inverse rotation about the center
                    sx = cx + cs * dx + sn * dy;
                    sy = cy - sn * dx + cs * dy;
                    break;
                }
                case AffineKind::kHflip:
                    break;  // handled above
            }
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = detail::sample_bilinear_clamped(img, sy, sx, c);
        }
    }
    return out;
}

// Hue/saturation jitter of the de-segmentation stage, exposed as a standalone
// parent-image op.
inline ImagePlane jitter_hue_saturation(const ImagePlane& img, double hue_shift,
                                        double sat_shift, bool strict = false) {
    HsvPlane hsv = rgb_to_hsv(img);
    hsv = shift_hue(std::move(hsv), hue_shift, strict);
    hsv = shift_saturation(std::move(hsv), sat_shift, strict);
    return hsv_to_rgb(hsv);
}

// What augment_family actually did; drives CLI counters and tests.
struct AugmentOutcome {
    bool applied = false;
    AugmentMode mode = AugmentMode::kNone;
    std::optional<std::pair<double, double>> mixup_weights;  // alpha, beta
    std::vector<AffineOp> father_ops, mother_ops;
    std::optional<std::pair<double, double>> father_jitter, mother_jitter;  // hue, sat
};

// MixUp over one family's parent pair:
//   father' = alpha*father + (1-alpha)*mother
//   mother' = beta*mother + (1-beta)*father
// computed in float with no quantization. Children are never passed through
// here at all.
inline std::pair<ImagePlane, ImagePlane> mixup_parents(const ImagePlane& father,
                                                       const ImagePlane& mother, double alpha,
                                                       double beta) {
    if (!father.same_dims(mother)) {
        throw DimensionError("mixup_parents: dimension mismatch, father " +
                             std::to_string(father.height) + "x" + std::to_string(father.width) +
                             ", mother " + std::to_string(mother.height) + "x" +
                             std::to_string(mother.width));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0)) {
        throw ConfigError("mixup_parents: alpha/beta must be in [0,1], got alpha=" +
                          std::to_string(alpha) + " beta=" + std::to_string(beta));
    }
    ImagePlane f2(father.height, father.width);
    ImagePlane m2(father.height, father.width);
    for (std::size_t i = 0; i < father.data.size(); ++i) {
        f2.data[i] = alpha * father.data[i] + (1.0 - alpha) * mother.data[i];
        m2.data[i] = beta * mother.data[i] + (1.0 - beta) * father.data[i];
    }
    return {std::move(f2), std::move(m2)};
}

// One augmentation pass over a family. A single gate draw decides whether the
// configured mode is applied to the parents; the child is returned untouched
// in every path. Draw order (train-reproducible): gate, then mode draws
// (mixup: alpha, beta; augmix: father ops then mother ops), then optional
// hue/sat jitter (father x,y then mother x,y).
inline AugmentOutcome augment_family(ImagePlane& father, ImagePlane& mother,
                                     const ImagePlane& child, const AugmentConfig& cfg,
                                     SeededRng& rng) {
    (void)child;  // contract: never touched
    cfg.validate();
    AugmentOutcome outcome;
    outcome.mode = cfg.mode;

    const double gate = rng.uniform();
    if (!(gate < cfg.p_apply)) return outcome;
    if (cfg.mode == AugmentMode::kNone && !cfg.hue_sat_jitter) return outcome;
    outcome.applied = true;

    if (cfg.mode == AugmentMode::kMixup) {
        const double alpha = rng.uniform();
        const double beta = rng.uniform();
        outcome.mixup_weights = {alpha, beta};
        auto [f2, m2] = mixup_parents(father, mother, alpha, beta);
        father = std::move(f2);
        mother = std::move(m2);
    } else if (cfg.mode == AugmentMode::kAugmix) {
        for (int k = 0; k < cfg.chain_length; ++k) {
            AffineOp op = sample_affine(rng, cfg);
            outcome.father_ops.push_back(op);
            father = apply_affine(father, op);
        }
        for (int k = 0; k < cfg.chain_length; ++k) {
            AffineOp op = sample_affine(rng, cfg);
            outcome.mother_ops.push_back(op);
            mother = apply_affine(mother, op);
        }
    }

    if (cfg.hue_sat_jitter) {
        const double fx = rng.uniform(-cfg.hue_range, cfg.hue_range);
        const double fy = rng.uniform(-cfg.sat_range, cfg.sat_range);
        outcome.father_jitter = {fx, fy};
        father = jitter_hue_saturation(father, fx, fy);
        const double mx = rng.uniform(-cfg.hue_range, cfg.hue_range);
        const double my = rng.uniform(-cfg.sat_range, cfg.sat_range);
        outcome.mother_jitter = {mx, my};
        mother = jitter_hue_saturation(mother, mx, my);
    }
    return outcome;
}

}  // namespace kinface
