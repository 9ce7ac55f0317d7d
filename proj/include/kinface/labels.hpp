// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kinface/errors.hpp"
#include "kinface/image.hpp"

namespace kinface {

// The 11 facial classes, in fixed order. Class ids index this list.
inline constexpr std::array<const char*, 11> kFaceClassNames = {
    "background", "hair",         "nose",          "left_eye",  "right_eye", "left_eyebrow",
    "right_eyebrow", "upper_lip", "lower_lip",     "inner_mouth", "skin",
};

inline constexpr int kNumFaceClasses = 11;

// Per-pixel class ids, 0..10.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> ids;

    LabelMap() = default;
    LabelMap(int h, int w)
        : height(h), width(w), ids(static_cast<std::size_t>(h) * w, 0) {
        if (h <= 0 || w <= 0)
            throw DimensionError("LabelMap: dimensions must be positive, got " +
                                 std::to_string(h) + "x" + std::to_string(w));
    }

    std::uint8_t& at(int y, int x) { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return ids[static_cast<std::size_t>(y) * width + x]; }

    void validate() const {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] >= kNumFaceClasses) {
                throw ConfigError("LabelMap: class id " + std::to_string(int(ids[i])) +
                                  " at flat index " + std::to_string(i) + " exceeds maximum " +
                                  std::to_string(kNumFaceClasses - 1));
            }
        }
    }
};

// One RGB triple per class id; triples must be pairwise distinct so
// colorize/decode is a bijection.
struct Palette {
    std::array<std::array<std::uint8_t, 3>, kNumFaceClasses> colors{};

    void validate() const {
        for (int a = 0; a < kNumFaceClasses; ++a) {
            for (int b = a + 1; b < kNumFaceClasses; ++b) {
                if (colors[a] == colors[b]) {
                    throw ConfigError("Palette: classes " + std::to_string(a) + " (" +
                                      kFaceClassNames[a] + ") and " + std::to_string(b) + " (" +
                                      kFaceClassNames[b] + ") share color");
                }
            }
        }
    }

    static Palette defaults() {
        Palette p;
        p.colors = {{
            {0, 0, 0},        // background
            {127, 0, 255},    // hair
            {255, 128, 0},    // nose
            {0, 210, 255},    // left_eye
            {0, 90, 255},     // right_eye
            {110, 255, 0},    // left_eyebrow
            {0, 160, 40},     // right_eyebrow
            {255, 0, 100},    // upper_lip
            {170, 0, 40},     // lower_lip
            {255, 230, 0},    // inner_mouth
            {230, 180, 150},  // skin
        }};
        return p;
    }
};

// Render class ids as their palette colors.
inline ImagePlane colorize_labels(const LabelMap& map, const Palette& palette) {
    map.validate();
    palette.validate();
    ImagePlane img(map.height, map.width);
    for (std::size_t i = 0; i < map.ids.size(); ++i) {
        const auto& rgb = palette.colors[map.ids[i]];
        img.data[3 * i] = rgb[0];
        img.data[3 * i + 1] = rgb[1];
        img.data[3 * i + 2] = rgb[2];
    }
    return img;
}

struct DecodeResult {
    LabelMap map;
    std::size_t mismatches = 0;  // pixels that failed exact palette match
};

// Inverse of colorize_labels. Pixels are quantized (round half up) before
// matching. In strict mode any non-palette pixel is an error; otherwise it
// falls back to the nearest palette color (squared RGB distance, lowest class
// id on ties) and is counted.
inline DecodeResult decode_labels(const ImagePlane& img, const Palette& palette,
                                  bool strict = false) {
    palette.validate();
    DecodeResult result;
    result.map = LabelMap(img.height, img.width);
    const std::size_t n = result.map.ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        int q[3];
        for (int c = 0; c < 3; ++c) {
            q[c] = static_cast<int>(std::floor(img.data[3 * i + c] + 0.5));
            q[c] = std::clamp(q[c], 0, 255);
        }
        int exact = -1;
        for (int k = 0; k < kNumFaceClasses; ++k) {
            if (q[0] == palette.colors[k][0] && q[1] == palette.colors[k][1] &&
                q[2] == palette.colors[k][2]) {
                exact = k;
                break;
            }
        }
        if (exact >= 0) {
            result.map.ids[i] = static_cast<std::uint8_t>(exact);
            continue;
        }
        if (strict) {
            throw NumericError("decode_labels: pixel at flat index " + std::to_string(i) +
                               " (rgb " + std::to_string(q[0]) + "," + std::to_string(q[1]) +
                               "," + std::to_string(q[2]) + ") matches no palette entry");
        }
        long best_d = -1;
        int best_k = 0;
        for (int k = 0; k < kNumFaceClasses; ++k) {
            const long dr = q[0] - palette.colors[k][0];
            const long dg = q[1] - palette.colors[k][1];
            const long db = q[2] - palette.colors[k][2];
            const long d = dr * dr + dg * dg + db * db;
            if (best_d < 0 || d < best_d) {
                best_d = d;
                best_k = k;
            }
        }
        result.map.ids[i] = static_cast<std::uint8_t>(best_k);
        ++result.mismatches;
    }
    return result;
}

// Nearest-neighbor resize for label content; shares the image resizer's
// half-pixel index convention so rendered-then-resized maps decode to the
// same thing.
inline LabelMap resize_nearest(const LabelMap& map, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw DimensionError("resize_nearest: target dimensions must be positive");
    LabelMap out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = detail::nearest_index(y, map.height, out_h);
        for (int x = 0; x < out_w; ++x) {
            const int sx = detail::nearest_index(x, map.width, out_w);
            out.at(y, x) = map.at(sy, sx);
        }
    }
    return out;
}

}  // namespace kinface
