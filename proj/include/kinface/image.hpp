// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "kinface/errors.hpp"

namespace kinface {

// Working image: H x W x 3 RGB, 64-bit floats in [0,255]. Quantization to
// 8 bits happens only at file boundaries.
struct ImagePlane {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // row-major, interleaved RGB

    ImagePlane() = default;
    ImagePlane(int h, int w) : height(h), width(w), data(pixel_count(h, w) * 3, 0.0) {
        if (h <= 0 || w <= 0)
            throw DimensionError("ImagePlane: dimensions must be positive, got " +
                                 std::to_string(h) + "x" + std::to_string(w));
    }

    static ImagePlane filled(int h, int w, double r, double g, double b) {
        ImagePlane img(h, w);
        for (std::size_t i = 0; i < img.data.size(); i += 3) {
            img.data[i] = r;
            img.data[i + 1] = g;
            img.data[i + 2] = b;
        }
        return img;
    }

    double& at(int y, int x, int c) { return data[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data[index(y, x, c)]; }

    bool same_dims(const ImagePlane& o) const { return height == o.height && width == o.width; }

    bool in_range() const {
        for (double v : data)
            if (!(v >= 0.0 && v <= 255.0)) return false;
        return true;
    }

private:
    static std::size_t pixel_count(int h, int w) {
        return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * 3 + c;
    }
};

// HSV planes with hue in half-degrees [0,180) and s, v in [0,255] — the
// convention Eq.-style "mod 180" hue arithmetic assumes.
struct HsvPlane {
    int height = 0;
    int width = 0;
    std::vector<double> h, s, v;

    HsvPlane() = default;
    HsvPlane(int hh, int ww)
        : height(hh),
          width(ww),
          h(static_cast<std::size_t>(hh) * ww, 0.0),
          s(static_cast<std::size_t>(hh) * ww, 0.0),
          v(static_cast<std::size_t>(hh) * ww, 0.0) {}
};

// Standard hexcone RGB -> HSV, hue scaled to [0,180). Gray pixels get hue 0.
inline HsvPlane rgb_to_hsv(const ImagePlane& img) {
    HsvPlane out(img.height, img.width);
    const std::size_t n = out.h.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = img.data[3 * i], g = img.data[3 * i + 1], b = img.data[3 * i + 2];
        const double maxc = std::max({r, g, b});
        const double minc = std::min({r, g, b});
        const double delta = maxc - minc;
        out.v[i] = maxc;
        out.s[i] = maxc <= 0.0 ? 0.0 : 255.0 * delta / maxc;
        double hue_deg = 0.0;
        if (delta > 0.0) {
            if (maxc == r)
                hue_deg = 60.0 * (g - b) / delta;
            else if (maxc == g)
                hue_deg = 60.0 * ((b - r) / delta + 2.0);
            else
                hue_deg = 60.0 * ((r - g) / delta + 4.0);
            if (hue_deg < 0.0) hue_deg += 360.0;
        }
        out.h[i] = hue_deg / 2.0;
        if (out.h[i] >= 180.0) out.h[i] -= 180.0;
    }
    return out;
}

inline ImagePlane hsv_to_rgb(const HsvPlane& hsv) {
    ImagePlane out(hsv.height, hsv.width);
    const std::size_t n = hsv.h.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double hue_deg = hsv.h[i] * 2.0;
        const double s = hsv.s[i] / 255.0;
        const double v = hsv.v[i];
        const double c = v * s;
        const double sector = hue_deg / 60.0;
        const double x = c * (1.0 - std::abs(std::fmod(sector, 2.0) - 1.0));
        double r = 0.0, g = 0.0, b = 0.0;
        if (sector < 1.0) {
            r = c; g = x;
        } else if (sector < 2.0) {
            r = x; g = c;
        } else if (sector < 3.0) {
            g = c; b = x;
        } else if (sector < 4.0) {
            g = x; b = c;
        } else if (sector < 5.0) {
            r = x; b = c;
        } else {
            r = c; b = x;
        }
        const double m = v - c;
        out.data[3 * i] = std::clamp(r + m, 0.0, 255.0);
        out.data[3 * i + 1] = std::clamp(g + m, 0.0, 255.0);
        out.data[3 * i + 2] = std::clamp(b + m, 0.0, 255.0);
    }
    return out;
}

namespace detail {

inline void check_jitter_range(double value, const char* what, bool strict) {
    if (value < -5.0 || value > 5.0) {
        if (strict) {
            throw ConfigError(std::string(what) + ": value " + std::to_string(value) +
                              " outside [-5,5]");
        }
        std::fprintf(stderr, "warning: %s value %g outside [-5,5]\n", what, value);
    }
}

}  // namespace detail

// Per-pixel h' = (h + x) mod 180 with non-negative (mathematical) modulo.
inline HsvPlane shift_hue(HsvPlane hsv, double x, bool strict = false) {
    detail::check_jitter_range(x, "shift_hue", strict);
    for (double& h : hsv.h) {
        double shifted = std::fmod(h + x, 180.0);
        if (shifted < 0.0) shifted += 180.0;
        h = shifted;
    }
    return hsv;
}

// Per-pixel s' = min(255, max(0, s + y)).
inline HsvPlane shift_saturation(HsvPlane hsv, double y, bool strict = false) {
    detail::check_jitter_range(y, "shift_saturation", strict);
    for (double& s : hsv.s) s = std::clamp(s + y, 0.0, 255.0);
    return hsv;
}

enum class ResizeMode { kBilinear, kNearest };

namespace detail {

// Half-pixel-center source coordinate (align_corners=false convention).
inline double src_coord(int dst, int in_size, int out_size) {
    return (static_cast<double>(dst) + 0.5) * static_cast<double>(in_size) /
               static_cast<double>(out_size) -
           0.5;
}

inline int nearest_index(int dst, int in_size, int out_size) {
    const double pos = (static_cast<double>(dst) + 0.5) * static_cast<double>(in_size) /
                       static_cast<double>(out_size);
    int idx = static_cast<int>(std::floor(pos));
    return std::clamp(idx, 0, in_size - 1);
}

}  // namespace detail

// Bilinear for photographs and colorized faces, nearest for label content.
// Half-pixel centers; samples are clamped to the image edges.
inline ImagePlane resize(const ImagePlane& img, int out_h, int out_w, ResizeMode mode) {
    if (out_h <= 0 || out_w <= 0)
        throw DimensionError("resize: target dimensions must be positive, got " +
                             std::to_string(out_h) + "x" + std::to_string(out_w));
    if (out_h == img.height && out_w == img.width) return img;

    ImagePlane out(out_h, out_w);
    if (mode == ResizeMode::kNearest) {
        for (int y = 0; y < out_h; ++y) {
            const int sy = detail::nearest_index(y, img.height, out_h);
            for (int x = 0; x < out_w; ++x) {
                const int sx = detail::nearest_index(x, img.width, out_w);
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
            }
        }
        return out;
    }
    for (int y = 0; y < out_h; ++y) {
        const double fy = detail::src_coord(y, img.height, out_h);
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double fx = detail::src_coord(x, img.width, out_w);
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
                const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

}  // namespace kinface
