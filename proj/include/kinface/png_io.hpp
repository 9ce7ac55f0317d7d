// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinface/errors.hpp"
#include "kinface/image.hpp"
#include "kinface/labels.hpp"

namespace kinface {

namespace detail {

inline std::uint8_t quantize_u8(double v) {
    // round half up, clamped to [0,255]
    const double q = std::floor(v + 0.5);
    return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

}  // namespace detail

// 8-bit RGB PNG. Files with a different channel layout are rejected rather
// than silently converted.
inline ImagePlane load_image(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw IoError("load_image: cannot read '" + path.string() + "': " + image.message);
    }
    if (image.format != PNG_FORMAT_RGB) {
        png_image_free(&image);
        throw IoError("load_image: '" + path.string() +
                      "' is not 8-bit RGB (3 channels, no alpha)");
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError("load_image: decode failed for '" + path.string() + "': " + msg);
    }
    ImagePlane img(static_cast<int>(image.height), static_cast<int>(image.width));
    for (std::size_t i = 0; i < buffer.size(); ++i) img.data[i] = buffer[i];
    return img;
}

// Quantizes by round-half-up and writes 8-bit RGB.
inline void save_image(const ImagePlane& img, const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        buffer[i] = detail::quantize_u8(img.data[i]);
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        throw IoError("save_image: cannot write '" + path.string() + "': " + image.message);
    }
}

// Label maps travel as single-channel 8-bit PNGs holding raw class ids.
inline LabelMap load_labelmap(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw IoError("load_labelmap: cannot read '" + path.string() + "': " + image.message);
    }
    if (image.format != PNG_FORMAT_GRAY) {
        png_image_free(&image);
        throw IoError("load_labelmap: '" + path.string() +
                      "' is not 8-bit single-channel (grayscale)");
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw IoError("load_labelmap: decode failed for '" + path.string() + "': " + msg);
    }
    LabelMap map(static_cast<int>(image.height), static_cast<int>(image.width));
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        if (buffer[i] >= kNumFaceClasses) {
            throw IoError("load_labelmap: '" + path.string() + "' holds class id " +
                          std::to_string(int(buffer[i])) + " at flat index " +
                          std::to_string(i) + ", maximum is " +
                          std::to_string(kNumFaceClasses - 1));
        }
        map.ids[i] = buffer[i];
    }
    return map;
}

inline void save_labelmap(const LabelMap& map, const std::filesystem::path& path) {
    map.validate();
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(map.width);
    image.height = static_cast<png_uint_32>(map.height);
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, map.ids.data(), 0,
                                 nullptr)) {
        throw IoError("save_labelmap: cannot write '" + path.string() + "': " + image.message);
    }
}

// Palette sidecar: JSON array of 11 [r,g,b] triples indexed by class id.
inline void save_palette(const Palette& palette, const std::filesystem::path& path) {
    palette.validate();
    nlohmann::json j = nlohmann::json::array();
    for (const auto& rgb : palette.colors) j.push_back({rgb[0], rgb[1], rgb[2]});
    std::ofstream out(path);
    if (!out) throw IoError("save_palette: cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

inline Palette load_palette(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_palette: cannot read '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_palette: '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (!j.is_array() || j.size() != kNumFaceClasses) {
        throw IoError("load_palette: '" + path.string() + "' must be an array of " +
                      std::to_string(kNumFaceClasses) + " [r,g,b] triples");
    }
    Palette p;
    for (int k = 0; k < kNumFaceClasses; ++k) {
        const auto& e = j[k];
        if (!e.is_array() || e.size() != 3) {
            throw IoError("load_palette: entry " + std::to_string(k) +
                          " is not an [r,g,b] triple");
        }
        for (int c = 0; c < 3; ++c) {
            const auto v = e[c].get<int>();
            if (v < 0 || v > 255) {
                throw IoError("load_palette: entry " + std::to_string(k) + " channel " +
                              std::to_string(c) + " value " + std::to_string(v) +
                              " outside [0,255]");
            }
            p.colors[k][c] = static_cast<std::uint8_t>(v);
        }
    }
    p.validate();
    return p;
}

}  // namespace kinface
