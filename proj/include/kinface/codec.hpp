// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "kinface/errors.hpp"
#include "kinface/image.hpp"
#include "kinface/rng.hpp"
#include "kinface/tensor.hpp"

namespace kinface {

// One face's embedding: a 16x512 matrix of 64-bit floats (W+-style stack of
// 16 style rows).
struct Latent {
    static constexpr std::size_t kRows = 16;
    static constexpr std::size_t kCols = 512;
    static constexpr std::size_t kSize = kRows * kCols;  // 8192

    std::vector<double> data;

    Latent() : data(kSize, 0.0) {}
    explicit Latent(std::vector<double> values) : data(std::move(values)) {
        if (data.size() != kSize) {
            throw DimensionError("Latent: expected " + std::to_string(kSize) + " elements (" +
                                 std::to_string(kRows) + "x" + std::to_string(kCols) +
                                 "), actual " + std::to_string(data.size()));
        }
    }

    double& at(std::size_t r, std::size_t c) { return data[r * kCols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * kCols + c]; }

    Tensor as_tensor() const { return Tensor({kRows, kCols}, data); }

    void require_finite(const char* what) const {
        for (double v : data)
            if (!std::isfinite(v))
                throw NumericError(std::string(what) + ": non-finite latent element");
    }
};

struct CodecDescriptor {
    std::string type = "toy";  // "toy" | "external"
    std::uint64_t seed = 0;
    int working_resolution = 32;
    int output_resolution = 256;
    std::string endpoint;  // external slot only

    bool operator==(const CodecDescriptor&) const = default;
};

// The embed/generate boundary that abstracts the pretrained generator. Both
// directions are total, deterministic, and immutable after construction.
class Codec {
public:
    virtual ~Codec() = default;
    virtual Latent embed(const ImagePlane& img) const = 0;
    virtual ImagePlane generate(const Latent& z) const = 0;
    virtual int working_resolution() const = 0;
    virtual int output_resolution() const = 0;
    virtual CodecDescriptor descriptor() const = 0;

    // Gradient hook for image-space training: v^T * d generate / d z. Codecs
    // without gradient access (the external adapter slot) reject it.
    virtual bool supports_generate_vjp() const { return false; }
    virtual Latent generate_vjp(const Latent& /*z*/,
                                const ImagePlane& /*output_cotangent*/) const {
        throw NumericError("codec '" + descriptor().type +
                           "' does not expose generator gradients; "
                           "image-space loss needs a differentiable codec");
    }
};

namespace detail {

using ColMajor = Eigen::MatrixXd;

// Modified Gram-Schmidt-style orthonormalization via Householder QR; returns
// false on rank deficiency instead of producing a degenerate basis.
inline bool orthonormalize_columns(ColMajor& a, double tol = 1e-10) {
    Eigen::HouseholderQR<ColMajor> qr(a);
    const ColMajor& qrm = qr.matrixQR();
    for (Eigen::Index i = 0; i < qrm.cols(); ++i) {
        if (std::abs(qrm(i, i)) < tol) return false;
    }
    a = qr.householderQ() * ColMajor::Identity(a.rows(), a.cols());
    return true;
}

}  // namespace detail

// Deterministic, invertible linear stand-in for the real generator: a seeded
// Gaussian D x D matrix (D = working pixels) orthonormalized into A.
//   embed:    resize to working res, normalize [0,255] -> [-1,1], z = A^T x,
//             zero-pad to 16x512
//   generate: x = A * z[0..D), denormalize, clamp, bilinear upscale
// Round trips are exact (to fp) on the zero-padded subspace because
// A^T A = I.
class ToyLinearCodec : public Codec {
public:
    ToyLinearCodec(std::uint64_t seed, int working_resolution, int output_resolution)
        : seed_(seed), working_res_(working_resolution), output_res_(output_resolution) {
        if (working_res_ <= 0 || output_res_ <= 0)
            throw ConfigError("ToyLinearCodec: resolutions must be positive");
        const std::size_t d =
            static_cast<std::size_t>(working_res_) * working_res_ * 3;
        if (d > Latent::kSize) {
            throw ConfigError("ToyLinearCodec: working resolution " +
                              std::to_string(working_res_) + " needs " + std::to_string(d) +
                              " latent slots, more than the " + std::to_string(Latent::kSize) +
                              " available");
        }
        dim_ = static_cast<Eigen::Index>(d);

        std::uint64_t sub_seed = seed_;
        for (int attempt = 0;; ++attempt) {
            SeededRng rng = SeededRng(sub_seed).split("toy-codec-projection");
            basis_.resize(dim_, dim_);
            // row-major draw order over the conceptual Gaussian matrix
            for (Eigen::Index r = 0; r < dim_; ++r)
                for (Eigen::Index c = 0; c < dim_; ++c) basis_(r, c) = rng.normal();
            if (detail::orthonormalize_columns(basis_)) break;
            if (attempt >= 8)
                throw NumericError("ToyLinearCodec: repeated rank deficiency (seed " +
                                   std::to_string(seed_) + ")");
            ++sub_seed;
            std::fprintf(stderr,
                         "toy codec: rank-deficient draw, re-drawing with sub-seed %llu\n",
                         static_cast<unsigned long long>(sub_seed));
        }
    }

    // Pixel-scale float paths; generate_pixels skips clamping/quantization so
    // embed_pixels(generate_pixels(z)) recovers z exactly on the padded
    // subspace.
    std::vector<double> generate_pixels(const Latent& z) const {
        z.require_finite("ToyLinearCodec::generate");
        Eigen::Map<const Eigen::VectorXd> zv(z.data.data(), dim_);
        Eigen::VectorXd x = basis_ * zv;
        std::vector<double> pixels(static_cast<std::size_t>(dim_));
        for (Eigen::Index i = 0; i < dim_; ++i) pixels[i] = (x[i] + 1.0) * 127.5;
        return pixels;
    }

    Latent embed_pixels(const std::vector<double>& pixels) const {
        if (pixels.size() != static_cast<std::size_t>(dim_)) {
            throw DimensionError("ToyLinearCodec::embed_pixels: expected " +
                                 std::to_string(dim_) + " values, actual " +
                                 std::to_string(pixels.size()));
        }
        Eigen::VectorXd x(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i) x[i] = pixels[i] / 127.5 - 1.0;
        Eigen::VectorXd z = basis_.transpose() * x;
        Latent out;
        for (Eigen::Index i = 0; i < dim_; ++i) out.data[i] = z[i];
        return out;
    }

    Latent embed(const ImagePlane& img) const override {
        ImagePlane small = resize(img, working_res_, working_res_, ResizeMode::kBilinear);
        return embed_pixels(small.data);
    }

    ImagePlane generate(const Latent& z) const override {
        std::vector<double> pixels = generate_pixels(z);
        ImagePlane working(working_res_, working_res_);
        for (std::size_t i = 0; i < pixels.size(); ++i)
            working.data[i] = std::clamp(pixels[i], 0.0, 255.0);
        return resize(working, output_res_, output_res_, ResizeMode::kBilinear);
    }

    int working_resolution() const override { return working_res_; }
    int output_resolution() const override { return output_res_; }

    CodecDescriptor descriptor() const override {
        CodecDescriptor d;
        d.type = "toy";
        d.seed = seed_;
        d.working_resolution = working_res_;
        d.output_resolution = output_res_;
        return d;
    }

    bool supports_generate_vjp() const override { return true; }

    // Adjoint of generate: upscale -> clamp -> denormalize -> basis, run
    // backwards. The cotangent arrives at output resolution.
    Latent generate_vjp(const Latent& z, const ImagePlane& output_cotangent) const override {
        if (output_cotangent.height != output_res_ || output_cotangent.width != output_res_) {
            throw DimensionError("ToyLinearCodec::generate_vjp: cotangent dims " +
                                 std::to_string(output_cotangent.height) + "x" +
                                 std::to_string(output_cotangent.width) + ", expected " +
                                 std::to_string(output_res_) + "x" +
                                 std::to_string(output_res_));
        }
        // adjoint of the bilinear upscale: scatter each output weight back
        std::vector<double> grad_working(static_cast<std::size_t>(dim_), 0.0);
        auto scatter = [&](int sy, int sx, int c, double w) {
            grad_working[(static_cast<std::size_t>(sy) * working_res_ + sx) * 3 + c] += w;
        };
        for (int y = 0; y < output_res_; ++y) {
            const double fy = detail::src_coord(y, working_res_, output_res_);
            const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, working_res_ - 1);
            const int y1 = std::min(y0 + 1, working_res_ - 1);
            const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
            for (int x = 0; x < output_res_; ++x) {
                const double fx = detail::src_coord(x, working_res_, output_res_);
                const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, working_res_ - 1);
                const int x1 = std::min(x0 + 1, working_res_ - 1);
                const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
                for (int c = 0; c < 3; ++c) {
                    const double g = output_cotangent.at(y, x, c);
                    if (g == 0.0) continue;
                    scatter(y0, x0, c, g * (1.0 - wx) * (1.0 - wy));
                    scatter(y0, x1, c, g * wx * (1.0 - wy));
                    scatter(y1, x0, c, g * (1.0 - wx) * wy);
                    scatter(y1, x1, c, g * wx * wy);
                }
            }
        }
        // clamp gate (zero where the pre-clamp pixel saturated), then the
        // denormalization factor and the basis adjoint
        std::vector<double> pixels = generate_pixels(z);
        Eigen::VectorXd gx(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i) {
            const bool active = pixels[i] > 0.0 && pixels[i] < 255.0;
            gx[i] = active ? grad_working[i] * 127.5 : 0.0;
        }
        Eigen::VectorXd gz = basis_.transpose() * gx;
        Latent out;
        for (Eigen::Index i = 0; i < dim_; ++i) out.data[i] = gz[i];
        return out;
    }

    // Column-orthonormal projection basis (pixels x latent-active dims).
    const Eigen::MatrixXd& basis() const { return basis_; }
    Eigen::Index active_dims() const { return dim_; }

private:
    std::uint64_t seed_;
    int working_res_;
    int output_res_;
    Eigen::Index dim_;
    Eigen::MatrixXd basis_;
};

// Codec construction is costly (dense QR); instances are immutable, so they
// are shared per descriptor within the process.
inline std::shared_ptr<const Codec> make_codec(const CodecDescriptor& desc) {
    if (desc.type == "external") {
        throw ConfigError(
            "codec type 'external' is an adapter slot for a pretrained generator service; "
            "no adapter is built in this artifact (endpoint '" + desc.endpoint + "')");
    }
    if (desc.type != "toy") {
        throw ConfigError("unknown codec type '" + desc.type + "' (expected toy|external)");
    }
    static std::mutex cache_mutex;
    static std::map<std::tuple<std::uint64_t, int, int>, std::shared_ptr<const Codec>> cache;
    const auto key = std::make_tuple(desc.seed, desc.working_resolution,
                                     desc.output_resolution);
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto codec = std::make_shared<const ToyLinearCodec>(desc.seed, desc.working_resolution,
                                                        desc.output_resolution);
    cache.emplace(key, codec);
    return codec;
}

}  // namespace kinface
