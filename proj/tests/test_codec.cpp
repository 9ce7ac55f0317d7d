// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "kinface/codec.hpp"
#include "kinface/rng.hpp"

using namespace kinface;

namespace {

// small working resolution keeps the QR cheap in unit tests; the production
// 32x32 path is exercised by the acceptance suite
constexpr int kRes = 8;

ImagePlane random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 255.0) {
    SeededRng rng(seed);
    ImagePlane img(h, w);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

Latent random_subspace_latent(const ToyLinearCodec& codec, std::uint64_t seed) {
    SeededRng rng(seed);
    Latent z;
    for (Eigen::Index i = 0; i < codec.active_dims(); ++i) z.data[i] = rng.uniform(-0.5, 0.5);
    return z;  // padding region stays zero
}

}  // namespace

TEST_CASE("projection columns are orthonormal to 1e-10") {
    ToyLinearCodec codec(3, kRes, 32);
    const Eigen::MatrixXd& a = codec.basis();
    Eigen::MatrixXd gram = a.transpose() * a;
    double max_err = 0.0;
    for (Eigen::Index r = 0; r < gram.rows(); ++r)
        for (Eigen::Index c = 0; c < gram.cols(); ++c)
            max_err = std::max(max_err, std::abs(gram(r, c) - (r == c ? 1.0 : 0.0)));
    REQUIRE(max_err < 1e-10);
}

TEST_CASE("same seed builds identical projections, different seeds differ") {
    ToyLinearCodec a(5, kRes, 32), b(5, kRes, 32), c(6, kRes, 32);
    REQUIRE(a.basis() == b.basis());
    REQUIRE((a.basis() - c.basis()).norm() > 0.0);
}

TEST_CASE("rank-deficient draws are detected") {
    Eigen::MatrixXd m(4, 4);
    m.setRandom();
    m.col(2) = m.col(0);  // duplicate column
    REQUIRE_FALSE(kinface::detail::orthonormalize_columns(m));
    Eigen::MatrixXd ok(4, 4);
    ok.setIdentity();
    ok(0, 1) = 0.5;
    REQUIRE(kinface::detail::orthonormalize_columns(ok));
}

TEST_CASE("mid-gray image embeds to the zero latent") {
    ToyLinearCodec codec(7, kRes, 32);
    ImagePlane gray = ImagePlane::filled(kRes, kRes, 127.5, 127.5, 127.5);
    Latent z = codec.embed(gray);
    for (double v : z.data) REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("zero latent generates a mid-gray image") {
    ToyLinearCodec codec(7, kRes, 16);
    Latent zero;
    ImagePlane img = codec.generate(zero);
    REQUIRE(img.height == 16);
    REQUIRE(img.width == 16);
    for (double v : img.data) REQUIRE(v == 127.5);
}

TEST_CASE("embed output has the 16x512 latent shape") {
    ToyLinearCodec codec(9, kRes, 32);
    ImagePlane img = random_image(40, 30, 9);  // codec resizes internally
    Latent z = codec.embed(img);
    REQUIRE(z.data.size() == 8192);
    Tensor t = z.as_tensor();
    REQUIRE(t.shape() == std::vector<std::size_t>{16, 512});
    // padding region beyond the active dims is zero by construction
    for (std::size_t i = std::size_t(codec.active_dims()); i < Latent::kSize; ++i)
        REQUIRE(z.data[i] == 0.0);
}

TEST_CASE("embed is affine: embed(a)+embed(b) = embed(a+b)+embed(0)") {
    ToyLinearCodec codec(11, kRes, 32);
    const std::size_t d = std::size_t(codec.active_dims());
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        SeededRng rng(seed);
        std::vector<double> a(d), b(d), sum(d), zero(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            a[i] = rng.uniform(0.0, 127.0);
            b[i] = rng.uniform(0.0, 127.0);
            sum[i] = a[i] + b[i];
        }
        Latent za = codec.embed_pixels(a);
        Latent zb = codec.embed_pixels(b);
        Latent zsum = codec.embed_pixels(sum);
        Latent zzero = codec.embed_pixels(zero);
        for (std::size_t i = 0; i < Latent::kSize; ++i) {
            REQUIRE_THAT(za.data[i] + zb.data[i],
                         Catch::Matchers::WithinAbs(zsum.data[i] + zzero.data[i], 1e-9));
        }
    }
}

TEST_CASE("latent round trip through the float path is exact to 1e-9") {
    ToyLinearCodec codec(13, kRes, 32);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Latent z = random_subspace_latent(codec, 100 + seed);
        Latent back = codec.embed_pixels(codec.generate_pixels(z));
        double max_err = 0.0;
        for (std::size_t i = 0; i < Latent::kSize; ++i)
            max_err = std::max(max_err, std::abs(back.data[i] - z.data[i]));
        REQUIRE(max_err < 1e-9);
    }
}

TEST_CASE("generate-embed is idempotent on the float path") {
    ToyLinearCodec codec(15, kRes, 32);
    ImagePlane img = random_image(kRes, kRes, 15);
    Latent once = codec.embed_pixels(img.data);
    Latent twice = codec.embed_pixels(codec.generate_pixels(once));
    for (std::size_t i = 0; i < Latent::kSize; ++i)
        REQUIRE_THAT(twice.data[i], Catch::Matchers::WithinAbs(once.data[i], 1e-9));
}

TEST_CASE("orthonormal rows never expand norms (Lipschitz bound)") {
    ToyLinearCodec codec(17, kRes, 32);
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        ImagePlane x = random_image(kRes, kRes, 400 + seed);
        ImagePlane y = random_image(kRes, kRes, 500 + seed);
        Latent zx = codec.embed(x);
        Latent zy = codec.embed(y);
        double lat = 0.0, pix = 0.0;
        for (std::size_t i = 0; i < Latent::kSize; ++i) {
            const double d = zx.data[i] - zy.data[i];
            lat += d * d;
        }
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double d = (x.data[i] - y.data[i]) / 127.5;
            pix += d * d;
        }
        REQUIRE(std::sqrt(lat) <= std::sqrt(pix) + 1e-12);
    }
}

TEST_CASE("generate is deterministic and clamps to image range") {
    ToyLinearCodec codec(19, kRes, 24);
    Latent z = random_subspace_latent(codec, 19);
    for (double& v : z.data) v *= 10.0;  // force values past the clamp
    ImagePlane a = codec.generate(z);
    ImagePlane b = codec.generate(z);
    REQUIRE(a.data == b.data);
    REQUIRE(a.in_range());
}

TEST_CASE("generate_vjp matches finite differences through the full generate path") {
    ToyLinearCodec codec(21, 4, 8);
    Latent z = random_subspace_latent(codec, 21);
    ImagePlane target = random_image(8, 8, 22);

    // loss = mean squared pixel difference; cotangent = dL/d gen
    auto loss_at = [&](const Latent& probe) {
        ImagePlane gen = codec.generate(probe);
        double acc = 0.0;
        for (std::size_t i = 0; i < gen.data.size(); ++i) {
            const double d = gen.data[i] - target.data[i];
            acc += d * d;
        }
        return acc / double(gen.data.size());
    };
    ImagePlane gen = codec.generate(z);
    ImagePlane cot(8, 8);
    for (std::size_t i = 0; i < gen.data.size(); ++i)
        cot.data[i] = 2.0 * (gen.data[i] - target.data[i]) / double(gen.data.size());
    Latent analytic = codec.generate_vjp(z, cot);

    const double eps = 1e-6;
    double max_rel = 0.0;
    for (Eigen::Index i = 0; i < codec.active_dims(); ++i) {
        Latent probe = z;
        probe.data[i] += eps;
        const double lp = loss_at(probe);
        probe.data[i] -= 2 * eps;
        const double lm = loss_at(probe);
        const double numeric = (lp - lm) / (2 * eps);
        const double denom = std::max({std::abs(numeric), std::abs(analytic.data[i]), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic.data[i]) / denom);
    }
    REQUIRE(max_rel < 1e-5);
}

TEST_CASE("external codec slot is reserved but not built") {
    CodecDescriptor desc;
    desc.type = "external";
    desc.endpoint = "http://localhost:9999";
    REQUIRE_THROWS_WITH(make_codec(desc), Catch::Matchers::ContainsSubstring("external"));
    desc.type = "mystery";
    REQUIRE_THROWS_AS(make_codec(desc), ConfigError);
}

TEST_CASE("working resolution must fit the latent budget") {
    // 52*52*3 = 8112 fits; 53*53*3 = 8427 does not
    REQUIRE_THROWS_AS(ToyLinearCodec(1, 53, 64), ConfigError);
}

TEST_CASE("make_codec caches per descriptor") {
    CodecDescriptor desc;
    desc.type = "toy";
    desc.seed = 23;
    desc.working_resolution = kRes;
    desc.output_resolution = 32;
    auto a = make_codec(desc);
    auto b = make_codec(desc);
    REQUIRE(a.get() == b.get());
    desc.seed = 24;
    REQUIRE(make_codec(desc).get() != a.get());
}
