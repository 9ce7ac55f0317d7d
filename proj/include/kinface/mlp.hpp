// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kinface/errors.hpp"
#include "kinface/rng.hpp"
#include "kinface/tensor.hpp"

namespace kinface {

// Two-layer aggregator: FC(in->hidden), ReLU, inverted dropout, FC(hidden->out).
// Production dimensions are 16384 -> 512 -> 8192 (two stacked 16x512 parent
// latents in, one child latent out); a configurable small variant exists for
// test harnesses.
struct MlpParams {
    static constexpr std::size_t kInputDim = 2 * 16 * 512;   // 16384
    static constexpr std::size_t kHiddenDim = 512;
    static constexpr std::size_t kOutputDim = 16 * 512;      // 8192
    static constexpr double kDefaultDropout = 0.25;

    std::size_t in_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t out_dim = 0;
    double dropout_p = kDefaultDropout;

    Tensor w1;  // [in_dim][hidden_dim]
    Tensor b1;  // [hidden_dim]
    Tensor w2;  // [hidden_dim][out_dim]
    Tensor b2;  // [out_dim]

    static MlpParams sized(std::size_t in, std::size_t hidden, std::size_t out,
                           double dropout_p = kDefaultDropout) {
        if (in == 0 || hidden == 0 || out == 0)
            throw DimensionError("MlpParams: dimensions must be positive");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0))
            throw ConfigError("MlpParams: dropout_p must be in [0,1), got " +
                              std::to_string(dropout_p));
        MlpParams p;
        p.in_dim = in;
        p.hidden_dim = hidden;
        p.out_dim = out;
        p.dropout_p = dropout_p;
        p.w1 = Tensor({in, hidden});
        p.b1 = Tensor({std::size_t{1}, hidden});
        p.w2 = Tensor({hidden, out});
        p.b2 = Tensor({std::size_t{1}, out});
        return p;
    }

    static MlpParams production(double dropout_p = kDefaultDropout) {
        return sized(kInputDim, kHiddenDim, kOutputDim, dropout_p);
    }

    // He-style scaled normal init for both layers (ReLU hidden), biases zero.
    // Draw order: w1 row-major, then w2 row-major.
    static MlpParams he_init(std::size_t in, std::size_t hidden, std::size_t out,
                             SeededRng& rng, double dropout_p = kDefaultDropout) {
        MlpParams p = sized(in, hidden, out, dropout_p);
        const double s1 = std::sqrt(2.0 / static_cast<double>(in));
        for (std::size_t i = 0; i < p.w1.size(); ++i) p.w1[i] = s1 * rng.normal();
        const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
        for (std::size_t i = 0; i < p.w2.size(); ++i) p.w2[i] = s2 * rng.normal();
        return p;
    }

    static MlpParams he_init_production(SeededRng& rng, double dropout_p = kDefaultDropout) {
        return he_init(kInputDim, kHiddenDim, kOutputDim, rng, dropout_p);
    }

    std::size_t param_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }
};

// Gradients (and Adam moments) mirror the parameter tensors.
struct MlpGrads {
    Tensor w1, b1, w2, b2;

    static MlpGrads zeros_like(const MlpParams& p) {
        MlpGrads g;
        g.w1 = Tensor(p.w1.shape());
        g.b1 = Tensor(p.b1.shape());
        g.w2 = Tensor(p.w2.shape());
        g.b2 = Tensor(p.b2.shape());
        return g;
    }
};

// Activations kept from a forward pass so the backward pass can reuse them
// (including the exact dropout mask).
struct MlpCache {
    Tensor input;           // [B][in]
    Tensor pre_act;         // [B][hidden], before ReLU
    Tensor hidden_dropped;  // [B][hidden], after ReLU and dropout scaling
    Tensor mask;            // [B][hidden], kept-unit indicator (pre-scaling)
    bool train_mode = false;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

inline CMapMat as_mat(const Tensor& t) {
    return CMapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}
inline MapMat as_mat(Tensor& t) {
    return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

inline void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite element");
}

}  // namespace detail

// Forward pass. In train mode an inverted-dropout mask is drawn from `rng`
// (row-major over [B][hidden], kept iff uniform() >= p, kept units scaled by
// 1/(1-p)); eval mode draws nothing and applies no scaling. Pass `cache` to
// keep activations for a backward pass.
inline Tensor mlp_forward(const MlpParams& params, const Tensor& input, bool train_mode,
                          SeededRng& rng, MlpCache* cache = nullptr) {
    if (input.shape().size() != 2 || input.cols() != params.in_dim) {
        throw DimensionError(
            "mlp_forward: expected input shape (B," + std::to_string(params.in_dim) +
            "), actual " + Tensor::shape_string(input.shape()));
    }
    detail::require_finite(input, "mlp_forward input");
    const std::size_t batch = input.rows();

    Tensor pre_act({batch, params.hidden_dim});
    detail::as_mat(pre_act).noalias() =
        detail::as_mat(input) * detail::as_mat(params.w1);
    detail::as_mat(pre_act).rowwise() += detail::as_mat(params.b1).row(0);

    Tensor hidden({batch, params.hidden_dim});
    Tensor mask({batch, params.hidden_dim});
    const double p = params.dropout_p;
    const double scale = train_mode ? 1.0 / (1.0 - p) : 1.0;
    for (std::size_t i = 0; i < pre_act.size(); ++i) {
        const double a = pre_act[i] > 0.0 ? pre_act[i] : 0.0;
        if (train_mode) {
            const double keep = rng.uniform() >= p ? 1.0 : 0.0;
            mask[i] = keep;
            hidden[i] = a * keep * scale;
        } else {
            mask[i] = 1.0;
            hidden[i] = a;
        }
    }

    Tensor output({batch, params.out_dim});
    detail::as_mat(output).noalias() =
        detail::as_mat(hidden) * detail::as_mat(params.w2);
    detail::as_mat(output).rowwise() += detail::as_mat(params.b2).row(0);
    detail::require_finite(output, "mlp_forward output");

    if (cache) {
        cache->input = input;
        cache->pre_act = std::move(pre_act);
        cache->hidden_dropped = std::move(hidden);
        cache->mask = std::move(mask);
        cache->train_mode = train_mode;
    }
    return output;
}

// Backward pass from an arbitrary output cotangent (d loss / d output),
// reusing the activations and dropout mask cached by the forward pass.
inline MlpGrads mlp_backward_from_delta(const MlpParams& params, const MlpCache& cache,
                                        const Tensor& delta_out) {
    if (delta_out.shape().size() != 2 || delta_out.cols() != params.out_dim ||
        delta_out.rows() != cache.input.rows()) {
        throw DimensionError("mlp_backward_from_delta: expected cotangent shape (" +
                             std::to_string(cache.input.rows()) + "," +
                             std::to_string(params.out_dim) + "), actual " +
                             Tensor::shape_string(delta_out.shape()));
    }
    const std::size_t batch = delta_out.rows();

    MlpGrads grads = MlpGrads::zeros_like(params);
    detail::as_mat(grads.w2).noalias() =
        detail::as_mat(cache.hidden_dropped).transpose() * detail::as_mat(delta_out);
    detail::as_mat(grads.b2).row(0) = detail::as_mat(delta_out).colwise().sum();

    Tensor delta_hidden({batch, params.hidden_dim});
    detail::as_mat(delta_hidden).noalias() =
        detail::as_mat(delta_out) * detail::as_mat(params.w2).transpose();

    // back through dropout scaling and ReLU (subgradient 0 at exactly 0)
    const double scale = cache.train_mode ? 1.0 / (1.0 - params.dropout_p) : 1.0;
    for (std::size_t i = 0; i < delta_hidden.size(); ++i) {
        const double gate = (cache.pre_act[i] > 0.0) ? cache.mask[i] * scale : 0.0;
        delta_hidden[i] *= gate;
    }

    detail::as_mat(grads.w1).noalias() =
        detail::as_mat(cache.input).transpose() * detail::as_mat(delta_hidden);
    detail::as_mat(grads.b1).row(0) = detail::as_mat(delta_hidden).colwise().sum();
    return grads;
}

// MSE loss against `target` plus exact analytic gradients for every parameter,
// using the same dropout mask as the forward pass. Mean reduction over all
// B*out elements, so loss magnitude is batch-invariant.
inline std::pair<double, MlpGrads> mlp_loss_and_grads(const MlpParams& params,
                                                      const Tensor& input, const Tensor& target,
                                                      bool train_mode, SeededRng& rng) {
    if (target.shape().size() != 2 || target.cols() != params.out_dim) {
        throw DimensionError(
            "mlp_loss_and_grads: expected target shape (B," + std::to_string(params.out_dim) +
            "), actual " + Tensor::shape_string(target.shape()));
    }
    MlpCache cache;
    Tensor output = mlp_forward(params, input, train_mode, rng, &cache);
    if (output.rows() != target.rows()) {
        throw DimensionError("mlp_loss_and_grads: batch mismatch, input rows " +
                             std::to_string(output.rows()) + ", target rows " +
                             std::to_string(target.rows()));
    }
    const double loss = mse(output, target);
    if (!std::isfinite(loss)) throw NumericError("mlp_loss_and_grads: non-finite loss");

    // d loss / d output, mean reduction
    Tensor delta_out({output.rows(), params.out_dim});
    const double inv_n = 2.0 / static_cast<double>(output.size());
    for (std::size_t i = 0; i < output.size(); ++i)
        delta_out[i] = inv_n * (output[i] - target[i]);

    return {loss, mlp_backward_from_delta(params, cache, delta_out)};
}

// Adam optimizer state. Moments mirror the parameter tensors; `t` counts
// completed steps.
struct AdamState {
    MlpGrads m;
    MlpGrads v;
    std::uint64_t t = 0;
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const MlpParams& params, double lr, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8) {
        // lr 0 is the degenerate no-op experiment; negative is a mistake
        if (!(lr >= 0.0)) throw ConfigError("AdamState: lr must be non-negative");
        AdamState s;
        s.m = MlpGrads::zeros_like(params);
        s.v = MlpGrads::zeros_like(params);
        s.lr = lr;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.eps = eps;
        return s;
    }
};

namespace detail {

inline void adam_update_block(double* p, const double* g, double* m, double* v, std::size_t n,
                              double lr, double beta1, double beta2, double eps, double bc1,
                              double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[i] * bc1;
        const double vhat = v[i] * bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace detail

// Standard Adam with bias correction, in place. Rejects non-finite gradients
// before touching any state.
inline void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state) {
    if (!grads.w1.same_shape(params.w1) || !grads.b1.same_shape(params.b1) ||
        !grads.w2.same_shape(params.w2) || !grads.b2.same_shape(params.b2)) {
        throw DimensionError("adam_step: gradient shapes do not mirror parameter shapes");
    }
    // validate first so a rejected step leaves params and moments untouched
    auto check = [](const Tensor& t, const char* what) {
        const double* d = t.data();
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!std::isfinite(d[i])) {
                throw NumericError(std::string("adam_step: non-finite gradient in ") + what +
                                   " at flat index " + std::to_string(i));
            }
        }
    };
    check(grads.w1, "w1");
    check(grads.b1, "b1");
    check(grads.w2, "w2");
    check(grads.b2, "b2");

    state.t += 1;
    const double bc1 = 1.0 / (1.0 - std::pow(state.beta1, static_cast<double>(state.t)));
    const double bc2 = 1.0 / (1.0 - std::pow(state.beta2, static_cast<double>(state.t)));
    detail::adam_update_block(params.w1.data(), grads.w1.data(), state.m.w1.data(),
                              state.v.w1.data(), params.w1.size(), state.lr, state.beta1,
                              state.beta2, state.eps, bc1, bc2);
    detail::adam_update_block(params.b1.data(), grads.b1.data(), state.m.b1.data(),
                              state.v.b1.data(), params.b1.size(), state.lr, state.beta1,
                              state.beta2, state.eps, bc1, bc2);
    detail::adam_update_block(params.w2.data(), grads.w2.data(), state.m.w2.data(),
                              state.v.w2.data(), params.w2.size(), state.lr, state.beta1,
                              state.beta2, state.eps, bc1, bc2);
    detail::adam_update_block(params.b2.data(), grads.b2.data(), state.m.b2.data(),
                              state.v.b2.data(), params.b2.size(), state.lr, state.beta1,
                              state.beta2, state.eps, bc1, bc2);
}

// Central-difference gradient oracle. Perturbs parameters one at a time (or a
// seeded random subsample of at least `min_subsample` when the parameter count
// exceeds it), recomputes the eval-mode loss through the public forward pass
// only, and returns the worst relative error against the analytic gradients.
// Run in eval mode so there is no dropout randomness to pin.
inline double finite_diff_gradcheck(const MlpParams& params, const Tensor& input,
                                    const Tensor& target, double eps,
                                    std::size_t min_subsample = 1000,
                                    std::uint64_t subsample_seed = 0x5EED5EEDULL) {
    if (!(eps > 0.0)) {
        throw NumericError("finite_diff_gradcheck: eps must be positive (degenerate step)");
    }
    SeededRng unused(0);
    auto loss_at = [&](const MlpParams& p) {
        SeededRng r(0);  // eval mode draws nothing
        Tensor out = mlp_forward(p, input, /*train_mode=*/false, r);
        return mse(out, target);
    };
    auto [loss0, analytic] = mlp_loss_and_grads(params, input, target, /*train_mode=*/false,
                                                unused);
    (void)loss0;

    struct Block {
        Tensor MlpParams::*param;
        const Tensor MlpGrads::*grad;
        const char* name;
    };
    const Block blocks[] = {
        {&MlpParams::w1, &MlpGrads::w1, "w1"},
        {&MlpParams::b1, &MlpGrads::b1, "b1"},
        {&MlpParams::w2, &MlpGrads::w2, "w2"},
        {&MlpParams::b2, &MlpGrads::b2, "b2"},
    };

    const std::size_t total = params.param_count();
    std::vector<std::size_t> picks;
    if (total > min_subsample) {
        SeededRng pick_rng(subsample_seed);
        picks.reserve(min_subsample);
        for (std::size_t k = 0; k < min_subsample; ++k)
            picks.push_back(static_cast<std::size_t>(pick_rng.below(total)));
        std::sort(picks.begin(), picks.end());
        picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    } else {
        picks.resize(total);
        for (std::size_t k = 0; k < total; ++k) picks[k] = k;
    }

    MlpParams probe = params;
    double max_rel_err = 0.0;
    std::size_t block_base = 0;
    std::size_t pick_pos = 0;
    for (const Block& blk : blocks) {
        Tensor& pt = probe.*(blk.param);
        const Tensor& gt = analytic.*(blk.grad);
        const std::size_t n = pt.size();
        while (pick_pos < picks.size() && picks[pick_pos] < block_base + n) {
            const std::size_t i = picks[pick_pos] - block_base;
            const double saved = pt[i];
            pt[i] = saved + eps;
            const double lp = loss_at(probe);
            pt[i] = saved - eps;
            const double lm = loss_at(probe);
            pt[i] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double denom = std::max({std::abs(numeric), std::abs(gt[i]), 1e-12});
            max_rel_err = std::max(max_rel_err, std::abs(numeric - gt[i]) / denom);
            ++pick_pos;
        }
        block_base += n;
    }
    return max_rel_err;
}

}  // namespace kinface
