// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kinface/errors.hpp"
#include "kinface/mlp.hpp"

namespace kinface {

// Trained aggregator plus its optimizer state, the digest of the config it
// was trained under, and the run seed. Serialized as the versioned
// little-endian binary laid out in README.md ("Checkpoint format"); writes
// are byte-deterministic.
struct Checkpoint {
    MlpParams params;
    AdamState state;
    std::uint64_t config_digest = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'K', 'I', 'N', 'F', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const char* what) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError(std::string("load_checkpoint: truncated file while reading ") + what);
}

inline void write_tensor_data(std::ofstream& out, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline void read_tensor_data(std::ifstream& in, Tensor& t, const char* what) {
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw IoError(std::string("load_checkpoint: truncated file while reading ") + what);
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot write '" + path.string() + "'");
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::write_pod(out, detail::kCheckpointVersion);
    detail::write_pod(out, ckpt.config_digest);
    detail::write_pod(out, ckpt.seed);
    detail::write_pod(out, static_cast<std::uint64_t>(ckpt.params.in_dim));
    detail::write_pod(out, static_cast<std::uint64_t>(ckpt.params.hidden_dim));
    detail::write_pod(out, static_cast<std::uint64_t>(ckpt.params.out_dim));
    detail::write_pod(out, ckpt.params.dropout_p);
    detail::write_pod(out, ckpt.state.t);
    detail::write_pod(out, ckpt.state.lr);
    detail::write_pod(out, ckpt.state.beta1);
    detail::write_pod(out, ckpt.state.beta2);
    detail::write_pod(out, ckpt.state.eps);
    for (const Tensor* t :
         {&ckpt.params.w1, &ckpt.params.b1, &ckpt.params.w2, &ckpt.params.b2, &ckpt.state.m.w1,
          &ckpt.state.m.b1, &ckpt.state.m.w2, &ckpt.state.m.b2, &ckpt.state.v.w1,
          &ckpt.state.v.b1, &ckpt.state.v.w2, &ckpt.state.v.b2}) {
        detail::write_tensor_data(out, *t);
    }
    if (!out) throw IoError("save_checkpoint: write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot read '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError("load_checkpoint: '" + path.string() + "' is not a checkpoint file");
    }
    std::uint32_t version = 0;
    detail::read_pod(in, version, "version");
    if (version != detail::kCheckpointVersion) {
        throw IoError("load_checkpoint: unsupported version " + std::to_string(version) +
                      " in '" + path.string() + "' (expected " +
                      std::to_string(detail::kCheckpointVersion) + ")");
    }
    Checkpoint ckpt;
    detail::read_pod(in, ckpt.config_digest, "config digest");
    detail::read_pod(in, ckpt.seed, "seed");
    std::uint64_t in_dim = 0, hidden_dim = 0, out_dim = 0;
    double dropout_p = 0.0;
    detail::read_pod(in, in_dim, "in_dim");
    detail::read_pod(in, hidden_dim, "hidden_dim");
    detail::read_pod(in, out_dim, "out_dim");
    detail::read_pod(in, dropout_p, "dropout_p");
    ckpt.params = MlpParams::sized(in_dim, hidden_dim, out_dim, dropout_p);
    ckpt.state = AdamState();
    ckpt.state.m = MlpGrads::zeros_like(ckpt.params);
    ckpt.state.v = MlpGrads::zeros_like(ckpt.params);
    detail::read_pod(in, ckpt.state.t, "adam t");
    detail::read_pod(in, ckpt.state.lr, "adam lr");
    detail::read_pod(in, ckpt.state.beta1, "adam beta1");
    detail::read_pod(in, ckpt.state.beta2, "adam beta2");
    detail::read_pod(in, ckpt.state.eps, "adam eps");
    for (auto [t, name] : std::initializer_list<std::pair<Tensor*, const char*>>{
             {&ckpt.params.w1, "w1"},
             {&ckpt.params.b1, "b1"},
             {&ckpt.params.w2, "w2"},
             {&ckpt.params.b2, "b2"},
             {&ckpt.state.m.w1, "m.w1"},
             {&ckpt.state.m.b1, "m.b1"},
             {&ckpt.state.m.w2, "m.w2"},
             {&ckpt.state.m.b2, "m.b2"},
             {&ckpt.state.v.w1, "v.w1"},
             {&ckpt.state.v.b1, "v.b1"},
             {&ckpt.state.v.w2, "v.w2"},
             {&ckpt.state.v.b2, "v.b2"}}) {
        detail::read_tensor_data(in, *t, name);
    }
    in.peek();
    if (!in.eof()) {
        throw IoError("load_checkpoint: trailing bytes in '" + path.string() + "'");
    }
    return ckpt;
}

}  // namespace kinface
