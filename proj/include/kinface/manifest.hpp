// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinface/errors.hpp"
#include "kinface/rng.hpp"

namespace kinface {

// One father-mother-child sample. Label-map paths are optional and only
// required when segmentation is enabled.
struct FamilyTriplet {
    std::string family_id;
    std::filesystem::path father_img;
    std::filesystem::path mother_img;
    std::filesystem::path child_img;
    std::optional<std::filesystem::path> father_labels;
    std::optional<std::filesystem::path> mother_labels;
    std::optional<std::filesystem::path> child_labels;
};

struct DatasetManifest {
    std::vector<FamilyTriplet> families;
    std::filesystem::path base_dir;  // directory the manifest was loaded from
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError(context + ": unknown key '" + it.key() + "'");
        }
    }
}

inline std::filesystem::path resolve_manifest_path(const std::filesystem::path& base,
                                                   const std::string& rel,
                                                   const std::string& family_id,
                                                   const char* role) {
    std::filesystem::path p = base / rel;
    if (!std::filesystem::exists(p)) {
        throw IoError("manifest: family '" + family_id + "' " + role + " path '" + rel +
                      "' does not exist (resolved to '" + p.string() + "')");
    }
    return p;
}

}  // namespace detail

// Manifest JSON: {"families": [{"family_id", "father", "mother", "child",
// optional "father_labels"/"mother_labels"/"child_labels"}, ...]} with paths
// relative to the manifest's directory. Every referenced file must exist and
// ids must be unique.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot read '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_manifest: '" + path.string() + "' is not valid JSON: " + e.what());
    }
    detail::reject_unknown_keys(j, {"families"}, "manifest");
    if (!j.contains("families") || !j["families"].is_array()) {
        throw ConfigError("load_manifest: '" + path.string() +
                          "' must hold a 'families' array");
    }
    DatasetManifest manifest;
    manifest.base_dir = path.has_parent_path() ? path.parent_path()
                                               : std::filesystem::path(".");
    std::set<std::string> seen_ids;
    for (const auto& fj : j["families"]) {
        detail::reject_unknown_keys(fj,
                                    {"family_id", "father", "mother", "child", "father_labels",
                                     "mother_labels", "child_labels"},
                                    "manifest family");
        FamilyTriplet t;
        for (const char* key : {"family_id", "father", "mother", "child"}) {
            if (!fj.contains(key)) {
                throw ConfigError("load_manifest: family entry missing required key '" +
                                  std::string(key) + "'");
            }
        }
        t.family_id = fj["family_id"].get<std::string>();
        if (!seen_ids.insert(t.family_id).second) {
            throw ConfigError("load_manifest: duplicate family_id '" + t.family_id + "'");
        }
        t.father_img = detail::resolve_manifest_path(manifest.base_dir,
                                                     fj["father"].get<std::string>(),
                                                     t.family_id, "father");
        t.mother_img = detail::resolve_manifest_path(manifest.base_dir,
                                                     fj["mother"].get<std::string>(),
                                                     t.family_id, "mother");
        t.child_img = detail::resolve_manifest_path(manifest.base_dir,
                                                    fj["child"].get<std::string>(),
                                                    t.family_id, "child");
        if (fj.contains("father_labels"))
            t.father_labels = detail::resolve_manifest_path(
                manifest.base_dir, fj["father_labels"].get<std::string>(), t.family_id,
                "father_labels");
        if (fj.contains("mother_labels"))
            t.mother_labels = detail::resolve_manifest_path(
                manifest.base_dir, fj["mother_labels"].get<std::string>(), t.family_id,
                "mother_labels");
        if (fj.contains("child_labels"))
            t.child_labels = detail::resolve_manifest_path(
                manifest.base_dir, fj["child_labels"].get<std::string>(), t.family_id,
                "child_labels");
        manifest.families.push_back(std::move(t));
    }
    if (manifest.families.empty()) {
        throw ConfigError("load_manifest: empty dataset in '" + path.string() + "'");
    }
    return manifest;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["families"] = nlohmann::json::array();
    const std::filesystem::path base =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto rel = [&](const std::filesystem::path& p) {
        std::error_code ec;
        std::filesystem::path r = std::filesystem::relative(p, base, ec);
        return ec ? p.string() : r.string();
    };
    for (const auto& t : manifest.families) {
        nlohmann::json fj;
        fj["family_id"] = t.family_id;
        fj["father"] = rel(t.father_img);
        fj["mother"] = rel(t.mother_img);
        fj["child"] = rel(t.child_img);
        if (t.father_labels) fj["father_labels"] = rel(*t.father_labels);
        if (t.mother_labels) fj["mother_labels"] = rel(*t.mother_labels);
        if (t.child_labels) fj["child_labels"] = rel(*t.child_labels);
        j["families"].push_back(std::move(fj));
    }
    std::ofstream out(path);
    if (!out) throw IoError("save_manifest: cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

// Disjoint train/val membership via a seeded Fisher-Yates shuffle of family
// indices; floor(train_fraction * n) families train.
struct SplitAssignment {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

inline SplitAssignment split_families(const DatasetManifest& manifest, std::uint64_t seed,
                                      double train_fraction) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw ConfigError("split_families: train_fraction must be in [0,1], got " +
                          std::to_string(train_fraction));
    }
    const std::size_t n = manifest.families.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SeededRng rng = SeededRng(seed).split("dataset-split");
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t k = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[k]);
    }
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
    SplitAssignment split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.val.assign(order.begin() + n_train, order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    return split;
}

}  // namespace kinface
