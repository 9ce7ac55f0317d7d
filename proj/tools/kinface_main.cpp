// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
//
// Single-binary operator CLI. Subcommands: augment, colorize, train, predict,
// eval, gradcheck. Every command is a pure function of (config file, flag
// overrides, filesystem inputs); logs go to stderr, data to files and stdout.
// Exit codes: 0 ok, 1 config error, 2 I/O error, 3 numeric failure.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kinface/kinface.hpp"

namespace fs = std::filesystem;
using namespace kinface;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> manifest;
    bool strict = false;
    bool strict_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out_dir) {
    cmd->add_option("--config", args.config_path, "JSON config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the run seed");
    cmd->add_option("--manifest", args.manifest, "override the dataset manifest path");
    cmd->add_flag_callback(
        "--strict", [&args] { args.strict = args.strict_set = true; },
        "fail on recoverable issues instead of warning");
    auto* out = cmd->add_option("--out-dir", args.out_dir, "output directory");
    if (needs_out_dir) out->required();
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.strict_set) cfg.strict = args.strict;
    if (args.manifest) cfg.manifest = *args.manifest;
    return cfg;
}

fs::path prepare_out_dir(const CommonArgs& args, const RunConfig& cfg) {
    fs::path out_dir(args.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "'");
    save_run_config(cfg, out_dir / "resolved_config.json");
    return out_dir;
}

DatasetManifest require_manifest(const RunConfig& cfg) {
    if (cfg.manifest.empty())
        throw ConfigError("a dataset manifest is required (config 'manifest' or --manifest)");
    return load_manifest(cfg.manifest);
}

void copy_file_bytes(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::create_directories(to.parent_path(), ec);
    if (!fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec) || ec) {
        throw IoError("cannot copy '" + from.string() + "' to '" + to.string() + "'");
    }
}

fs::path mirrored_path(const DatasetManifest& manifest, const fs::path& input,
                       const fs::path& out_dir) {
    std::error_code ec;
    fs::path rel = fs::relative(input, manifest.base_dir, ec);
    if (ec || rel.empty() || rel.native().starts_with("..")) rel = input.filename();
    return out_dir / rel;
}

// ---------------------------------------------------------------- augment --

int run_augment(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    DatasetManifest manifest = require_manifest(cfg);
    fs::path out_dir = prepare_out_dir(args, cfg);

    DatasetManifest out_manifest;
    out_manifest.base_dir = out_dir;
    std::size_t augmented = 0, mixup_count = 0, jitter_count = 0;
    std::map<std::string, std::size_t> affine_counts;

    for (const FamilyTriplet& triplet : manifest.families) {
        FamilyImages images = load_family_images(triplet, /*need_labels=*/false);
        SeededRng rng = family_stream(cfg.seed, triplet.family_id);
        ImagePlane father = images.father;
        ImagePlane mother = images.mother;
        AugmentOutcome outcome =
            augment_family(father, mother, images.child, cfg.augment, rng);

        FamilyTriplet out = triplet;
        out.father_img = mirrored_path(manifest, triplet.father_img, out_dir);
        out.mother_img = mirrored_path(manifest, triplet.mother_img, out_dir);
        out.child_img = mirrored_path(manifest, triplet.child_img, out_dir);
        fs::create_directories(out.father_img.parent_path());
        if (outcome.applied) {
            ++augmented;
            save_image(father, out.father_img);
            save_image(mother, out.mother_img);
            if (outcome.mixup_weights) ++mixup_count;
            for (const auto& ops : {outcome.father_ops, outcome.mother_ops})
                for (const AffineOp& op : ops) ++affine_counts[to_string(op.kind)];
            if (outcome.father_jitter) jitter_count += 2;
        } else {
            copy_file_bytes(triplet.father_img, out.father_img);
            copy_file_bytes(triplet.mother_img, out.mother_img);
        }
        // children are never altered; label maps are never warped
        copy_file_bytes(triplet.child_img, out.child_img);
        for (auto [src, dst] : {std::pair(&triplet.father_labels, &out.father_labels),
                                std::pair(&triplet.mother_labels, &out.mother_labels),
                                std::pair(&triplet.child_labels, &out.child_labels)}) {
            if (src->has_value()) {
                *dst = mirrored_path(manifest, **src, out_dir);
                copy_file_bytes(**src, **dst);
            }
        }
        out_manifest.families.push_back(std::move(out));
    }
    save_manifest(out_manifest, out_dir / "manifest.json");

    std::printf("families: %zu\n", manifest.families.size());
    std::printf("augmented: %zu\n", augmented);
    std::printf("mixup: %zu\n", mixup_count);
    for (const auto& [kind, count] : affine_counts)
        std::printf("affine %s: %zu\n", kind.c_str(), count);
    std::printf("hue_sat_jitter: %zu\n", jitter_count);
    return 0;
}

// --------------------------------------------------------------- colorize --

int run_colorize(const CommonArgs& args, const std::vector<std::string>& label_files,
                 const std::string& palette_path) {
    RunConfig cfg = resolve_config(args);
    fs::path out_dir = prepare_out_dir(args, cfg);
    const Palette palette =
        palette_path.empty() ? Palette::defaults() : load_palette(palette_path);
    if (label_files.empty()) throw ConfigError("colorize: no label-map files given");
    for (const std::string& file : label_files) {
        LabelMap map = load_labelmap(file);
        ImagePlane img = colorize_labels(map, palette);
        fs::path out = out_dir / (fs::path(file).stem().string() + "_rgb.png");
        save_image(img, out);
        std::fprintf(stderr, "colorized %s -> %s\n", file.c_str(), out.string().c_str());
    }
    save_palette(palette, out_dir / "palette.json");
    std::printf("colorized: %zu\n", label_files.size());
    return 0;
}

// ------------------------------------------------------------------ train --

int run_train(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    DatasetManifest manifest = require_manifest(cfg);
    fs::path out_dir = prepare_out_dir(args, cfg);

    TrainResult result = train(manifest, cfg.to_train_config());
    save_checkpoint(result.checkpoint, out_dir / "checkpoint.bin");
    write_metrics_csv(result.history, out_dir / "metrics.csv");
    write_metrics_json(result.history, out_dir / "metrics.json");

    std::fprintf(stderr, "trained %zu epochs, best epoch %zu (val latent mse %.17g)\n",
                 result.history.epochs.size(), result.history.best_epoch,
                 result.history.best_val_mse_latent);
    std::fprintf(stderr, "checkpoint: %s\n", (out_dir / "checkpoint.bin").string().c_str());
    return 0;
}

// ---------------------------------------------------------------- predict --

int run_predict(const CommonArgs& args, const std::string& checkpoint_path,
                const std::string& father_path, const std::string& mother_path,
                const std::string& father_labels_path,
                const std::string& mother_labels_path) {
    RunConfig cfg = resolve_config(args);
    fs::path out_dir = prepare_out_dir(args, cfg);

    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    PredictInput input;
    input.father = load_image(father_path);
    input.mother = load_image(mother_path);
    if (!father_labels_path.empty()) input.father_labels = load_labelmap(father_labels_path);
    if (!mother_labels_path.empty()) input.mother_labels = load_labelmap(mother_labels_path);

    Prediction pred = predict(ckpt, input, cfg.to_train_config());
    save_image(pred.child_image, out_dir / "child.png");

    // raw little-endian doubles, row-major 16x512 (see README, "Latent file")
    {
        std::ofstream out(out_dir / "child_latent.bin", std::ios::binary);
        if (!out) throw IoError("cannot write child_latent.bin");
        out.write(reinterpret_cast<const char*>(pred.child_latent.data.data()),
                  static_cast<std::streamsize>(pred.child_latent.data.size() * sizeof(double)));
    }
    std::fprintf(stderr, "child image: %s\n", (out_dir / "child.png").string().c_str());
    std::fprintf(stderr, "child latent: %s\n",
                 (out_dir / "child_latent.bin").string().c_str());
    return 0;
}

// ------------------------------------------------------------------- eval --

int run_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& split_name, bool parent_diagnostic) {
    RunConfig cfg = resolve_config(args);
    DatasetManifest manifest = require_manifest(cfg);
    fs::path out_dir = prepare_out_dir(args, cfg);

    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    SplitAssignment split = split_families(manifest, cfg.seed, cfg.train_fraction);
    const EvalSplit which = eval_split_from_string(split_name);
    std::vector<std::size_t> indices;
    if (which == EvalSplit::kTrain) indices = split.train;
    else if (which == EvalSplit::kVal) indices = split.val;
    else {
        indices.resize(manifest.families.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    }

    EvalReport report =
        evaluate(ckpt, manifest, indices, cfg.to_train_config(), parent_diagnostic);
    write_report(report, out_dir / "report.csv", ReportFormat::kCsv);
    write_report(report, out_dir / "report.json", ReportFormat::kJson);

    std::printf("%-24s %12s %12s %12s\n", "Split", "MSE (lat)", "MSE (images)", "Cosine");
    std::printf("%-24s %12.6g %12.6g %12.6g\n", split_name.c_str(),
                report.aggregates.mse_latent, report.aggregates.mse_image,
                report.aggregates.cosine);
    if (report.aggregates.cosine_parent_latent) {
        std::printf("%-24s %12.6g\n", "cosine_parent_latent (diagnostic)",
                    *report.aggregates.cosine_parent_latent);
    }
    std::fprintf(stderr, "report: %s\n", (out_dir / "report.csv").string().c_str());
    return 0;
}

// -------------------------------------------------------------- gradcheck --

int run_gradcheck(const CommonArgs& args, bool full, double eps, std::size_t samples) {
    RunConfig cfg = resolve_config(args);
    if (!args.out_dir.empty()) prepare_out_dir(args, cfg);

    SeededRng rng = SeededRng(cfg.seed).split("gradcheck");
    MlpParams params = full ? MlpParams::he_init_production(rng)
                            : MlpParams::he_init(24, 16, 12, rng);
    Tensor input({std::size_t{2}, params.in_dim});
    for (std::size_t i = 0; i < input.size(); ++i) input[i] = rng.uniform(-1.0, 1.0);
    Tensor target({std::size_t{2}, params.out_dim});
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform(-1.0, 1.0);

    const double max_rel_err =
        finite_diff_gradcheck(params, input, target, eps, samples, cfg.seed);
    std::printf("max_rel_err %.17g\n", max_rel_err);
    const bool ok = max_rel_err < 1e-5;
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinship face synthesis pipeline: augmentation, segmentation label "
                 "handling, latent aggregation training, and evaluation"};
    app.require_subcommand(1);

    CommonArgs augment_args;
    auto* cmd_augment = app.add_subcommand("augment", "write an augmented copy of a dataset");
    add_common(cmd_augment, augment_args, /*needs_out_dir=*/true);

    CommonArgs colorize_args;
    std::vector<std::string> colorize_files;
    std::string colorize_palette;
    auto* cmd_colorize = app.add_subcommand("colorize", "render label maps with a palette");
    add_common(cmd_colorize, colorize_args, /*needs_out_dir=*/true);
    cmd_colorize->add_option("files", colorize_files, "label-map PNG files")
        ->check(CLI::ExistingFile);
    cmd_colorize->add_option("--palette", colorize_palette, "palette JSON file")
        ->check(CLI::ExistingFile);

    CommonArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "train the latent aggregator");
    add_common(cmd_train, train_args, /*needs_out_dir=*/true);

    CommonArgs predict_args;
    std::string ckpt_path, father_path, mother_path, father_labels, mother_labels;
    auto* cmd_predict = app.add_subcommand("predict", "predict a child from two parents");
    add_common(cmd_predict, predict_args, /*needs_out_dir=*/true);
    cmd_predict->add_option("--checkpoint", ckpt_path, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_predict->add_option("--father", father_path, "father image (PNG)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_predict->add_option("--mother", mother_path, "mother image (PNG)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_predict->add_option("--father-labels", father_labels, "father label map (PNG)")
        ->check(CLI::ExistingFile);
    cmd_predict->add_option("--mother-labels", mother_labels, "mother label map (PNG)")
        ->check(CLI::ExistingFile);

    CommonArgs eval_args;
    std::string eval_ckpt, eval_split = "val";
    bool eval_parent_diag = false;
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    add_common(cmd_eval, eval_args, /*needs_out_dir=*/true);
    cmd_eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd_eval->add_option("--split", eval_split, "train|val|all (default val)");
    cmd_eval->add_flag("--parent-diagnostic", eval_parent_diag,
                       "add the prior-work parent-latent cosine column");

    CommonArgs gradcheck_args;
    bool gradcheck_full = false;
    double gradcheck_eps = 1e-5;
    std::size_t gradcheck_samples = 1000;
    auto* cmd_gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
    add_common(cmd_gradcheck, gradcheck_args, /*needs_out_dir=*/false);
    cmd_gradcheck->add_flag("--full", gradcheck_full,
                            "check the production-size net (subsampled) instead of the small "
                            "test net");
    cmd_gradcheck->add_option("--eps", gradcheck_eps, "central-difference step");
    cmd_gradcheck->add_option("--samples", gradcheck_samples,
                              "minimum parameter subsample for the full net");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*cmd_augment) return run_augment(augment_args);
        if (*cmd_colorize) return run_colorize(colorize_args, colorize_files, colorize_palette);
        if (*cmd_train) return run_train(train_args);
        if (*cmd_predict)
            return run_predict(predict_args, ckpt_path, father_path, mother_path,
                               father_labels, mother_labels);
        if (*cmd_eval) return run_eval(eval_args, eval_ckpt, eval_split, eval_parent_diag);
        if (*cmd_gradcheck)
            return run_gradcheck(gradcheck_args, gradcheck_full, gradcheck_eps,
                                 gradcheck_samples);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 1;
}
