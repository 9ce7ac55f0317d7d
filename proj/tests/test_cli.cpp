// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "kinface/metrics.hpp"
#include "synthetic.hpp"

using namespace kinface;
using kinface::testutil::SyntheticSpec;
using kinface::testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const TempDir& tmp, const std::string& args) {
    static int counter = 0;
    const fs::path out_file = tmp.path / ("cli_out_" + std::to_string(counter) + ".txt");
    const fs::path err_file = tmp.path / ("cli_err_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = std::string(KINFACE_CLI_PATH) + " " + args + " > " +
                            out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

CodecDescriptor tiny_codec(std::uint64_t seed = 71) {
    CodecDescriptor desc;
    desc.type = "toy";
    desc.seed = seed;
    desc.working_resolution = 8;
    desc.output_resolution = 8;
    return desc;
}

fs::path write_config(const TempDir& tmp, const fs::path& manifest, std::uint64_t seed,
                      double p_apply, const std::string& mode, std::size_t epochs = 3,
                      double lr = 1e-3, std::size_t batch_size = 4) {
    nlohmann::json j;
    j["seed"] = seed;
    j["manifest"] = manifest.string();
    j["train"] = {{"batch_size", batch_size},
                  {"lr", lr},
                  {"epochs", epochs},
                  {"train_fraction", 0.75},
                  {"loss_space", "latent"},
                  {"use_segmentation", false}};
    j["augment"] = {{"p_apply", p_apply}, {"mode", mode}};
    j["codec"] = {{"type", "toy"},
                  {"seed", 71},
                  {"working_resolution", 8},
                  {"output_resolution", 8}};
    static int counter = 0;
    const fs::path file = tmp.path / ("config_" + std::to_string(counter++) + ".json");
    std::ofstream out(file);
    out << j.dump(2) << "\n";
    return file;
}

std::map<std::string, std::string> tree_digest(const fs::path& root) {
    std::map<std::string, std::string> digest;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            digest[fs::relative(entry.path(), root).string()] = file_bytes(entry.path());
        }
    }
    return digest;
}

}  // namespace

TEST_CASE("cli: no subcommand or unknown flags exit 1") {
    TempDir tmp("cli_usage");
    REQUIRE(run_cli(tmp, "").exit_code == 1);
    REQUIRE(run_cli(tmp, "train --no-such-flag").exit_code == 1);
}

TEST_CASE("cli augment with p_apply=0 copies byte-identically and reports 0 augmented") {
    TempDir tmp("cli_augment0");
    SyntheticSpec spec;
    spec.n_families = 3;
    spec.codec = tiny_codec();
    auto ds = testutil::make_synthetic_dataset(tmp.path / "data", spec);
    const fs::path cfg = write_config(tmp, ds.manifest_path, 9, 0.0, "mixup");

    const fs::path out_dir = tmp.path / "aug";
    RunResult r = run_cli(tmp, "augment --config " + cfg.string() + " --out-dir " +
                                   out_dir.string());
    REQUIRE(r.exit_code == 0);
    REQUIRE_THAT(r.out, Catch::Matchers::ContainsSubstring("augmented: 0"));
    for (int i = 0; i < 3; ++i) {
        const std::string id = "fam" + std::to_string(i);
        for (const char* role : {"_f.png", "_m.png", "_c.png"}) {
            REQUIRE(file_bytes(out_dir / (id + role)) ==
                    file_bytes(tmp.path / "data" / (id + role)));
        }
    }
    REQUIRE(fs::exists(out_dir / "manifest.json"));
    REQUIRE(fs::exists(out_dir / "resolved_config.json"));
}

TEST_CASE("cli augment is reproducible: same seed gives identical output trees") {
    TempDir tmp("cli_augment_repro");
    SyntheticSpec spec;
    spec.n_families = 4;
    spec.codec = tiny_codec();
    auto ds = testutil::make_synthetic_dataset(tmp.path / "data", spec);
    const fs::path cfg = write_config(tmp, ds.manifest_path, 13, 1.0, "augmix");

    RunResult r1 = run_cli(tmp, "augment --config " + cfg.string() + " --out-dir " +
                                    (tmp.path / "aug1").string());
    RunResult r2 = run_cli(tmp, "augment --config " + cfg.string() + " --out-dir " +
                                    (tmp.path / "aug2").string());
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    REQUIRE_THAT(r1.out, Catch::Matchers::ContainsSubstring("augmented: 4"));
    REQUIRE(tree_digest(tmp.path / "aug1") == tree_digest(tmp.path / "aug2"));
    // augmented children are byte-identical to the originals
    for (int i = 0; i < 4; ++i) {
        const std::string name = "fam" + std::to_string(i) + "_c.png";
        REQUIRE(file_bytes(tmp.path / "aug1" / name) ==
                file_bytes(tmp.path / "data" / name));
    }
}

TEST_CASE("cli augment with a missing input exits 2 naming the path") {
    TempDir tmp("cli_augment_missing");
    SyntheticSpec spec;
    spec.n_families = 2;
    spec.codec = tiny_codec();
    auto ds = testutil::make_synthetic_dataset(tmp.path / "data", spec);
    fs::remove(tmp.path / "data" / "fam1_m.png");
    const fs::path cfg = write_config(tmp, ds.manifest_path, 9, 0.0, "none");
    RunResult r = run_cli(tmp, "augment --config " + cfg.string() + " --out-dir " +
                                   (tmp.path / "aug").string());
    REQUIRE(r.exit_code == 2);
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("fam1_m.png"));
}

TEST_CASE("cli config with unknown keys exits 1") {
    TempDir tmp("cli_badcfg");
    const fs::path cfg = tmp.path / "bad.json";
    {
        std::ofstream out(cfg);
        out << R"({"seed": 1, "tpyo": true})";
    }
    RunResult r = run_cli(tmp, "gradcheck --config " + cfg.string());
    REQUIRE(r.exit_code == 1);
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("tpyo"));
}

TEST_CASE("cli gradcheck passes with the default seed and prints the error") {
    TempDir tmp("cli_gradcheck");
    RunResult r = run_cli(tmp, "gradcheck");
    REQUIRE(r.exit_code == 0);
    REQUIRE_THAT(r.out, Catch::Matchers::ContainsSubstring("max_rel_err"));
    REQUIRE_THAT(r.out, Catch::Matchers::ContainsSubstring("PASS"));
    std::istringstream ss(r.out);
    std::string word;
    double value = 1.0;
    ss >> word >> value;
    REQUIRE(value < 1e-5);
}

TEST_CASE("cli train then eval: deterministic artifacts and a beaten baseline") {
    TempDir tmp("cli_train_eval");
    SyntheticSpec spec;
    spec.n_families = 12;
    spec.latent_rank = 4;
    spec.codec = tiny_codec();
    spec.seed = 31;
    auto ds = testutil::make_synthetic_dataset(tmp.path / "data", spec);
    const fs::path cfg = write_config(tmp, ds.manifest_path, 17, 0.0, "none",
                                      /*epochs=*/30, /*lr=*/1e-3, /*batch_size=*/8);

    const fs::path run1 = tmp.path / "run1";
    const fs::path run2 = tmp.path / "run2";
    REQUIRE(run_cli(tmp, "train --config " + cfg.string() + " --out-dir " + run1.string())
                .exit_code == 0);
    REQUIRE(run_cli(tmp, "train --config " + cfg.string() + " --out-dir " + run2.string())
                .exit_code == 0);
    // byte-identical checkpoints and metrics across reruns
    REQUIRE(file_bytes(run1 / "checkpoint.bin") == file_bytes(run2 / "checkpoint.bin"));
    REQUIRE(file_bytes(run1 / "metrics.csv") == file_bytes(run2 / "metrics.csv"));

    // rerunning from the resolved config reproduces the same checkpoint
    const fs::path run3 = tmp.path / "run3";
    REQUIRE(run_cli(tmp, "train --config " + (run1 / "resolved_config.json").string() +
                             " --out-dir " + run3.string())
                .exit_code == 0);
    REQUIRE(file_bytes(run1 / "checkpoint.bin") == file_bytes(run3 / "checkpoint.bin"));

    // eval writes reports and prints the aggregate table
    const fs::path eval_dir = tmp.path / "eval";
    RunResult ev = run_cli(tmp, "eval --config " + cfg.string() + " --checkpoint " +
                                    (run1 / "checkpoint.bin").string() + " --out-dir " +
                                    eval_dir.string() + " --split val");
    REQUIRE(ev.exit_code == 0);
    REQUIRE_THAT(ev.out, Catch::Matchers::ContainsSubstring("MSE (lat)"));
    REQUIRE(fs::exists(eval_dir / "report.csv"));
    REQUIRE(fs::exists(eval_dir / "report.json"));

    // the trained aggregate latent MSE beats the zero-predictor baseline
    DatasetManifest manifest = load_manifest(ds.manifest_path);
    auto codec = make_codec(spec.codec);
    SplitAssignment split = split_families(manifest, 17, 0.75);
    const double zero_mse =
        testutil::zero_predictor_mse_embedded(manifest, *codec, split.val);
    EvalReport report = read_report_json(eval_dir / "report.json");
    INFO("zero-predictor " << zero_mse << ", trained " << report.aggregates.mse_latent);
    REQUIRE(report.aggregates.mse_latent < zero_mse);
}

TEST_CASE("cli predict writes artifacts and refuses a mismatched digest") {
    TempDir tmp("cli_predict");
    SyntheticSpec spec;
    spec.n_families = 6;
    spec.codec = tiny_codec();
    auto ds = testutil::make_synthetic_dataset(tmp.path / "data", spec);
    const fs::path cfg = write_config(tmp, ds.manifest_path, 19, 0.0, "none", 2);

    const fs::path run = tmp.path / "run";
    REQUIRE(run_cli(tmp, "train --config " + cfg.string() + " --out-dir " + run.string())
                .exit_code == 0);

    const std::string father = (tmp.path / "data" / "fam0_f.png").string();
    const std::string mother = (tmp.path / "data" / "fam0_m.png").string();
    const fs::path pred_dir = tmp.path / "pred";
    RunResult pr = run_cli(tmp, "predict --config " + cfg.string() + " --checkpoint " +
                                    (run / "checkpoint.bin").string() + " --father " + father +
                                    " --mother " + mother + " --out-dir " + pred_dir.string());
    REQUIRE(pr.exit_code == 0);
    REQUIRE(fs::exists(pred_dir / "child.png"));
    REQUIRE(fs::exists(pred_dir / "child_latent.bin"));
    REQUIRE(fs::file_size(pred_dir / "child_latent.bin") == 8192 * sizeof(double));

    // a config with a different codec seed must be refused with both digests
    nlohmann::json j;
    {
        std::ifstream in(cfg);
        in >> j;
    }
    j["codec"]["seed"] = 72;
    const fs::path cfg2 = tmp.path / "config_other.json";
    {
        std::ofstream out(cfg2);
        out << j.dump(2);
    }
    RunResult bad = run_cli(tmp, "predict --config " + cfg2.string() + " --checkpoint " +
                                     (run / "checkpoint.bin").string() + " --father " + father +
                                     " --mother " + mother + " --out-dir " +
                                     (tmp.path / "pred2").string());
    REQUIRE(bad.exit_code == 1);
    REQUIRE_THAT(bad.err, Catch::Matchers::ContainsSubstring("digest"));
}

TEST_CASE("cli colorize renders label maps with the palette") {
    TempDir tmp("cli_colorize");
    LabelMap map(6, 6);
    SeededRng rng(23);
    for (auto& id : map.ids) id = static_cast<std::uint8_t>(rng.below(kNumFaceClasses));
    const fs::path labels = tmp.path / "face_labels.png";
    save_labelmap(map, labels);

    const fs::path out_dir = tmp.path / "colorized";
    RunResult r = run_cli(tmp, "colorize --out-dir " + out_dir.string() + " " +
                                   labels.string());
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(out_dir / "face_labels_rgb.png"));
    REQUIRE(fs::exists(out_dir / "palette.json"));

    // the rendered image decodes back to the map
    ImagePlane img = load_image(out_dir / "face_labels_rgb.png");
    DecodeResult decoded = decode_labels(img, load_palette(out_dir / "palette.json"),
                                         /*strict=*/true);
    REQUIRE(decoded.map.ids == map.ids);
}

TEST_CASE("cli eval on an empty val split exits 1") {
    TempDir tmp("cli_eval_empty");
    SyntheticSpec spec;
    spec.n_families = 2;
    spec.codec = tiny_codec();
    auto ds = testutil::make_synthetic_dataset(tmp.path / "data", spec);
    // train_fraction 0.75 of 2 -> floor 1 train, 1 val; use split=train after
    // training with fraction 1.0 to get an empty val
    nlohmann::json j;
    j["seed"] = 29;
    j["manifest"] = ds.manifest_path.string();
    j["train"] = {{"epochs", 1}, {"train_fraction", 1.0}, {"batch_size", 2}, {"lr", 1e-4}};
    j["codec"] = {{"type", "toy"},
                  {"seed", 71},
                  {"working_resolution", 8},
                  {"output_resolution", 8}};
    const fs::path cfg = tmp.path / "cfg.json";
    {
        std::ofstream out(cfg);
        out << j.dump(2);
    }
    const fs::path run = tmp.path / "run";
    REQUIRE(run_cli(tmp, "train --config " + cfg.string() + " --out-dir " + run.string())
                .exit_code == 0);
    RunResult r = run_cli(tmp, "eval --config " + cfg.string() + " --checkpoint " +
                                   (run / "checkpoint.bin").string() + " --out-dir " +
                                   (tmp.path / "eval").string() + " --split val");
    REQUIRE(r.exit_code == 1);
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("empty split"));
}
