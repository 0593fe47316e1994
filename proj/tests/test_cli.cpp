// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "matseg/imagery.hpp"
#include "test_support.hpp"

namespace {

using matseg::testutil::TempDir;
using json = nlohmann::json;

struct Run {
    int code = -1;
    std::string out;
};

Run matseg_cli(const std::string& args, const TempDir& dir) {
    const auto out_file = dir / "stdout.txt";
    const std::string cmd = std::string(MATSEG_CLI_PATH) + " " + args + " > " + out_file.string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

void write(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

json error_of(const Run& r) { return json::parse(r.out).at("error"); }

constexpr const char* kScene = R"({
    "width": 16, "height": 16,
    "material_voronoi": {"cells": 6, "classes": 5, "seed": 2},
    "default_views": {"count": 5, "seed": 3},
    "noise": {"gaussian_sigma": 0.01}})";

TEST(Cli, UsageErrors) {
    TempDir dir;
    EXPECT_EQ(matseg_cli("", dir).code, 2);
    const auto r = matseg_cli("encode --mode nope --stack x --out y", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(error_of(r).at("type"), "usage");
}

TEST(Cli, MissingSeedIsAValidationError) {
    TempDir dir;
    write(dir / "scene.json", kScene);
    const auto r = matseg_cli("synth --spec " + (dir / "scene.json").string() + " --out " + (dir / "s").string(), dir);
    EXPECT_EQ(r.code, 5);
    EXPECT_EQ(error_of(r).at("type"), "validation");
    EXPECT_NE(error_of(r).at("message").get<std::string>().find("seed"), std::string::npos);
}

TEST(Cli, MissingFileIsAnIoError) {
    TempDir dir;
    const auto r = matseg_cli("calibrate --stack " + (dir / "absent").string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(error_of(r).at("type"), "io");
}

TEST(Cli, MalformedJsonIsAFormatError) {
    TempDir dir;
    write(dir / "scene.json", "{ not json");
    const auto r = matseg_cli("synth --seed 1 --spec " + (dir / "scene.json").string() + " --out " + (dir / "s").string(), dir);
    EXPECT_EQ(r.code, 4);
}

TEST(Cli, StepByStepMatchesEvaluation) {
    TempDir dir;
    const std::string d = dir.path().string();
    write(dir / "scene.json", kScene);
    write(dir / "train.json", R"({"network": {"conv_blocks": 1, "channels": 4, "hidden_widths": [16]},
                                  "train": {"epochs": 30}})");
    ASSERT_EQ(matseg_cli("synth --seed 4 --raw --spec " + d + "/scene.json --out " + d + "/scene", dir).code, 0);
    ASSERT_EQ(matseg_cli("calibrate --stack " + d + "/scene/stack --out " + d + "/refl", dir).code, 0);
    EXPECT_EQ(json::parse(matseg_cli("calibrate --stack " + d + "/scene/stack --out " + d + "/refl", dir).out)
                  .at("clamped_pixels"), 0);
    ASSERT_EQ(matseg_cli("encode --mode rr --stack " + d + "/refl --dict " + d + "/scene/dictionary.json --out " + d +
                             "/rr.json", dir).code, 0);
    ASSERT_EQ(matseg_cli("train --seed 5 --config " + d + "/train.json --features " + d + "/rr.json --mask " + d +
                             "/scene/truth.json --out " + d + "/model.json", dir).code, 0);
    ASSERT_EQ(matseg_cli("predict --model " + d + "/model.json --features " + d + "/rr.json --out " + d + "/p.json", dir).code, 0);
    ASSERT_EQ(matseg_cli("fuse --pred " + d + "/p.json " + d + "/p.json --out " + d + "/fused.json", dir).code, 0);
    ASSERT_EQ(matseg_cli("vote --mask " + d + "/fused.json --segments " + d + "/scene/segments.json --out " + d +
                             "/voted.json", dir).code, 0);
    const auto ev = matseg_cli("eval --pred " + d + "/voted.json --truth " + d + "/scene/truth.json", dir);
    ASSERT_EQ(ev.code, 0);
    EXPECT_GE(json::parse(ev.out).at("pix_acc").get<double>(), 0.95);

    // msma requires a seed; k beyond N is rejected.
    EXPECT_EQ(matseg_cli("encode --mode msma --k 3 --stack " + d + "/refl --out " + d + "/m.json", dir).code, 5);
    EXPECT_EQ(matseg_cli("encode --mode msma --k 9 --seed 1 --stack " + d + "/refl --out " + d + "/m.json", dir).code, 5);
    EXPECT_EQ(matseg_cli("encode --mode msma --k 3 --seed 1 --stack " + d + "/refl --out " + d + "/m.json", dir).code, 0);
    // Encoding a raw stack must be refused.
    EXPECT_EQ(matseg_cli("encode --mode mssa --stack " + d + "/scene/stack --out " + d + "/x.json", dir).code, 5);
}

TEST(Cli, PipelineReportsStageFailures) {
    TempDir dir;
    const std::string d = dir.path().string();
    write(dir / "scene.json", kScene);
    ASSERT_EQ(matseg_cli("synth --seed 4 --spec " + d + "/scene.json --out " + d + "/scene", dir).code, 0);
    write(dir / "cfg.json", R"({"stack": "scene/stack", "dict": "scene/dictionary.json",
                                "train_mask": "scene/truth.json", "truth": "scene/truth.json",
                                "segments": "scene/segments.json",
                                "options": {"mode": "msma", "k": 3, "trials": 2, "train": {"epochs": 2},
                                            "network": {"conv_blocks": 0, "hidden_widths": [8]}}})");
    const auto no_seed = matseg_cli("pipeline --config " + d + "/cfg.json", dir);
    EXPECT_EQ(no_seed.code, 1);
    EXPECT_EQ(error_of(no_seed).at("stage"), "config");

    const auto ok = matseg_cli("pipeline --seed 9 --config " + d + "/cfg.json --out " + d + "/run", dir);
    ASSERT_EQ(ok.code, 0) << ok.out;
    const auto report = json::parse(ok.out);
    EXPECT_TRUE(report.at("metrics").contains("voted"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run/final.json"));
}

}  // namespace
