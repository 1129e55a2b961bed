#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "advtex/config.hpp"
#include "advtex/errors.hpp"
#include "doctest.h"

using namespace advtex;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& body, const std::string& name = "cfg.toml") {
    const fs::path dir = fs::temp_directory_path() / "advtex_config_tests";
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("defaults validate and an empty file keeps them") {
    SceneConfig scene;
    RunConfig run;
    CHECK_NOTHROW(scene.validate());
    CHECK_NOTHROW(run.validate());

    auto [s2, r2] = load_config(write_config("").string());
    CHECK(s2 == scene);
    CHECK(r2 == run);
}

TEST_CASE("sections and keys populate the right fields") {
    const auto path = write_config(
        "[scene]\n"
        "object_x = 30.5  # meters\n"
        "image_width = 128\n"
        "image_height = 96\n"
        "horizon = 10\n"
        "\n"
        "[run]\n"
        "iterations = 3\n"
        "seed = 77\n"
        "[judge]\n"
        "backend = rubric\n"
        "[vlm]\n"
        "model = \"my model # not a comment\"\n");
    auto [scene, run] = load_config(path.string());
    CHECK(scene.object_x == 30.5);
    CHECK(scene.image_width == 128);
    CHECK(scene.image_height == 96);
    CHECK(scene.horizon == 10);
    CHECK(run.iterations == 3);
    CHECK(run.seed == 77);
    CHECK(run.judge.backend == "rubric");
    CHECK(run.judge.vlm.model == "my model # not a comment");
}

TEST_CASE("principal point defaults track the image size unless given") {
    auto [scene, run] = load_config(
        write_config("[scene]\nimage_width = 128\nimage_height = 96\n").string());
    (void)run;
    CHECK(scene.camera_cx == 64.0);
    CHECK(scene.camera_cy == 48.0);

    auto [scene2, run2] = load_config(
        write_config("[scene]\nimage_width = 128\nimage_height = 96\ncamera_cx = 10\n").string());
    (void)run2;
    CHECK(scene2.camera_cx == 10.0);
    CHECK(scene2.camera_cy == 48.0);
}

TEST_CASE("angles accept radian or degree spellings but not both") {
    auto [s1, r1] = load_config(write_config("[scene]\nobject_yaw_deg = 90\n").string());
    (void)r1;
    CHECK(s1.object_yaw == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));

    auto [s2, r2] = load_config(write_config("[scene]\nobject_yaw_rad = 1.25\n").string());
    (void)r2;
    CHECK(s2.object_yaw == 1.25);

    CHECK_THROWS_AS(
        load_config(write_config("[scene]\nobject_yaw_rad = 1\nobject_yaw_deg = 57\n").string()),
        ValidationError);
    CHECK_THROWS_AS(
        load_config(write_config("[scene]\nego_heading_rad = 0\nego_heading_deg = 0\n").string()),
        ValidationError);
}

TEST_CASE("malformed documents raise parse errors") {
    CHECK_THROWS_AS(load_config(write_config("[scene]\nobject_x 26\n").string()), ParseError);
    CHECK_THROWS_AS(load_config(write_config("[scene\nobject_x = 26\n").string()), ParseError);
    CHECK_THROWS_AS(load_config(write_config("[scene]\ndt = 0.1\ndt = 0.2\n").string()),
                    ParseError);
    CHECK_THROWS_AS(load_config(write_config("[scene]\ndt = abc\n").string()), ParseError);
    CHECK_THROWS_AS(load_config(write_config("[run]\nseed = -4\n").string()), ParseError);
    CHECK_THROWS_AS(load_config(write_config("[run]\niterations = 1.5\n").string()), ParseError);
    CHECK_THROWS_AS(load_config("/nonexistent/advtex.toml"), ParseError);
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        load_config(write_config("[scene]\nobject_z = 4\n").string());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("scene.object_z") != std::string::npos);
    }
}

TEST_CASE("violated invariants name the offending key") {
    try {
        load_config(write_config("[run]\nepsilon = 0\n").string());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()) == "epsilon must be > 0");
    }
    CHECK_THROWS_AS(load_config(write_config("[scene]\ndt = 0\n").string()), ValidationError);
    CHECK_THROWS_AS(load_config(write_config("[scene]\nhorizon = 0\n").string()),
                    ValidationError);
    CHECK_THROWS_AS(load_config(write_config("[judge]\nbackend = magic\n").string()),
                    ValidationError);
    CHECK_THROWS_AS(load_config(write_config("[run]\nadam_beta1 = 1\n").string()),
                    ValidationError);
    CHECK_THROWS_AS(load_config(write_config("[judge]\nconst_value = 1.5\n").string()),
                    ValidationError);
}

TEST_CASE("relative paths resolve against the config file directory") {
    const auto path = write_config("[scene]\ntexture_png = tex.png\n", "rel.toml");
    auto [scene, run] = load_config(path.string());
    (void)run;
    CHECK(scene.texture_png == (path.parent_path() / "tex.png").lexically_normal().string());

    const auto abs = write_config("[scene]\ntexture_png = /abs/tex.png\n", "abs.toml");
    auto [scene2, run2] = load_config(abs.string());
    (void)run2;
    CHECK(scene2.texture_png == "/abs/tex.png");
}

TEST_CASE("seed accepts the full uint64 range") {
    auto [scene, run] =
        load_config(write_config("[run]\nseed = 18446744073709551615\n").string());
    (void)scene;
    CHECK(run.seed == 18446744073709551615ULL);
}

TEST_CASE("save then load round-trips every field") {
    SceneConfig scene;
    scene.object_x = 19.25;
    scene.object_yaw = 2.9;
    scene.image_width = 80;
    scene.camera_cx = 41.5;
    scene.texture_png = "/tmp/ref_texture.png";
    scene.ego_heading = -0.75;
    scene.policy_gain = 12.125;

    RunConfig run;
    run.epsilon = 0.0625;
    run.seed = 1234567890123456789ULL;
    run.adam.step = 0.03125;
    run.judge.backend = "const";
    run.judge.const_value = 0.75;
    run.judge.vlm.base_url = "http://127.0.0.1:9999";
    run.judge.vlm.prompt_path = "/tmp/prompt.txt";
    run.iterations = 17;
    run.early_stop_s_floor = 0.375;

    const fs::path path = fs::temp_directory_path() / "advtex_config_tests" / "roundtrip.toml";
    fs::create_directories(path.parent_path());
    save_config(scene, run, path.string());
    auto [scene2, run2] = load_config(path.string());
    CHECK(scene2 == scene);
    CHECK(run2 == run);
}

TEST_CASE("save then load round-trips awkward doubles exactly") {
    SceneConfig scene;
    scene.object_x = 0.1;                      // not representable exactly
    scene.dt = 1.0 / 3.0;                      // repeating binary fraction
    scene.object_yaw = std::numbers::pi;       // full precision constant
    RunConfig run;
    run.epsilon = 1e-300;  // denormal-adjacent magnitude

    const fs::path path = fs::temp_directory_path() / "advtex_config_tests" / "doubles.toml";
    save_config(scene, run, path.string());
    auto [scene2, run2] = load_config(path.string());
    CHECK(scene2.object_x == scene.object_x);
    CHECK(scene2.dt == scene.dt);
    CHECK(scene2.object_yaw == scene.object_yaw);
    CHECK(run2.epsilon == run.epsilon);
}
