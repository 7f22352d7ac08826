#include <doctest.h>

#include <cmath>
#include <fstream>

#include "adaco/scene.hpp"
#include "helpers.hpp"

using namespace adaco;
using testing::TempDir;

namespace {

std::vector<uint8_t> slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("transform_points basics")
{
    const std::vector<Vec3> pts = {{1, 0, 0}, {0, 0, 0}, {1, 2, 3}};

    SUBCASE("identity leaves points unchanged")
    {
        const auto out = transform_points(pts, Mat4::identity());
        for (size_t i = 0; i < pts.size(); ++i) {
            CHECK(out[i].x == pts[i].x);
            CHECK(out[i].y == pts[i].y);
            CHECK(out[i].z == pts[i].z);
        }
    }

    SUBCASE("pure translation moves the origin")
    {
        const auto out = transform_points({{0, 0, 0}}, Mat4::translation({1, 2, 3}));
        CHECK(out[0].x == doctest::Approx(1.0));
        CHECK(out[0].y == doctest::Approx(2.0));
        CHECK(out[0].z == doctest::Approx(3.0));
    }

    SUBCASE("90 degree z-rotation of (1,0,0) gives (0,1,0)")
    {
        const auto out = transform_points({{1, 0, 0}}, Mat4::rotation_z(M_PI / 2));
        CHECK(std::abs(out[0].x - 0.0) < 1e-9);
        CHECK(std::abs(out[0].y - 1.0) < 1e-9);
        CHECK(std::abs(out[0].z - 0.0) < 1e-9);
    }

    SUBCASE("non-finite coordinates are rejected")
    {
        CHECK_THROWS_AS(transform_points({{std::nan(""), 0, 0}}, Mat4::identity()), Error);
    }

    SUBCASE("non-rigid transform is rejected")
    {
        Mat4 scaled;
        scaled.at(0, 0) = 2.0;
        CHECK_THROWS_AS(transform_points(pts, scaled), Error);
    }
}

TEST_CASE("transform round-trip through the inverse is the identity")
{
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat4 t = Mat4::rotation_axis({rng.uniform(-1, 1), rng.uniform(-1, 1),
                                            rng.uniform(-1, 1) + 1.5},
                                           rng.uniform(-3, 3)) *
                       Mat4::translation({rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)});
        std::vector<Vec3> pts;
        for (int i = 0; i < 16; ++i)
            pts.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)});
        const auto back = transform_points(transform_points(pts, t), t.rigid_inverse());
        for (size_t i = 0; i < pts.size(); ++i) {
            CHECK(std::abs(back[i].x - pts[i].x) < 1e-9);
            CHECK(std::abs(back[i].y - pts[i].y) < 1e-9);
            CHECK(std::abs(back[i].z - pts[i].z) < 1e-9);
        }
    }
}

TEST_CASE("scene io round-trips")
{
    TempDir tmp("scene");

    SUBCASE("minimal valid scene")
    {
        SampleScene scene;
        scene.id = "mini";
        scene.classes = testing::small_vocab(3);
        scene.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        scene.noisy_labels = {0, 1, 2};
        write_scene(scene, tmp.path() / "mini");
        const SampleScene loaded = read_scene(tmp.path() / "mini");
        CHECK(loaded.point_count() == 3);
        CHECK(loaded.noisy_labels == LabelArray{0, 1, 2});
        CHECK(loaded.id == "mini");
        CHECK_FALSE(loaded.clean_labels.has_value());
    }

    SUBCASE("re-serialization is byte-identical")
    {
        const SampleScene scene = testing::random_scene(3, 200, 4);
        write_scene(scene, tmp.path() / "a");
        const SampleScene loaded = read_scene(tmp.path() / "a");
        write_scene(loaded, tmp.path() / "b");
        for (const char* name : {"points.bin", "noisy.labels", "clean.labels", "meta.json"})
            CHECK(slurp(tmp.path() / "a" / name) == slurp(tmp.path() / "b" / name));
    }

    SUBCASE("round-trip is the identity on random scenes")
    {
        for (uint64_t seed = 0; seed < 10; ++seed) {
            const SampleScene scene = testing::random_scene(seed, 50 + seed * 13, 5);
            write_scene(scene, tmp.path() / "rt");
            const SampleScene loaded = read_scene(tmp.path() / "rt");
            REQUIRE(loaded.point_count() == scene.point_count());
            for (size_t i = 0; i < scene.point_count(); ++i) {
                CHECK(loaded.points[i].x == scene.points[i].x);
                CHECK(loaded.points[i].y == scene.points[i].y);
                CHECK(loaded.points[i].z == scene.points[i].z);
            }
            CHECK(loaded.noisy_labels == scene.noisy_labels);
            CHECK(*loaded.clean_labels == *scene.clean_labels);
        }
    }

    SUBCASE("empty scene writes a zero-byte points file")
    {
        SampleScene scene;
        scene.id = "empty";
        scene.classes = testing::small_vocab(2);
        write_scene(scene, tmp.path() / "empty");
        CHECK(std::filesystem::file_size(tmp.path() / "empty" / "points.bin") == 0);
        CHECK(read_scene(tmp.path() / "empty").point_count() == 0);
    }

    SUBCASE("out-of-range label is a distinct error")
    {
        SampleScene scene;
        scene.id = "bad";
        scene.classes = testing::small_vocab(3);
        scene.points = {{0, 0, 0}};
        scene.noisy_labels = {1};
        write_scene(scene, tmp.path() / "bad");
        write_labels({3}, tmp.path() / "bad" / "noisy.labels");  // K == 3
        try {
            read_scene(tmp.path() / "bad");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::label_out_of_range);
        }
    }

    SUBCASE("truncated points file is malformed")
    {
        SampleScene scene;
        scene.id = "trunc";
        scene.classes = testing::small_vocab(2);
        scene.points = {{0, 0, 0}};
        scene.noisy_labels = {0};
        write_scene(scene, tmp.path() / "trunc");
        std::ofstream(tmp.path() / "trunc" / "points.bin", std::ios::binary | std::ios::trunc)
            << "abc";
        try {
            read_scene(tmp.path() / "trunc");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::malformed_file);
        }
    }

    SUBCASE("label length mismatch is detected")
    {
        SampleScene scene;
        scene.id = "short";
        scene.classes = testing::small_vocab(2);
        scene.points = {{0, 0, 0}, {1, 1, 1}};
        scene.noisy_labels = {0, 1};
        write_scene(scene, tmp.path() / "short");
        write_labels({0}, tmp.path() / "short" / "noisy.labels");
        try {
            read_scene(tmp.path() / "short");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::length_mismatch);
        }
    }

    SUBCASE("crop option drops points outside the box")
    {
        SampleScene scene;
        scene.id = "crop";
        scene.classes = testing::small_vocab(2);
        scene.points = {{0, 0, 0}, {100, 0, 0}, {1, 1, 1}};
        scene.noisy_labels = {0, 1, 1};
        scene.clean_labels = LabelArray{0, 1, 0};
        write_scene(scene, tmp.path() / "crop");
        ReadOptions opts;
        opts.crop = {{-50, -50, -4}, {50, 50, 2}};
        const SampleScene loaded = read_scene(tmp.path() / "crop", opts);
        CHECK(loaded.point_count() == 2);
        CHECK(loaded.noisy_labels == LabelArray{0, 1});
        CHECK(*loaded.clean_labels == LabelArray{0, 0});
    }
}

TEST_CASE("label map io round-trips")
{
    TempDir tmp("map");
    LabelMap2D map;
    map.width = 4;
    map.height = 3;
    map.labels.assign(12, 0);
    map.labels[5] = 2;
    map.labels[11] = kUnlabeledId;
    map.camera.fx = 100;
    map.camera.fy = 110;
    map.camera.cx = 2;
    map.camera.cy = 1.5;
    map.camera.extrinsic = Mat4::translation({0, 0, 1});

    write_label_map(map, tmp.path() / "v.map2d", tmp.path() / "v.camera.json");
    const LabelMap2D loaded = read_label_map(tmp.path() / "v.map2d", tmp.path() / "v.camera.json");
    CHECK(loaded.width == 4);
    CHECK(loaded.height == 3);
    CHECK(loaded.labels == map.labels);
    CHECK(loaded.camera.fx == doctest::Approx(100));
    CHECK(loaded.camera.cy == doctest::Approx(1.5));
    CHECK(loaded.at(1, 1) == 2);
}

TEST_CASE("vocabulary invariants")
{
    ClassVocabulary v;
    v.names = {"a"};
    CHECK_THROWS_AS(v.validate(), Error);
    v.names = {"a", "a"};
    CHECK_THROWS_AS(v.validate(), Error);
    v.names = {"a", "b"};
    CHECK_NOTHROW(v.validate());
    CHECK(v.index_of("b") == uint16_t{1});
    CHECK_FALSE(v.index_of("c").has_value());
}
