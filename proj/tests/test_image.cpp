#include "support.hpp"

#include "hetss/error.hpp"
#include "hetss/image.hpp"
#include "hetss/synth.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>

using namespace hetss;

TEST_CASE("hsif round trip is bit exact") {
    std::mt19937_64 rng(1);
    const Image img = testutil::random_image(rng, 5, 7, 3);
    const auto bytes = encode_hsif(img);
    CHECK(bytes.size() == 16 + 5 * 7 * 3 * 4);
    CHECK(std::memcmp(bytes.data(), "HSIF", 4) == 0);
    CHECK(decode_hsif(bytes) == img);
}

TEST_CASE("hsif decoding rejects malformed input with an offset") {
    std::mt19937_64 rng(2);
    auto bytes = encode_hsif(testutil::random_image(rng, 2, 2, 1));

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_hsif(bad), FormatError);
    try {
        decode_hsif(bad);
    } catch (const FormatError& e) {
        CHECK(e.offset() == 0);
    }

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_hsif(truncated), FormatError);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_hsif(trailing), FormatError);

    auto out_of_range = bytes;
    const float big = 1.5f;
    std::memcpy(out_of_range.data() + 16, &big, 4);
    try {
        decode_hsif(out_of_range);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 16);
    }
}

TEST_CASE("scene files round trip through a directory") {
    const auto dir = std::filesystem::temp_directory_path() / "hetss_test_scene_io";
    std::filesystem::remove_all(dir);
    const ScenePair s = synth_scene(3, 32);
    write_scene(dir, s);
    const ScenePair back = read_scene(dir);
    CHECK(back.pan == s.pan);
    CHECK(back.lrms == s.lrms);
    REQUIRE(back.gt);
    CHECK(*back.gt == *s.gt);
    std::filesystem::remove_all(dir);
}

TEST_CASE("scene validation checks the scale relation") {
    ScenePair s;
    s.pan = Image(16, 16, 1);
    s.lrms = Image(4, 4, 4);
    CHECK_NOTHROW(s.validate());
    s.lrms = Image(5, 4, 4);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.lrms = Image(4, 4, 3);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.lrms = Image(4, 4, 4);
    s.gt = Image(16, 16, 3);
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("8-bit previews quantize to the nearest level") {
    const auto dir = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(4);
    const Image img = testutil::random_image(rng, 4, 6, 4);
    write_ppm(dir / "hetss_test.ppm", img, 2, 1, 0);
    const Image back = read_pnm(dir / "hetss_test.ppm");
    REQUIRE(back.channels() == 3);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) {
            CHECK(std::abs(back.at(y, x, 0) - img.at(y, x, 2)) <= 0.5f / 255.0f + 1e-6f);
            CHECK(std::abs(back.at(y, x, 2) - img.at(y, x, 0)) <= 0.5f / 255.0f + 1e-6f);
        }
    }
    write_pgm(dir / "hetss_test.pgm", img.channel(3));
    CHECK(read_pnm(dir / "hetss_test.pgm").channels() == 1);
}

TEST_CASE("synthetic scenes are deterministic and sized by the scale") {
    const ScenePair a = synth_scene(7, 64);
    const ScenePair b = synth_scene(7, 64);
    CHECK(a.pan == b.pan);
    CHECK(a.lrms == b.lrms);
    CHECK(a.gt->height() == 64);
    CHECK(a.gt->channels() == 4);
    CHECK(a.lrms.height() == 16);
    CHECK(a.lrms.width() == 16);
    CHECK_FALSE(synth_scene(8, 64).pan == a.pan);

    const Image mean = band_mean(*a.gt);
    for (int y = 0; y < 64; y += 9) {
        for (int x = 0; x < 64; x += 7) {
            double s = 0.0;
            for (int c = 0; c < 4; ++c) {
                s += a.gt->at(y, x, c);
            }
            CHECK(mean.at(y, x) == doctest::Approx(s / 4.0).epsilon(1e-6));
        }
    }

    const ScenePair toy = toy_scene(0);
    CHECK(toy.pan.height() == 4);
    CHECK(toy.pan.width() == 8);
    CHECK(toy.lrms.height() == 1);
    CHECK(toy.lrms.width() == 2);
}
