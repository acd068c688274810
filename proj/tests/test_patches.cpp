#include "support.hpp"

#include "hetss/error.hpp"
#include "hetss/patches.hpp"

#include <doctest.h>

using namespace hetss;

TEST_CASE("patch counts follow sliding-window arithmetic") {
    CHECK(patch_count(64, 8, 4) == 15);
    CHECK(patch_count(8, 8, 4) == 1);
    CHECK(patch_count(8, 4, 4) == 2);
    CHECK(patch_count(10, 4, 3) == 3);
}

TEST_CASE("patch values are the source pixels") {
    std::mt19937_64 rng(7);
    const Image img = testutil::random_image(rng, 12, 16, 2);
    const PatchGrid g = extract_patches(img, 4, 4);
    REQUIRE(g.count() == 12);
    for (int i = 0; i < g.count(); ++i) {
        const auto v = g.patch_values(i);
        for (int dy = 0; dy < 4; ++dy) {
            for (int dx = 0; dx < 4; ++dx) {
                for (int c = 0; c < 2; ++c) {
                    CHECK(v[static_cast<std::size_t>((dy * 4 + dx) * 2 + c)] ==
                          img.at(g.origin_y(i) + dy, g.origin_x(i) + dx, c));
                }
            }
        }
    }
}

TEST_CASE("coverage matches a brute-force count") {
    const PatchGrid g = extract_patches(Image(13, 11, 1), 5, 2);
    const auto cov = g.coverage();
    for (int y = 0; y < 13; ++y) {
        for (int x = 0; x < 11; ++x) {
            int n = 0;
            for (int i = 0; i < g.count(); ++i) {
                n += (y >= g.origin_y(i) && y < g.origin_y(i) + 5 && x >= g.origin_x(i) && x < g.origin_x(i) + 5) ? 1 : 0;
            }
            CHECK(cov[static_cast<std::size_t>(y * 11 + x)] == n);
        }
    }
}

TEST_CASE("overlap-average reassembly inverts extraction on covered pixels") {
    std::mt19937_64 rng(8);
    const Image img = testutil::random_image(rng, 16, 16, 3);
    for (int stride : {1, 2, 4, 8}) {
        const Image back = reassemble_patches(extract_patches(img, 8, stride));
        REQUIRE(back.same_shape(img));
        for (std::size_t i = 0; i < img.size(); ++i) {
            CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("reassembly averages conflicting overlaps") {
    PatchGrid g = extract_patches(Image(4, 6, 1), 4, 2).geometry();
    REQUIRE(g.count() == 2);
    std::vector<float> vals(32, 0.0f);
    std::fill(vals.begin() + 16, vals.end(), 1.0f);
    const Image out = reassemble_patches(g, vals);
    CHECK(out.at(0, 0) == 0.0f);
    CHECK(out.at(0, 2) == doctest::Approx(0.5));
    CHECK(out.at(3, 5) == 1.0f);
}

TEST_CASE("extraction rejects bad geometry") {
    CHECK_THROWS_AS(extract_patches(Image(4, 4, 1), 8, 4), ValidationError);
    CHECK_THROWS_AS(extract_patches(Image(8, 8, 1), 4, 0), ValidationError);
    CHECK_THROWS_AS(reassemble_patches(extract_patches(Image(8, 8, 1), 4, 4).geometry(), std::vector<float>(3)),
                    ValidationError);
}
