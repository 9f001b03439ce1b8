#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "fernseg/features.hpp"
#include "helpers.hpp"

using namespace fernseg;
using Catch::Matchers::WithinAbs;

namespace {

PolSarImage random_image(int w, int h, std::uint64_t seed, double lift = 1e-3) {
    auto g = testutil::rng(seed);
    std::vector<HermitianMat> covs;
    covs.reserve(static_cast<size_t>(w) * h);
    for (int i = 0; i < w * h; ++i) covs.push_back(testutil::random_psd(g, 1.0, lift));
    return testutil::image_from_covs(w, h, std::move(covs));
}

std::vector<int> all_pixels(const PolSarImage& img) {
    std::vector<int> px(static_cast<size_t>(img.size()));
    std::iota(px.begin(), px.end(), 0);
    return px;
}

}  // namespace

TEST_CASE("region_anchor applies the polar offset") {
    RegionSpec east{10.0, 0.0, 3};
    CHECK(region_anchor({50, 50}, east, 100, 100) == PixelCoord{60, 50});

    RegionSpec south{10.0, 90.0, 3};
    CHECK(region_anchor({50, 50}, south, 100, 100) == PixelCoord{50, 60});
}

TEST_CASE("region_anchor clamps to the image bounds") {
    RegionSpec west{25.0, 180.0, 3};
    CHECK(region_anchor({2, 2}, west, 100, 100) == PixelCoord{0, 2});

    RegionSpec diag{200.0, 45.0, 3};
    CHECK(region_anchor({50, 50}, diag, 100, 100) == PixelCoord{99, 99});
}

TEST_CASE("region_representative with s=1 is the anchor itself") {
    auto img = random_image(8, 8, 101);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(region_representative(img, {x, y}, 1) == img.index(x, y));
}

TEST_CASE("region_representative picks the unique span maximum") {
    std::vector<HermitianMat> covs(9, HermitianMat::identity());
    covs[5] = HermitianMat::diagonal(5, 5, 5);  // (2, 1)
    auto img = testutil::image_from_covs(3, 3, covs);
    CHECK(region_representative(img, {1, 1}, 3) == 5);
}

TEST_CASE("region_representative breaks ties row-major") {
    std::vector<HermitianMat> covs(9, HermitianMat::identity());
    auto img = testutil::image_from_covs(3, 3, covs);
    CHECK(region_representative(img, {1, 1}, 3) == 0);
    CHECK(region_representative(img, {2, 2}, 3) == img.index(1, 1));
}

TEST_CASE("region_representative matches a brute-force scan") {
    auto img = random_image(11, 7, 103);
    auto g = testutil::rng(104);
    for (int trial = 0; trial < 300; ++trial) {
        PixelCoord anchor{static_cast<int>(g() % 11), static_cast<int>(g() % 7)};
        const int s = 1 + static_cast<int>(g() % 9);
        int best = -1;
        double best_span = -1.0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                if (x - anchor.x > s / 2 || anchor.x - x > (s - 1) / 2) continue;
                if (y - anchor.y > s / 2 || anchor.y - y > (s - 1) / 2) continue;
                const int i = img.index(x, y);
                if (img.span[i] > best_span) {
                    best_span = img.span[i];
                    best = i;
                }
            }
        CHECK(region_representative(img, anchor, s) == best);
    }
}

TEST_CASE("region_representative never leaves the image at corners") {
    auto img = random_image(5, 4, 105);
    for (PixelCoord anchor : {PixelCoord{0, 0}, PixelCoord{4, 0}, PixelCoord{0, 3}, PixelCoord{4, 3}})
        for (int s = 1; s <= 9; ++s) {
            const int rep = region_representative(img, anchor, s);
            CHECK(rep >= 0);
            CHECK(rep < img.size());
        }
}

TEST_CASE("project of a two-point feature on a constant image is zero") {
    auto g = testutil::rng(107);
    auto img = testutil::constant_image(16, 16, testutil::random_psd(g, 1.0, 0.01));
    BinaryFeature f;
    f.kind = FeatureKind::TwoPoint;
    f.region1 = {8.0, 30.0, 3};
    f.region2 = {5.0, 200.0, 5};
    CHECK(project(f, img, {8, 8}) == 0.0);
}

TEST_CASE("project of a one-point feature against its own value is zero") {
    auto g = testutil::rng(109);
    HermitianMat c = testutil::random_psd(g, 1.0, 0.01);
    auto img = testutil::constant_image(8, 8, c);
    BinaryFeature f;
    f.kind = FeatureKind::OnePoint;
    f.region1 = {3.0, 120.0, 3};
    f.ref_log = img.log_cov[0];
    CHECK(project(f, img, {4, 4}) == 0.0);
}

TEST_CASE("project decomposes into anchor, representative, distance") {
    auto img = random_image(20, 20, 111);
    auto g = testutil::rng(112);
    for (int trial = 0; trial < 100; ++trial) {
        BinaryFeature f;
        f.kind = FeatureKind::TwoPoint;
        f.region1 = {std::uniform_real_distribution<double>(0, 10)(g),
                     std::uniform_real_distribution<double>(0, 360)(g),
                     1 + static_cast<int>(g() % 9)};
        f.region2 = {std::uniform_real_distribution<double>(0, 10)(g),
                     std::uniform_real_distribution<double>(0, 360)(g),
                     1 + static_cast<int>(g() % 9)};
        PixelCoord center{static_cast<int>(g() % 20), static_cast<int>(g() % 20)};
        const int rep1 = region_representative(
            img, region_anchor(center, f.region1, img.width, img.height), f.region1.s);
        const int rep2 = region_representative(
            img, region_anchor(center, f.region2, img.width, img.height), f.region2.s);
        const double expected = log_euclidean_distance(img.log_cov[rep1], img.log_cov[rep2]);
        CHECK(project(f, img, center) == expected);
        CHECK(project(f, img, center) >= 0.0);
    }
}

TEST_CASE("eval_feature thresholds the projection") {
    auto img = random_image(10, 10, 113);
    BinaryFeature f;
    f.kind = FeatureKind::TwoPoint;
    f.region1 = {4.0, 10.0, 3};
    f.region2 = {6.0, 250.0, 3};

    f.delta = -1.0;
    CHECK(eval_feature(f, img, {5, 5}) == 1);

    f.delta = std::numeric_limits<double>::infinity();
    CHECK(eval_feature(f, img, {5, 5}) == 0);
}

TEST_CASE("eval_feature is monotone non-increasing in delta") {
    auto img = random_image(10, 10, 115);
    BinaryFeature f;
    f.kind = FeatureKind::TwoPoint;
    f.region1 = {3.0, 77.0, 5};
    f.region2 = {7.0, 300.0, 1};
    int prev = 1;
    for (double delta = 0.0; delta <= 4.0; delta += 0.05) {
        f.delta = delta;
        const int bit = eval_feature(f, img, {5, 5});
        CHECK(bit <= prev);
        prev = bit;
    }
}

TEST_CASE("a median threshold splits the samples roughly in half") {
    auto img = random_image(40, 40, 117);
    auto px = all_pixels(img);
    BinaryFeature f;
    f.kind = FeatureKind::TwoPoint;
    f.region1 = {5.0, 45.0, 3};
    f.region2 = {9.0, 190.0, 3};

    std::vector<double> proj;
    proj.reserve(px.size());
    for (int p : px) proj.push_back(project(f, img, img.coord(p)));
    std::vector<double> sorted = proj;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    f.delta = sorted[sorted.size() / 2];

    int ones = 0;
    for (int p : px) ones += eval_feature(f, img, img.coord(p));
    const double frac = static_cast<double>(ones) / px.size();
    CHECK(frac > 0.4);
    CHECK(frac < 0.6);
}

TEST_CASE("sample_feature is deterministic for a fixed seed") {
    auto img = random_image(20, 20, 119);
    auto px = all_pixels(img);
    auto g1 = testutil::rng(42), g2 = testutil::rng(42);
    FeatureConfig cfg;
    for (int i = 0; i < 20; ++i) {
        BinaryFeature a = sample_feature(g1, cfg, img, px);
        BinaryFeature b = sample_feature(g2, cfg, img, px);
        CHECK(a.kind == b.kind);
        CHECK(a.delta == b.delta);
        CHECK(a.region1.r == b.region1.r);
        CHECK(a.region1.alpha_deg == b.region1.alpha_deg);
        CHECK(a.region1.s == b.region1.s);
        CHECK(a.ref_log == b.ref_log);
    }
}

TEST_CASE("sample_feature draws window sizes uniformly") {
    auto img = random_image(30, 30, 121);
    auto px = all_pixels(img);
    auto g = testutil::rng(4242);
    FeatureConfig cfg;

    std::array<int, 10> hist{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        BinaryFeature f = sample_feature(g, cfg, img, px);
        REQUIRE(f.region1.s >= 1);
        REQUIRE(f.region1.s <= cfg.s_max);
        ++hist[f.region1.s];
    }
    const double expected = static_cast<double>(n) / cfg.s_max;
    double chi2 = 0.0;
    for (int s = 1; s <= cfg.s_max; ++s)
        chi2 += (hist[s] - expected) * (hist[s] - expected) / expected;
    // chi-square critical value at p = 0.01 with 8 degrees of freedom
    CHECK(chi2 < 20.09);
}

TEST_CASE("sample_feature respects degenerate geometry bounds") {
    auto img = random_image(12, 12, 123);
    auto px = all_pixels(img);
    auto g = testutil::rng(77);
    FeatureConfig cfg;
    cfg.r_max = 0.0;
    cfg.s_max = 1;
    for (int i = 0; i < 50; ++i) {
        BinaryFeature f = sample_feature(g, cfg, img, px);
        CHECK(f.region1.r == 0.0);
        CHECK(f.region1.s == 1);
        for (int p = 0; p < img.size(); ++p) {
            PixelCoord c = img.coord(p);
            CHECK(region_anchor(c, f.region1, img.width, img.height) == c);
        }
    }
}

TEST_CASE("sample_feature thresholds land between observed extremes") {
    auto img = random_image(24, 24, 125);
    auto px = all_pixels(img);
    auto g = testutil::rng(99);
    FeatureConfig cfg;
    for (int i = 0; i < 30; ++i) {
        BinaryFeature f = sample_feature(g, cfg, img, px);
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int p : px) {
            const double v = project(f, img, img.coord(p));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(f.delta >= lo);
        CHECK(f.delta <= hi);
    }
}

TEST_CASE("projections are invariant under a global unitary conjugation") {
    const int w = 14, h = 14;
    auto g = testutil::rng(127);
    auto q = testutil::random_unitary(g);
    std::vector<HermitianMat> covs, rotated;
    for (int i = 0; i < w * h; ++i) {
        covs.push_back(testutil::random_psd(g, 1.0, 1e-3));
        rotated.push_back(testutil::conjugate(q, covs.back()));
    }
    auto img = testutil::image_from_covs(w, h, covs);
    auto img_rot = testutil::image_from_covs(w, h, rotated);

    auto gg = testutil::rng(128);
    for (int trial = 0; trial < 60; ++trial) {
        BinaryFeature f;
        f.kind = FeatureKind::TwoPoint;
        f.region1 = {std::uniform_real_distribution<double>(0, 8)(gg),
                     std::uniform_real_distribution<double>(0, 360)(gg),
                     1 + static_cast<int>(gg() % 5)};
        f.region2 = {std::uniform_real_distribution<double>(0, 8)(gg),
                     std::uniform_real_distribution<double>(0, 360)(gg),
                     1 + static_cast<int>(gg() % 5)};
        PixelCoord center{static_cast<int>(gg() % w), static_cast<int>(gg() % h)};
        CHECK_THAT(project(f, img, center), WithinAbs(project(f, img_rot, center), 1e-8));
    }
}
