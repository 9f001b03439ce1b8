#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "fernseg/io.hpp"
#include "fernseg/synth.hpp"
#include "helpers.hpp"

using namespace fernseg;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("fernseg_io_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void spit(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::vector<HermitianMat> random_mats(size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::vector<HermitianMat> mats(n);
    for (auto& m : mats) m = testutil::random_psd(g, 1.0, 0.1);
    return mats;
}

Scene small_scene() {
    SceneConfig sc;
    sc.width = 48;
    sc.height = 48;
    sc.signatures.resize(3);
    sc.signatures[0].sigma = HermitianMat::diagonal(0.05, 0.01, 0.04);
    sc.signatures[1].sigma = HermitianMat::diagonal(0.50, 0.10, 0.40);
    sc.signatures[2].sigma = HermitianMat::diagonal(1.30, 0.40, 1.00);
    sc.looks = 9;
    sc.layout = Layout::Stripes;
    sc.seed = 2024;
    return generate_scene(sc);
}

RandomFernsModel small_model(const Scene& scene) {
    TrainConfig tc;
    tc.num_ferns = 4;
    tc.fern_size = 3;
    tc.samples_per_class = 150;
    tc.features.r_max = 6.0;
    tc.features.s_max = 3;
    tc.seed = 31;
    return train(scene.image, scene.labels, tc);
}

}  // namespace

TEST_CASE("covariance raster header is 12 bytes with little-endian dimensions") {
    const std::string path = tmp_path("header.psc");
    write_covariance_raster(path, 3, 2, random_mats(6, 1));
    const std::string data = slurp(path);
    REQUIRE(data.size() == 12 + 6 * 9 * 8);
    CHECK(data[0] == 'P');
    CHECK(data[1] == 'S');
    CHECK(data[2] == 'C');
    CHECK(data[3] == '1');
    const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());
    CHECK(p[4] == 3);
    CHECK(p[5] == 0);
    CHECK(p[6] == 0);
    CHECK(p[7] == 0);
    CHECK(p[8] == 2);
    CHECK(p[9] == 0);
}

TEST_CASE("a one-pixel float64 covariance raster is exactly 84 bytes") {
    const std::string path = tmp_path("one.psc");
    write_covariance_raster(path, 1, 1, random_mats(1, 2));
    CHECK(slurp(path).size() == 84);
}

TEST_CASE("float64 covariance raster round-trips exactly") {
    const std::string path = tmp_path("rt64.psc");
    auto mats = random_mats(20, 3);
    write_covariance_raster(path, 5, 4, mats);
    CovarianceRaster r = read_covariance_raster(path);
    REQUIRE(r.width == 5);
    REQUIRE(r.height == 4);
    REQUIRE(r.cov.size() == 20);
    for (size_t i = 0; i < mats.size(); ++i) CHECK(r.cov[i] == mats[i]);
}

TEST_CASE("float32 covariance raster rounds each component to float") {
    const std::string path = tmp_path("rt32.psc");
    auto mats = random_mats(6, 4);
    write_covariance_raster(path, 3, 2, mats, RasterPrecision::F32);
    const std::string data = slurp(path);
    CHECK(data[3] == '2');
    CHECK(data.size() == 12 + 6 * 9 * 4);
    CovarianceRaster r = read_covariance_raster(path);
    for (size_t i = 0; i < mats.size(); ++i) {
        const auto want = mats[i].components();
        const auto got = r.cov[i].components();
        for (int k = 0; k < 9; ++k)
            CHECK(got[k] == static_cast<double>(static_cast<float>(want[k])));
    }
}

TEST_CASE("covariance raster rejects bad magic and precision bytes") {
    const std::string path = tmp_path("bad.psc");
    spit(path, "XYZ1" + std::string(8, '\0'));
    CHECK_THROWS_WITH(read_covariance_raster(path),
                      Catch::Matchers::ContainsSubstring("magic"));
    spit(path, std::string("PSC9") + std::string(8, '\0'));
    CHECK_THROWS_WITH(read_covariance_raster(path),
                      Catch::Matchers::ContainsSubstring("precision"));
}

TEST_CASE("covariance raster truncation error names both byte counts") {
    const std::string path = tmp_path("trunc.psc");
    write_covariance_raster(path, 2, 2, random_mats(4, 5));
    const std::string data = slurp(path);
    spit(path, data.substr(0, data.size() - 10));
    CHECK_THROWS_WITH(read_covariance_raster(path),
                      Catch::Matchers::ContainsSubstring("288") &&
                          Catch::Matchers::ContainsSubstring("278"));
    spit(path, data + "xx");
    CHECK_THROWS_AS(read_covariance_raster(path), std::runtime_error);
}

TEST_CASE("write_covariance_raster validates its arguments") {
    auto mats = random_mats(4, 6);
    CHECK_THROWS_AS(write_covariance_raster(tmp_path("bad1.psc"), 0, 4, mats),
                    std::invalid_argument);
    CHECK_THROWS_AS(write_covariance_raster(tmp_path("bad2.psc"), 3, 2, mats),
                    std::invalid_argument);
    CHECK_THROWS_AS(read_covariance_raster(tmp_path("does_not_exist.psc")),
                    std::runtime_error);
}

TEST_CASE("label map PGM writes the canonical P5 header") {
    LabelMap lm = LabelMap::zeros(3, 2, 5);
    for (int i = 0; i < 6; ++i) lm.labels[i] = static_cast<std::uint8_t>(i % 6);
    const std::string path = tmp_path("labels.pgm");
    write_label_map(path, lm);
    const std::string data = slurp(path);
    REQUIRE(data.size() == 11 + 6);
    CHECK(data.substr(0, 11) == "P5\n3 2\n255\n");
    CHECK(static_cast<unsigned char>(data[11]) == 0);
    CHECK(static_cast<unsigned char>(data[16]) == 5);
}

TEST_CASE("label map round-trips through PGM") {
    LabelMap lm = LabelMap::zeros(7, 5, 4);
    std::mt19937_64 g(9);
    std::uniform_int_distribution<int> lab(0, 4);
    for (auto& v : lm.labels) v = static_cast<std::uint8_t>(lab(g));
    const std::string path = tmp_path("rt.pgm");
    write_label_map(path, lm);
    LabelMap back = read_label_map(path, 4);
    CHECK(back.width == 7);
    CHECK(back.height == 5);
    CHECK(back.num_classes == 4);
    CHECK(back.labels == lm.labels);
}

TEST_CASE("label map reader accepts comments and rejects wrong maxval") {
    const std::string path = tmp_path("comment.pgm");
    spit(path, "P5\n# a comment\n2 1\n255\n\x01\x02");
    LabelMap lm = read_label_map(path, 3);
    CHECK(lm.labels[0] == 1);
    CHECK(lm.labels[1] == 2);

    spit(path, "P5\n2 1\n65535\n\x01\x02");
    CHECK_THROWS_WITH(read_label_map(path, 3),
                      Catch::Matchers::ContainsSubstring("maxval"));
}

TEST_CASE("label map reader rejects labels above the class count") {
    const std::string path = tmp_path("overflow.pgm");
    spit(path, std::string("P5\n2 2\n255\n") + '\x01' + '\x03' + '\x02' + '\x00');
    CHECK_THROWS_WITH(read_label_map(path, 2),
                      Catch::Matchers::ContainsSubstring("(1, 0)") &&
                          Catch::Matchers::ContainsSubstring("3"));
}

TEST_CASE("label map reader reports truncation") {
    const std::string path = tmp_path("short.pgm");
    spit(path, "P5\n4 4\n255\nabc");
    CHECK_THROWS_WITH(read_label_map(path, 5),
                      Catch::Matchers::ContainsSubstring("16") &&
                          Catch::Matchers::ContainsSubstring("3"));
}

TEST_CASE("posterior raster round-trips exactly") {
    const std::string path = tmp_path("post.psp");
    std::mt19937_64 g(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> vals(4 * 3 * 5);
    for (auto& v : vals) v = u(g);
    write_posterior_raster(path, 4, 3, 5, vals);
    const std::string data = slurp(path);
    CHECK(data.substr(0, 4) == "PSP1");
    CHECK(data.size() == 16 + vals.size() * 8);
    PosteriorRaster r = read_posterior_raster(path);
    CHECK(r.width == 4);
    CHECK(r.height == 3);
    CHECK(r.num_classes == 5);
    CHECK(r.values == vals);
}

TEST_CASE("posterior raster rejects bad magic and truncation") {
    const std::string path = tmp_path("post_bad.psp");
    spit(path, "PSQ1" + std::string(12, '\0'));
    CHECK_THROWS_WITH(read_posterior_raster(path),
                      Catch::Matchers::ContainsSubstring("magic"));
    std::vector<double> vals(6, 0.5);
    write_posterior_raster(path, 2, 1, 3, vals);
    const std::string data = slurp(path);
    spit(path, data.substr(0, data.size() - 4));
    CHECK_THROWS_WITH(read_posterior_raster(path),
                      Catch::Matchers::ContainsSubstring("48") &&
                          Catch::Matchers::ContainsSubstring("44"));
}

TEST_CASE("model save/load round-trips bit for bit") {
    Scene scene = small_scene();
    RandomFernsModel model = small_model(scene);
    const std::string path = tmp_path("model.txt");
    save_model(path, model);
    RandomFernsModel back = load_model(path);
    REQUIRE(back == model);

    Classification a = classify_image(model, scene.image);
    Classification b = classify_image(back, scene.image);
    CHECK(a.labels.labels == b.labels.labels);
    CHECK(a.posteriors == b.posteriors);  // exact double equality
}

TEST_CASE("saving a loaded model reproduces the same bytes") {
    Scene scene = small_scene();
    RandomFernsModel model = small_model(scene);
    const std::string p1 = tmp_path("model_a.txt");
    const std::string p2 = tmp_path("model_b.txt");
    save_model(p1, model);
    save_model(p2, load_model(p1));
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("model loader rejects a tampered version line") {
    Scene scene = small_scene();
    const std::string path = tmp_path("model_ver.txt");
    save_model(path, small_model(scene));
    std::string data = slurp(path);
    data.replace(0, std::string("fernseg model 1").size(), "fernseg model 2");
    spit(path, data);
    CHECK_THROWS_WITH(load_model(path),
                      Catch::Matchers::ContainsSubstring("unsupported model version"));
}

TEST_CASE("model loader reports the offending line number") {
    Scene scene = small_scene();
    const std::string path = tmp_path("model_bad.txt");
    save_model(path, small_model(scene));
    std::string data = slurp(path);

    SECTION("wrong key") {
        const size_t at = data.find("smoothing_u");
        REQUIRE(at != std::string::npos);
        data.replace(at, 11, "smoothing_v");
        spit(path, data);
        CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring(":3:"));
    }

    SECTION("non-numeric value") {
        const size_t at = data.find("classes ");
        data.replace(at + 8, 1, "x");
        spit(path, data);
        CHECK_THROWS_WITH(load_model(path),
                          Catch::Matchers::ContainsSubstring(":2:") &&
                              Catch::Matchers::ContainsSubstring("class count"));
    }

    SECTION("trailing data on a counts line") {
        const size_t at = data.find("\ncounts ");
        const size_t eol = data.find('\n', at + 1);
        data.insert(eol, " 7");
        spit(path, data);
        CHECK_THROWS_WITH(load_model(path),
                          Catch::Matchers::ContainsSubstring("trailing data after counts"));
    }

    SECTION("truncated file") {
        const size_t at = data.find("\nfern 1");
        spit(path, data.substr(0, at + 1));
        CHECK_THROWS_WITH(load_model(path),
                          Catch::Matchers::ContainsSubstring("unexpected end of file"));
    }
}

TEST_CASE("report writers emit one row per entry") {
    LabelMap pred = LabelMap::zeros(4, 4, 3);
    LabelMap ref = LabelMap::zeros(4, 4, 3);
    std::mt19937_64 g(5);
    std::uniform_int_distribution<int> lab(1, 3);
    for (int i = 0; i < 16; ++i) {
        pred.labels[i] = static_cast<std::uint8_t>(lab(g));
        ref.labels[i] = static_cast<std::uint8_t>(lab(g));
    }
    ConfusionMatrix cm = confusion(pred, ref);
    MetricsReport rep = metrics(cm);
    const std::string mpath = tmp_path("metrics.txt");
    write_metrics_report(mpath, rep, cm);
    const std::string mdata = slurp(mpath);
    CHECK(mdata.find("overall_accuracy ") == 0);
    CHECK(mdata.find("kappa ") != std::string::npos);
    CHECK(mdata.find("confusion_row ") != std::string::npos);

    std::vector<double> hist{0.5, 0.25, 0.25};
    const std::string epath = tmp_path("entropy.csv");
    write_entropy_csv(epath, hist);
    const std::string edata = slurp(epath);
    CHECK(std::count(edata.begin(), edata.end(), '\n') == 4);
    CHECK(edata.find("bin_low,bin_high,fraction\n") == 0);

    std::vector<CalibrationBin> curve(4);
    curve[1].mean_confidence = 0.6;
    curve[1].accuracy = 0.5;
    curve[1].count = 10;
    const std::string cpath = tmp_path("calibration.csv");
    write_calibration_csv(cpath, curve, 4);
    const std::string cdata = slurp(cpath);
    CHECK(std::count(cdata.begin(), cdata.end(), '\n') == 5);

    std::vector<IterationRecord> trace(2);
    trace[0] = {1, MutationKind::AddFern, true, 0.8, 0.7, 12, 3};
    trace[1] = {2, MutationKind::ResampleThreshold, false, 0.8, 0.7, 12, 3};
    const std::string tpath = tmp_path("trace.csv");
    write_trace_csv(tpath, trace);
    const std::string tdata = slurp(tpath);
    CHECK(tdata.find("1,add_fern,1,") != std::string::npos);
    CHECK(tdata.find("2,resample_threshold,0,") != std::string::npos);
}
