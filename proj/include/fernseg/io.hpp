#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fernseg/eval.hpp"
#include "fernseg/ferns.hpp"
#include "fernseg/optimize.hpp"

namespace fernseg {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
    return v;
}

inline double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
    return std::bit_cast<double>(v);
}

inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// covariance raster: "PSC" + precision byte + u32 width + u32 height, then
// 9 little-endian values per pixel (C11 C22 C33, Re/Im C12, Re/Im C13,
// Re/Im C23). Precision '1' stores float64, '2' float32.
// ---------------------------------------------------------------------------

enum class RasterPrecision : char { F64 = '1', F32 = '2' };

struct CovarianceRaster {
    int width = 0;
    int height = 0;
    std::vector<HermitianMat> cov;
};

inline void write_covariance_raster(const std::string& path, int width, int height,
                                    std::span<const HermitianMat> cov,
                                    RasterPrecision precision = RasterPrecision::F64) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("covariance raster: dimensions must be positive");
    if (cov.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw std::invalid_argument("covariance raster: pixel count does not match dimensions");
    std::string out;
    const size_t value_bytes = precision == RasterPrecision::F64 ? 8 : 4;
    out.reserve(12 + cov.size() * 9 * value_bytes);
    out += "PSC";
    out.push_back(static_cast<char>(precision));
    detail::put_u32(out, static_cast<std::uint32_t>(width));
    detail::put_u32(out, static_cast<std::uint32_t>(height));
    for (const HermitianMat& m : cov)
        for (double v : m.components()) {
            if (precision == RasterPrecision::F64)
                detail::put_f64(out, v);
            else
                detail::put_f32(out, static_cast<float>(v));
        }
    detail::write_file(path, out);
}

inline CovarianceRaster read_covariance_raster(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 12 || data.compare(0, 3, "PSC") != 0)
        throw std::runtime_error(path + ": not a covariance raster (bad magic)");
    const char prec = data[3];
    if (prec != '1' && prec != '2')
        throw std::runtime_error(path + ": unknown precision byte in covariance raster");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    const std::uint64_t w = detail::get_u32(p + 4);
    const std::uint64_t h = detail::get_u32(p + 8);
    if (w == 0 || h == 0)
        throw std::runtime_error(path + ": covariance raster has zero dimension");
    const std::uint64_t pixels = w * h;
    const std::uint64_t value_bytes = prec == '1' ? 8 : 4;
    if (pixels > (SIZE_MAX - 12) / (9 * value_bytes))
        throw std::runtime_error(path + ": covariance raster dimensions overflow");
    const std::uint64_t expect = pixels * 9 * value_bytes;
    const std::uint64_t have = data.size() - 12;
    if (have != expect)
        throw std::runtime_error(path + ": covariance raster truncated or padded: expected " +
                                 std::to_string(expect) + " payload bytes, found " +
                                 std::to_string(have));
    CovarianceRaster raster;
    raster.width = static_cast<int>(w);
    raster.height = static_cast<int>(h);
    raster.cov.resize(pixels);
    const unsigned char* q = p + 12;
    std::array<double, 9> c;
    for (std::uint64_t i = 0; i < pixels; ++i) {
        for (int k = 0; k < 9; ++k) {
            if (prec == '1') {
                c[k] = detail::get_f64(q);
                q += 8;
            } else {
                c[k] = static_cast<double>(detail::get_f32(q));
                q += 4;
            }
        }
        raster.cov[i] = HermitianMat::from_components(c);
    }
    return raster;
}

// ---------------------------------------------------------------------------
// label maps: binary PGM (P5, maxval 255). Label 0 means unlabeled.
// ---------------------------------------------------------------------------

inline void write_label_map(const std::string& path, const LabelMap& lm) {
    std::string out = "P5\n" + std::to_string(lm.width) + " " + std::to_string(lm.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(lm.labels.data()), lm.labels.size());
    detail::write_file(path, out);
}

namespace detail {

/// Next whitespace-delimited PGM header token; '#' starts a comment that runs
/// to end of line.
inline std::string pgm_token(const std::string& data, size_t& pos) {
    while (pos < data.size()) {
        if (std::isspace(static_cast<unsigned char>(data[pos]))) {
            ++pos;
        } else if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    const size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
}

}  // namespace detail

inline LabelMap read_label_map(const std::string& path, int num_classes) {
    const std::string data = detail::read_file(path);
    size_t pos = 0;
    if (detail::pgm_token(data, pos) != "P5")
        throw std::runtime_error(path + ": not a binary PGM (expected P5)");
    const std::string ws = detail::pgm_token(data, pos);
    const std::string hs = detail::pgm_token(data, pos);
    const std::string ms = detail::pgm_token(data, pos);
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        maxval = std::stoi(ms);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0) throw std::runtime_error(path + ": PGM has zero dimension");
    if (maxval != 255)
        throw std::runtime_error(path + ": label map must have maxval 255, found " + ms);
    ++pos;  // single whitespace byte after maxval
    const size_t pixels = static_cast<size_t>(w) * h;
    if (data.size() - pos != pixels)
        throw std::runtime_error(path + ": PGM truncated or padded: expected " +
                                 std::to_string(pixels) + " pixel bytes, found " +
                                 std::to_string(data.size() - pos));
    LabelMap lm = LabelMap::zeros(w, h, num_classes);
    for (size_t i = 0; i < pixels; ++i) {
        const auto v = static_cast<std::uint8_t>(data[pos + i]);
        if (v > num_classes)
            throw std::runtime_error(path + ": label " + std::to_string(v) + " at pixel (" +
                                     std::to_string(i % w) + ", " + std::to_string(i / w) +
                                     ") exceeds class count " + std::to_string(num_classes));
        lm.labels[i] = v;
    }
    return lm;
}

// ---------------------------------------------------------------------------
// posterior raster: "PSP1" + u32 width/height/classes + float64 LE values,
// pixel-major with num_classes entries per pixel.
// ---------------------------------------------------------------------------

struct PosteriorRaster {
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<double> values;
};

inline void write_posterior_raster(const std::string& path, int width, int height,
                                   int num_classes, std::span<const double> values) {
    if (width <= 0 || height <= 0 || num_classes <= 0)
        throw std::invalid_argument("posterior raster: dimensions must be positive");
    if (values.size() != static_cast<size_t>(width) * height * num_classes)
        throw std::invalid_argument("posterior raster: value count does not match dimensions");
    std::string out;
    out.reserve(16 + values.size() * 8);
    out += "PSP1";
    detail::put_u32(out, static_cast<std::uint32_t>(width));
    detail::put_u32(out, static_cast<std::uint32_t>(height));
    detail::put_u32(out, static_cast<std::uint32_t>(num_classes));
    for (double v : values) detail::put_f64(out, v);
    detail::write_file(path, out);
}

inline PosteriorRaster read_posterior_raster(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 16 || data.compare(0, 4, "PSP1") != 0)
        throw std::runtime_error(path + ": not a posterior raster (bad magic)");
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    const std::uint64_t w = detail::get_u32(p + 4);
    const std::uint64_t h = detail::get_u32(p + 8);
    const std::uint64_t L = detail::get_u32(p + 12);
    if (w == 0 || h == 0 || L == 0)
        throw std::runtime_error(path + ": posterior raster has zero dimension");
    if (w * h > SIZE_MAX / (8 * L))
        throw std::runtime_error(path + ": posterior raster dimensions overflow");
    const std::uint64_t expect = w * h * L * 8;
    if (data.size() - 16 != expect)
        throw std::runtime_error(path + ": posterior raster truncated or padded: expected " +
                                 std::to_string(expect) + " payload bytes, found " +
                                 std::to_string(data.size() - 16));
    PosteriorRaster out;
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.num_classes = static_cast<int>(L);
    out.values.resize(w * h * L);
    const unsigned char* q = p + 16;
    for (auto& v : out.values) {
        v = detail::get_f64(q);
        q += 8;
    }
    return out;
}

// ---------------------------------------------------------------------------
// model serialization: line-oriented text, doubles printed with %.17g so a
// load reproduces the saved model bit for bit.
// ---------------------------------------------------------------------------

inline constexpr const char* kModelVersionLine = "fernseg model 1";

inline void save_model(const std::string& path, const RandomFernsModel& model) {
    std::string out;
    out += kModelVersionLine;
    out += "\nclasses " + std::to_string(model.num_classes);
    out += "\nsmoothing_u ";
    detail::append_double(out, model.smoothing_u);
    out += "\npatch_radius ";
    detail::append_double(out, model.patch_radius);
    out += "\nprior";
    for (double p : model.class_log_prior) {
        out += ' ';
        detail::append_double(out, p);
    }
    out += "\nferns " + std::to_string(model.ferns.size());
    for (size_t j = 0; j < model.ferns.size(); ++j) {
        const Fern& fern = model.ferns[j];
        out += "\nfern " + std::to_string(j);
        out += "\nfeatures " + std::to_string(fern.num_features());
        for (const BinaryFeature& f : fern.features) {
            out += "\nfeature ";
            out += f.kind == FeatureKind::OnePoint ? "one_point" : "two_point";
            for (const RegionSpec* reg : {&f.region1, &f.region2}) {
                out += ' ';
                detail::append_double(out, reg->r);
                out += ' ';
                detail::append_double(out, reg->alpha_deg);
                out += ' ' + std::to_string(reg->s);
            }
            for (double c : f.ref_log.components()) {
                out += ' ';
                detail::append_double(out, c);
            }
            out += ' ';
            detail::append_double(out, f.delta);
        }
        out += "\ncounts";
        for (std::uint32_t c : fern.counts) out += ' ' + std::to_string(c);
    }
    out += '\n';
    detail::write_file(path, out);
}

namespace detail {

class ModelParser {
  public:
    explicit ModelParser(const std::string& path)
        : path_(path), in_(read_file(path)) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error(path_ + ":" + std::to_string(lineno_) +
                                 ": model parse error: " + what);
    }

    std::istringstream& next_line(const std::string& expect_key) {
        std::string line;
        if (!std::getline(in_, line)) fail("unexpected end of file, expected '" + expect_key + "'");
        ++lineno_;
        line_.clear();
        line_.str(line);
        std::string key;
        if (!(line_ >> key) || key != expect_key)
            fail("expected '" + expect_key + "', got '" + key + "'");
        return line_;
    }

    template <typename T>
    T value(std::istringstream& iss, const std::string& what) {
        T v;
        if (!(iss >> v)) fail("missing or malformed " + what);
        return v;
    }

    std::string raw_line() {
        std::string line;
        if (!std::getline(in_, line)) fail("unexpected end of file");
        ++lineno_;
        return line;
    }

    bool has_trailing_content() {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            if (!line.empty()) return true;
        }
        return false;
    }

    int lineno() const { return lineno_; }

  private:
    std::string path_;
    std::istringstream in_;
    std::istringstream line_;
    int lineno_ = 0;
};

}  // namespace detail

inline RandomFernsModel load_model(const std::string& path) {
    detail::ModelParser p(path);
    {
        const std::string version = p.raw_line();
        if (version != kModelVersionLine)
            p.fail("unsupported model version line '" + version + "'");
    }
    RandomFernsModel model;
    model.num_classes = p.value<int>(p.next_line("classes"), "class count");
    if (model.num_classes < 2) p.fail("class count must be at least 2");
    model.smoothing_u = p.value<double>(p.next_line("smoothing_u"), "smoothing value");
    if (!(model.smoothing_u > 0.0)) p.fail("smoothing value must be positive");
    model.patch_radius = p.value<double>(p.next_line("patch_radius"), "patch radius");
    {
        auto& iss = p.next_line("prior");
        model.class_log_prior.resize(model.num_classes);
        for (int c = 0; c < model.num_classes; ++c)
            model.class_log_prior[c] = p.value<double>(iss, "prior entry");
    }
    const int num_ferns = p.value<int>(p.next_line("ferns"), "fern count");
    if (num_ferns < 1) p.fail("fern count must be positive");
    model.ferns.resize(num_ferns);
    for (int j = 0; j < num_ferns; ++j) {
        const int idx = p.value<int>(p.next_line("fern"), "fern index");
        if (idx != j) p.fail("fern index out of order");
        Fern& fern = model.ferns[j];
        fern.num_classes = model.num_classes;
        const int nf = p.value<int>(p.next_line("features"), "feature count");
        if (nf < 1 || nf > kMaxFernSize)
            p.fail("feature count must be in [1, " + std::to_string(kMaxFernSize) + "]");
        fern.features.resize(nf);
        for (BinaryFeature& f : fern.features) {
            auto& iss = p.next_line("feature");
            const std::string kind = p.value<std::string>(iss, "feature kind");
            if (kind == "one_point")
                f.kind = FeatureKind::OnePoint;
            else if (kind == "two_point")
                f.kind = FeatureKind::TwoPoint;
            else
                p.fail("unknown feature kind '" + kind + "'");
            for (RegionSpec* reg : {&f.region1, &f.region2}) {
                reg->r = p.value<double>(iss, "region offset");
                reg->alpha_deg = p.value<double>(iss, "region angle");
                reg->s = p.value<int>(iss, "region window size");
                if (reg->s < 1) p.fail("region window size must be positive");
            }
            std::array<double, 9> c;
            for (double& v : c) v = p.value<double>(iss, "reference matrix component");
            f.ref_log = HermitianMat::from_components(c);
            f.delta = p.value<double>(iss, "threshold");
        }
        auto& iss = p.next_line("counts");
        fern.counts.resize(static_cast<size_t>(fern.num_bins()) * model.num_classes);
        for (auto& c : fern.counts) c = p.value<std::uint32_t>(iss, "count entry");
        std::string extra;
        if (iss >> extra) p.fail("trailing data after counts");
    }
    if (p.has_trailing_content()) p.fail("trailing content after the last fern");
    return model;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

inline void write_metrics_report(const std::string& path, const MetricsReport& rep,
                                 const ConfusionMatrix& cm) {
    std::string out;
    auto kv = [&](const char* key, double v) {
        out += key;
        out += ' ';
        detail::append_double(out, v);
        out += '\n';
    };
    kv("overall_accuracy", rep.oa);
    kv("average_accuracy", rep.aa);
    kv("kappa", rep.kappa);
    kv("mean_f1", rep.f1_macro);
    kv("mean_iou", rep.miou);
    auto row = [&](const char* key, const std::vector<double>& vs) {
        out += key;
        for (double v : vs) {
            out += ' ';
            detail::append_double(out, v);
        }
        out += '\n';
    };
    row("class_accuracy", rep.per_class_accuracy);
    row("class_iou", rep.per_class_iou);
    row("class_f1", rep.per_class_f1);
    out += "confusion_classes " + std::to_string(cm.num_classes) + '\n';
    for (int r = 1; r <= cm.num_classes; ++r) {
        out += "confusion_row";
        for (int c = 1; c <= cm.num_classes; ++c) out += ' ' + std::to_string(cm.at(r, c));
        out += '\n';
    }
    detail::write_file(path, out);
}

inline void write_entropy_csv(const std::string& path, std::span<const double> hist) {
    std::string out = "bin_low,bin_high,fraction\n";
    const int bins = static_cast<int>(hist.size());
    for (int b = 0; b < bins; ++b) {
        detail::append_double(out, static_cast<double>(b) / bins);
        out += ',';
        detail::append_double(out, static_cast<double>(b + 1) / bins);
        out += ',';
        detail::append_double(out, hist[b]);
        out += '\n';
    }
    detail::write_file(path, out);
}

inline void write_calibration_csv(const std::string& path,
                                  std::span<const CalibrationBin> curve, int num_classes) {
    std::string out = "bin_low,bin_high,mean_confidence,accuracy,count\n";
    const int bins = static_cast<int>(curve.size());
    const double lo = 1.0 / num_classes;
    for (int b = 0; b < bins; ++b) {
        detail::append_double(out, lo + (1.0 - lo) * b / bins);
        out += ',';
        detail::append_double(out, lo + (1.0 - lo) * (b + 1) / bins);
        out += ',';
        detail::append_double(out, curve[b].mean_confidence);
        out += ',';
        detail::append_double(out, curve[b].accuracy);
        out += ',';
        out += std::to_string(curve[b].count);
        out += '\n';
    }
    detail::write_file(path, out);
}

inline void write_trace_csv(const std::string& path, std::span<const IterationRecord> trace) {
    std::string out = "iteration,op,accepted,train_objective,val_objective,feature_count,fern_count\n";
    for (const auto& rec : trace) {
        out += std::to_string(rec.iteration);
        out += ',';
        out += mutation_name(rec.op);
        out += ',';
        out += rec.accepted ? '1' : '0';
        out += ',';
        detail::append_double(out, rec.train_objective);
        out += ',';
        detail::append_double(out, rec.val_objective);
        out += ',';
        out += std::to_string(rec.feature_count);
        out += ',';
        out += std::to_string(rec.fern_count);
        out += '\n';
    }
    detail::write_file(path, out);
}

}  // namespace fernseg
