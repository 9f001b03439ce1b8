#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fernseg/image.hpp"

namespace fernseg {

/// Rows index the reference class, columns the predicted class (1..L mapped
/// to 0..L-1). Pixels with reference label 0 are skipped.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::uint64_t> counts;

    std::uint64_t at(int ref_cls, int pred_cls) const {
        return counts[static_cast<size_t>(ref_cls - 1) * num_classes + (pred_cls - 1)];
    }
    std::uint64_t& at(int ref_cls, int pred_cls) {
        return counts[static_cast<size_t>(ref_cls - 1) * num_classes + (pred_cls - 1)];
    }
    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    std::uint64_t row_sum(int ref_cls) const {
        std::uint64_t t = 0;
        for (int p = 1; p <= num_classes; ++p) t += at(ref_cls, p);
        return t;
    }
    std::uint64_t col_sum(int pred_cls) const {
        std::uint64_t t = 0;
        for (int r = 1; r <= num_classes; ++r) t += at(r, pred_cls);
        return t;
    }

    static ConfusionMatrix zeros(int num_classes) {
        ConfusionMatrix cm;
        cm.num_classes = num_classes;
        cm.counts.assign(static_cast<size_t>(num_classes) * num_classes, 0);
        return cm;
    }
};

inline ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& ref) {
    if (pred.width != ref.width || pred.height != ref.height)
        throw std::invalid_argument("confusion: label map dimensions differ");
    const int L = std::max(pred.num_classes, ref.num_classes);
    ConfusionMatrix cm = ConfusionMatrix::zeros(L);
    for (int i = 0; i < ref.size(); ++i) {
        const int r = ref.labels[i];
        const int p = pred.labels[i];
        if (r == 0 || p == 0) continue;
        if (r > L || p > L) throw std::invalid_argument("confusion: label exceeds class count");
        ++cm.at(r, p);
    }
    return cm;
}

/// Scalar summaries of a confusion matrix. Classes absent from the reference
/// carry NaN in the per-class vectors and are excluded from the means.
struct MetricsReport {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    double f1_macro = 0.0;
    double miou = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<double> per_class_iou;
    std::vector<double> per_class_f1;
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
    const int L = cm.num_classes;
    const double total = static_cast<double>(cm.total());
    if (total == 0.0) throw std::invalid_argument("metrics: confusion matrix is empty");

    MetricsReport rep;
    rep.per_class_accuracy.assign(L, std::numeric_limits<double>::quiet_NaN());
    rep.per_class_iou.assign(L, std::numeric_limits<double>::quiet_NaN());
    rep.per_class_f1.assign(L, std::numeric_limits<double>::quiet_NaN());

    double diag = 0.0, pe = 0.0;
    double acc_sum = 0.0, iou_sum = 0.0, f1_sum = 0.0;
    int present = 0;
    for (int c = 1; c <= L; ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double row = static_cast<double>(cm.row_sum(c));
        const double col = static_cast<double>(cm.col_sum(c));
        diag += tp;
        pe += (row / total) * (col / total);
        if (row == 0.0) continue;
        ++present;
        const double fp = col - tp, fn = row - tp;
        rep.per_class_accuracy[c - 1] = tp / row;
        rep.per_class_iou[c - 1] = (tp + fp + fn) > 0.0 ? tp / (tp + fp + fn) : 0.0;
        rep.per_class_f1[c - 1] = (2 * tp + fp + fn) > 0.0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
        acc_sum += rep.per_class_accuracy[c - 1];
        iou_sum += rep.per_class_iou[c - 1];
        f1_sum += rep.per_class_f1[c - 1];
    }
    rep.oa = diag / total;
    rep.aa = acc_sum / present;
    rep.miou = iou_sum / present;
    rep.f1_macro = f1_sum / present;
    rep.kappa = std::abs(1.0 - pe) < 1e-15 ? 0.0 : (rep.oa - pe) / (1.0 - pe);
    return rep;
}

/// Shannon entropy of a class posterior in base-L logarithm, so the result
/// lives in [0, 1] regardless of the class count.
inline double posterior_entropy(std::span<const double> dist, int num_classes) {
    if (num_classes < 2) throw std::invalid_argument("posterior_entropy: need >= 2 classes");
    if (dist.size() != static_cast<size_t>(num_classes))
        throw std::invalid_argument("posterior_entropy: distribution length mismatch");
    double h = 0.0;
    for (double p : dist) {
        if (p < 0.0) throw std::domain_error("posterior_entropy: negative probability");
        if (p > 0.0) h -= p * std::log(p);
    }
    h /= std::log(static_cast<double>(num_classes));
    return std::clamp(h, 0.0, 1.0);
}

/// Normalized histogram of per-pixel posterior entropies over [0, 1].
/// posteriors is pixel-major with num_classes entries per pixel; all-zero
/// rows (masked pixels) are skipped.
inline std::vector<double> entropy_histogram(std::span<const double> posteriors,
                                             int num_classes, int bins) {
    if (bins < 1) throw std::invalid_argument("entropy_histogram: need >= 1 bin");
    if (posteriors.size() % num_classes != 0)
        throw std::invalid_argument("entropy_histogram: raster length mismatch");
    std::vector<double> hist(bins, 0.0);
    const size_t pixels = posteriors.size() / num_classes;
    std::uint64_t counted = 0;
    for (size_t i = 0; i < pixels; ++i) {
        std::span<const double> row = posteriors.subspan(i * num_classes, num_classes);
        double sum = 0.0;
        for (double p : row) sum += p;
        if (sum == 0.0) continue;
        const double h = posterior_entropy(row, num_classes);
        int bin = static_cast<int>(h * bins);
        bin = std::min(bin, bins - 1);
        hist[bin] += 1.0;
        ++counted;
    }
    if (counted > 0)
        for (double& v : hist) v /= static_cast<double>(counted);
    return hist;
}

struct CalibrationBin {
    double mean_confidence = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t count = 0;
};

/// Reliability curve: pixels bucketed by max-posterior confidence over
/// [1/L, 1], each bin reporting mean confidence and empirical accuracy.
inline std::vector<CalibrationBin> calibration_curve(std::span<const double> posteriors,
                                                     const LabelMap& pred, const LabelMap& ref,
                                                     int bins = 20) {
    if (bins < 1) throw std::invalid_argument("calibration_curve: need >= 1 bin");
    if (pred.width != ref.width || pred.height != ref.height)
        throw std::invalid_argument("calibration_curve: label map dimensions differ");
    const int L = std::max(pred.num_classes, ref.num_classes);
    if (posteriors.size() != static_cast<size_t>(pred.width) * pred.height * L)
        throw std::invalid_argument("calibration_curve: raster length mismatch");

    const double lo = 1.0 / L;
    std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
    std::vector<std::uint64_t> count(bins, 0);
    for (int i = 0; i < ref.size(); ++i) {
        if (ref.labels[i] == 0 || pred.labels[i] == 0) continue;
        double best = 0.0;
        for (int c = 0; c < L; ++c)
            best = std::max(best, posteriors[static_cast<size_t>(i) * L + c]);
        int bin = static_cast<int>((best - lo) / (1.0 - lo) * bins);
        bin = std::clamp(bin, 0, bins - 1);
        conf_sum[bin] += best;
        hit_sum[bin] += pred.labels[i] == ref.labels[i] ? 1.0 : 0.0;
        ++count[bin];
    }
    std::vector<CalibrationBin> out(bins);
    for (int b = 0; b < bins; ++b) {
        out[b].count = count[b];
        if (count[b] > 0) {
            out[b].mean_confidence = conf_sum[b] / count[b];
            out[b].accuracy = hit_sum[b] / count[b];
        }
    }
    return out;
}

}  // namespace fernseg
