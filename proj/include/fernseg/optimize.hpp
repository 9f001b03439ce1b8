#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fernseg/ferns.hpp"

namespace fernseg {

/// Packed bit sequence; one bit per training sample.
struct BitVector {
    size_t n = 0;
    std::vector<std::uint64_t> words;

    void assign(size_t count) {
        n = count;
        words.assign((count + 63) / 64, 0);
    }
    void set(size_t i) { words[i >> 6] |= std::uint64_t{1} << (i & 63); }
    bool test(size_t i) const { return (words[i >> 6] >> (i & 63)) & 1; }
    size_t count_ones() const {
        size_t c = 0;
        for (auto w : words) c += static_cast<size_t>(std::popcount(w));
        return c;
    }
};

inline size_t joint_ones(const BitVector& a, const BitVector& b) {
    size_t c = 0;
    for (size_t i = 0; i < a.words.size(); ++i)
        c += static_cast<size_t>(std::popcount(a.words[i] & b.words[i]));
    return c;
}

namespace detail {

inline double entropy_from_counts(const std::vector<std::uint64_t>& counts, std::uint64_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace detail

/// Shannon entropy (natural log) of the class distribution of a sample set.
inline double dataset_entropy(std::span<const int> labels, int num_classes) {
    std::vector<std::uint64_t> counts(num_classes, 0);
    for (int cls : labels) ++counts[cls - 1];
    return detail::entropy_from_counts(counts, labels.size());
}

/// Estimated impurity after splitting the samples on the bit: the weighted
/// entropy of the two halves. An empty half contributes nothing. The feature
/// quality used for preselection is dataset_entropy - info_gain_hat.
inline double info_gain_hat(const BitVector& bits, std::span<const int> labels,
                            int num_classes) {
    if (bits.n != labels.size())
        throw std::invalid_argument("info_gain_hat: bits and labels differ in length");
    if (labels.empty()) throw std::invalid_argument("info_gain_hat: empty sample set");
    std::vector<std::uint64_t> c0(num_classes, 0), c1(num_classes, 0);
    std::uint64_t n0 = 0, n1 = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (bits.test(i)) {
            ++c1[labels[i] - 1];
            ++n1;
        } else {
            ++c0[labels[i] - 1];
            ++n0;
        }
    }
    const double total = static_cast<double>(labels.size());
    return (n0 / total) * detail::entropy_from_counts(c0, n0) +
           (n1 / total) * detail::entropy_from_counts(c1, n1);
}

/// Pearson correlation of two bit sequences. Constant sequences have no
/// defined correlation and are rejected.
inline double feature_correlation(const BitVector& a, const BitVector& b) {
    if (a.n != b.n) throw std::invalid_argument("feature_correlation: length mismatch");
    if (a.n == 0) throw std::invalid_argument("feature_correlation: empty sequences");
    const double n = static_cast<double>(a.n);
    const double pa = static_cast<double>(a.count_ones()) / n;
    const double pb = static_cast<double>(b.count_ones()) / n;
    if (pa == 0.0 || pa == 1.0 || pb == 0.0 || pb == 1.0)
        throw std::domain_error("feature_correlation: constant feature");
    const double pab = static_cast<double>(joint_ones(a, b)) / n;
    return (pab - pa * pb) / std::sqrt(pa * (1.0 - pa) * pb * (1.0 - pb));
}

struct FeatureStats {
    BinaryFeature feature;
    BitVector bits;
    double quality = 0.0;
};

struct PreselectConfig {
    int pool_size = 2000;
    double ig_threshold = 0.01;
    double corr_threshold = 0.9;
    int num_ferns = 30;
    int fern_size = 8;
    int threads = 1;
};

/// Pool candidates with their bits evaluated on the training samples.
inline std::vector<FeatureStats> sample_feature_pool(const PolSarImage& img,
                                                     const TrainingSet& ts,
                                                     const FeatureConfig& feature_cfg,
                                                     const PreselectConfig& cfg,
                                                     std::mt19937_64& rng) {
    std::vector<FeatureStats> pool(cfg.pool_size);
    for (auto& fs : pool) fs.feature = sample_feature(rng, feature_cfg, img, ts.pixel);
    const double base_entropy =
        dataset_entropy(ts.label, *std::max_element(ts.label.begin(), ts.label.end()));
    const int num_classes = *std::max_element(ts.label.begin(), ts.label.end());
    parallel_for(cfg.pool_size, cfg.threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            FeatureStats& fs = pool[i];
            fs.bits.assign(ts.size());
            for (size_t k = 0; k < ts.size(); ++k)
                if (eval_feature(fs.feature, img, img.coord(ts.pixel[k]))) fs.bits.set(k);
            fs.quality = base_entropy - info_gain_hat(fs.bits, ts.label, num_classes);
        }
    });
    return pool;
}

/// Steps (b) and (c) of preselection: drop weak and constant candidates, then
/// scan the survivors in quality order and drop the weaker member of every
/// highly correlated pair. Returns indices into the pool, best quality first.
inline std::vector<int> preselect_filter(const std::vector<FeatureStats>& pool,
                                         const PreselectConfig& cfg) {
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
        const size_t ones = pool[i].bits.count_ones();
        if (ones == 0 || ones == pool[i].bits.n) continue;
        if (pool[i].quality < cfg.ig_threshold) continue;
        order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pool[a].quality > pool[b].quality;
    });
    std::vector<char> dead(order.size(), 0);
    for (size_t i = 0; i < order.size(); ++i) {
        if (dead[i]) continue;
        for (size_t j = i + 1; j < order.size(); ++j) {
            if (dead[j]) continue;
            const double r = feature_correlation(pool[order[i]].bits, pool[order[j]].bits);
            if (std::abs(r) > cfg.corr_threshold) dead[j] = 1;
        }
    }
    std::vector<int> out;
    for (size_t i = 0; i < order.size(); ++i)
        if (!dead[i]) out.push_back(order[i]);
    return out;
}

/// Greedy grouping of surviving features into ferns: each group is seeded
/// with the best ungrouped feature and grown by the candidate with the
/// highest mean absolute correlation to the current members.
inline std::vector<std::vector<BinaryFeature>> group_features(
    const std::vector<FeatureStats>& pool, const std::vector<int>& survivors,
    const PreselectConfig& cfg) {
    const size_t needed = static_cast<size_t>(cfg.num_ferns) * cfg.fern_size;
    if (survivors.size() < needed)
        throw std::runtime_error("preselect: only " + std::to_string(survivors.size()) +
                                 " features survived, need " + std::to_string(needed));
    std::vector<char> grouped(survivors.size(), 0);
    std::vector<double> corr_sum(survivors.size(), 0.0);
    std::vector<std::vector<BinaryFeature>> groups;
    groups.reserve(cfg.num_ferns);
    for (int j = 0; j < cfg.num_ferns; ++j) {
        std::fill(corr_sum.begin(), corr_sum.end(), 0.0);
        std::vector<int> member_pos;
        // survivors are quality-sorted, so the first ungrouped one seeds
        for (size_t i = 0; i < survivors.size(); ++i)
            if (!grouped[i]) {
                member_pos.push_back(static_cast<int>(i));
                grouped[i] = 1;
                break;
            }
        while (static_cast<int>(member_pos.size()) < cfg.fern_size) {
            const int last = member_pos.back();
            int best = -1;
            double best_mean = -1.0;
            for (size_t i = 0; i < survivors.size(); ++i) {
                if (grouped[i]) continue;
                corr_sum[i] += std::abs(feature_correlation(pool[survivors[i]].bits,
                                                            pool[survivors[last]].bits));
                const double mean = corr_sum[i] / member_pos.size();
                if (mean > best_mean) {
                    best_mean = mean;
                    best = static_cast<int>(i);
                }
            }
            member_pos.push_back(best);
            grouped[best] = 1;
        }
        std::vector<BinaryFeature> group;
        group.reserve(cfg.fern_size);
        for (int pos : member_pos) group.push_back(pool[survivors[pos]].feature);
        groups.push_back(std::move(group));
    }
    return groups;
}

/// Full preselect-and-group pipeline over a fresh candidate pool.
inline std::vector<std::vector<BinaryFeature>> preselect_and_group(
    const PolSarImage& img, const TrainingSet& ts, const FeatureConfig& feature_cfg,
    const PreselectConfig& cfg, std::mt19937_64& rng) {
    auto pool = sample_feature_pool(img, ts, feature_cfg, cfg, rng);
    auto survivors = preselect_filter(pool, cfg);
    return group_features(pool, survivors, cfg);
}

// ---------------------------------------------------------------------------
// iterative structural optimization
// ---------------------------------------------------------------------------

enum class MutationKind : int {
    AddFern = 0,
    AddFeature = 1,
    DeleteFeature = 2,
    SwitchFeatures = 3,
    ResampleThreshold = 4,
};

inline const char* mutation_name(MutationKind k) {
    switch (k) {
        case MutationKind::AddFern: return "add_fern";
        case MutationKind::AddFeature: return "add_feature";
        case MutationKind::DeleteFeature: return "delete_feature";
        case MutationKind::SwitchFeatures: return "switch_features";
        case MutationKind::ResampleThreshold: return "resample_threshold";
    }
    return "unknown";
}

/// A fully specified structural edit. Payloads (fresh features, new
/// threshold) are drawn when the op is drawn, so applying an op is
/// deterministic.
struct MutationOp {
    MutationKind kind = MutationKind::ResampleThreshold;
    int fern_a = -1;
    int feat_a = -1;
    int fern_b = -1;
    int feat_b = -1;
    double new_delta = 0.0;
    BinaryFeature new_feature;
    std::vector<BinaryFeature> new_fern;
};

struct MutationContext {
    const PolSarImage& img;
    const TrainingSet& train;
    FeatureConfig feature_cfg;
    int new_fern_size = 6;
    int max_fern_size = 12;
};

namespace detail {

inline double resample_delta(const BinaryFeature& f, const MutationContext& ctx,
                             std::mt19937_64& rng) {
    const auto& pixels = ctx.train.pixel;
    const size_t subsample = std::min<size_t>(1000, pixels.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::uniform_int_distribution<size_t> pick(0, pixels.size() - 1);
    for (size_t i = 0; i < subsample; ++i) {
        const int px = subsample == pixels.size() ? pixels[i] : pixels[pick(rng)];
        const double p = project(f, ctx.img, ctx.img.coord(px));
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <typename Pred>
inline int pick_fern(const RandomFernsModel& model, std::mt19937_64& rng, Pred&& valid) {
    std::vector<int> candidates;
    for (int j = 0; j < static_cast<int>(model.ferns.size()); ++j)
        if (valid(model.ferns[j])) candidates.push_back(j);
    if (candidates.empty()) return -1;
    std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
    return candidates[pick(rng)];
}

}  // namespace detail

/// Draws one feasible mutation with equal probability over the op kinds;
/// infeasible kinds are redrawn. Targets are uniform over the valid choices.
inline MutationOp draw_mutation(const RandomFernsModel& model, std::mt19937_64& rng,
                                const MutationContext& ctx) {
    if (model.ferns.empty()) throw std::invalid_argument("draw_mutation: empty model");
    std::uniform_int_distribution<int> kind_die(0, 4);
    for (;;) {
        const auto kind = static_cast<MutationKind>(kind_die(rng));
        MutationOp op;
        op.kind = kind;
        switch (kind) {
            case MutationKind::AddFern: {
                op.new_fern.reserve(ctx.new_fern_size);
                for (int k = 0; k < ctx.new_fern_size; ++k)
                    op.new_fern.push_back(
                        sample_feature(rng, ctx.feature_cfg, ctx.img, ctx.train.pixel));
                return op;
            }
            case MutationKind::AddFeature: {
                op.fern_a = detail::pick_fern(model, rng, [&](const Fern& f) {
                    return f.num_features() < ctx.max_fern_size;
                });
                if (op.fern_a < 0) break;
                op.new_feature = sample_feature(rng, ctx.feature_cfg, ctx.img, ctx.train.pixel);
                return op;
            }
            case MutationKind::DeleteFeature: {
                op.fern_a = detail::pick_fern(model, rng,
                                              [](const Fern& f) { return f.num_features() >= 2; });
                if (op.fern_a < 0) break;
                std::uniform_int_distribution<int> pick(
                    0, model.ferns[op.fern_a].num_features() - 1);
                op.feat_a = pick(rng);
                return op;
            }
            case MutationKind::SwitchFeatures: {
                if (model.ferns.size() < 2) break;
                std::uniform_int_distribution<int> pick(0,
                                                        static_cast<int>(model.ferns.size()) - 1);
                op.fern_a = pick(rng);
                do {
                    op.fern_b = pick(rng);
                } while (op.fern_b == op.fern_a);
                op.feat_a = std::uniform_int_distribution<int>(
                    0, model.ferns[op.fern_a].num_features() - 1)(rng);
                op.feat_b = std::uniform_int_distribution<int>(
                    0, model.ferns[op.fern_b].num_features() - 1)(rng);
                return op;
            }
            case MutationKind::ResampleThreshold: {
                std::uniform_int_distribution<int> pick(0,
                                                        static_cast<int>(model.ferns.size()) - 1);
                op.fern_a = pick(rng);
                op.feat_a = std::uniform_int_distribution<int>(
                    0, model.ferns[op.fern_a].num_features() - 1)(rng);
                op.new_delta =
                    detail::resample_delta(model.ferns[op.fern_a].features[op.feat_a], ctx, rng);
                return op;
            }
        }
    }
}

/// Applies the op and retrains only the touched ferns; every other fern's
/// count table is carried over untouched.
inline RandomFernsModel apply_mutation(const RandomFernsModel& model, const MutationOp& op,
                                       const MutationContext& ctx) {
    RandomFernsModel out = model;
    auto refit = [&](int j) { fill_fern_counts(out.ferns[j], ctx.img, ctx.train); };
    switch (op.kind) {
        case MutationKind::AddFern: {
            Fern fern;
            fern.num_classes = model.num_classes;
            fern.features = op.new_fern;
            out.ferns.push_back(std::move(fern));
            refit(static_cast<int>(out.ferns.size()) - 1);
            break;
        }
        case MutationKind::AddFeature:
            out.ferns[op.fern_a].features.push_back(op.new_feature);
            refit(op.fern_a);
            break;
        case MutationKind::DeleteFeature:
            out.ferns[op.fern_a].features.erase(out.ferns[op.fern_a].features.begin() +
                                                op.feat_a);
            refit(op.fern_a);
            break;
        case MutationKind::SwitchFeatures:
            std::swap(out.ferns[op.fern_a].features[op.feat_a],
                      out.ferns[op.fern_b].features[op.feat_b]);
            refit(op.fern_a);
            refit(op.fern_b);
            break;
        case MutationKind::ResampleThreshold:
            out.ferns[op.fern_a].features[op.feat_a].delta = op.new_delta;
            refit(op.fern_a);
            break;
    }
    return out;
}

inline std::pair<MutationOp, RandomFernsModel> mutate(const RandomFernsModel& model,
                                                      std::mt19937_64& rng,
                                                      const MutationContext& ctx) {
    MutationOp op = draw_mutation(model, rng, ctx);
    return {op, apply_mutation(model, op, ctx)};
}

enum class Objective { AverageAccuracy, OverallAccuracy };

struct IterConfig {
    int it_min = 30;
    int delta_patience = 15;
    int new_fern_size = 6;
    int max_fern_size = 12;
    Objective objective = Objective::AverageAccuracy;
    FeatureConfig features;
};

struct IterationRecord {
    int iteration = 0;
    MutationKind op = MutationKind::AddFern;
    bool accepted = false;
    double train_objective = 0.0;
    double val_objective = 0.0;
    int feature_count = 0;
    int fern_count = 0;
};

struct OptimizeResult {
    RandomFernsModel model;
    std::vector<IterationRecord> trace;
};

namespace detail {

/// Incremental evaluation state for hill climbing: per-sample fern bins and
/// per-fern likelihood tables, recomputed only for ferns an op touched.
class HillClimbState {
  public:
    HillClimbState(const RandomFernsModel& model, const PolSarImage& img,
                   const TrainingSet& train, const TrainingSet& val)
        : img_(img), train_(train), val_(val) {
        pixels_ = train.pixel;
        pixels_.insert(pixels_.end(), val.pixel.begin(), val.pixel.end());
        model_ = model;
        bins_.resize(model.ferns.size());
        tables_.resize(model.ferns.size());
        for (size_t j = 0; j < model.ferns.size(); ++j) {
            bins_[j] = compute_bins(model.ferns[j]);
            tables_[j] = log_likelihood_table(model.ferns[j], model.smoothing_u);
        }
    }

    const RandomFernsModel& model() const { return model_; }

    /// Builds the candidate produced by the op, evaluates it, and commits it
    /// when better. Returns {accepted, candidate val objective}.
    std::pair<bool, double> try_mutation(const MutationOp& op, Objective objective,
                                         double best_val) {
        candidate_ = model_;
        cand_ferns_.clear();
        switch (op.kind) {
            case MutationKind::AddFern: {
                Fern fern;
                fern.num_classes = model_.num_classes;
                fern.features = op.new_fern;
                candidate_.ferns.push_back(std::move(fern));
                cand_ferns_.push_back(static_cast<int>(candidate_.ferns.size()) - 1);
                break;
            }
            case MutationKind::AddFeature:
                candidate_.ferns[op.fern_a].features.push_back(op.new_feature);
                cand_ferns_.push_back(op.fern_a);
                break;
            case MutationKind::DeleteFeature:
                candidate_.ferns[op.fern_a].features.erase(
                    candidate_.ferns[op.fern_a].features.begin() + op.feat_a);
                cand_ferns_.push_back(op.fern_a);
                break;
            case MutationKind::SwitchFeatures:
                std::swap(candidate_.ferns[op.fern_a].features[op.feat_a],
                          candidate_.ferns[op.fern_b].features[op.feat_b]);
                cand_ferns_.push_back(op.fern_a);
                cand_ferns_.push_back(op.fern_b);
                break;
            case MutationKind::ResampleThreshold:
                candidate_.ferns[op.fern_a].features[op.feat_a].delta = op.new_delta;
                cand_ferns_.push_back(op.fern_a);
                break;
        }
        cand_bins_.resize(cand_ferns_.size());
        cand_tables_.resize(cand_ferns_.size());
        for (size_t k = 0; k < cand_ferns_.size(); ++k) {
            const int j = cand_ferns_[k];
            cand_bins_[k] = compute_bins(candidate_.ferns[j]);
            refit_counts(candidate_.ferns[j], cand_bins_[k]);
            cand_tables_[k] = log_likelihood_table(candidate_.ferns[j], candidate_.smoothing_u);
        }
        const double val = score(candidate_, objective, train_.size(), pixels_.size(), true);
        if (val > best_val) {
            commit();
            return {true, val};
        }
        return {false, val};
    }

    double objective_on_train(Objective objective) const {
        return score(model_, objective, 0, train_.size(), false);
    }
    double objective_on_val(Objective objective) const {
        return score(model_, objective, train_.size(), pixels_.size(), false);
    }

    /// Rebuilds every count table from scratch; used to cross-check that the
    /// incremental bookkeeping matches a full refit.
    RandomFernsModel refit_from_scratch() const {
        RandomFernsModel fresh = model_;
        for (auto& fern : fresh.ferns) fill_fern_counts(fern, img_, train_);
        return fresh;
    }

  private:
    std::vector<std::uint32_t> compute_bins(const Fern& fern) const {
        std::vector<std::uint32_t> bins(pixels_.size());
        for (size_t i = 0; i < pixels_.size(); ++i)
            bins[i] = static_cast<std::uint32_t>(bin_index(fern, img_, img_.coord(pixels_[i])));
        return bins;
    }

    void refit_counts(Fern& fern, const std::vector<std::uint32_t>& bins) const {
        fern.counts.assign(static_cast<size_t>(fern.num_bins()) * fern.num_classes, 0);
        for (size_t i = 0; i < train_.size(); ++i)
            ++fern.counts[static_cast<size_t>(bins[i]) * fern.num_classes +
                          (train_.label[i] - 1)];
    }

    const std::vector<std::uint32_t>& bins_for(size_t j, bool candidate) const {
        if (candidate)
            for (size_t k = 0; k < cand_ferns_.size(); ++k)
                if (cand_ferns_[k] == static_cast<int>(j)) return cand_bins_[k];
        return bins_[j];
    }
    const std::vector<double>& table_for(size_t j, bool candidate) const {
        if (candidate)
            for (size_t k = 0; k < cand_ferns_.size(); ++k)
                if (cand_ferns_[k] == static_cast<int>(j)) return cand_tables_[k];
        return tables_[j];
    }

    double score(const RandomFernsModel& m, Objective objective, size_t begin, size_t end,
                 bool candidate) const {
        const int L = m.num_classes;
        std::vector<std::uint64_t> correct(L, 0), seen(L, 0);
        std::vector<double> scores(L);
        const std::vector<int>& label =
            begin == 0 ? train_.label : val_.label;  // both subsets are contiguous
        const size_t label_offset = begin == 0 ? 0 : train_.size();
        for (size_t i = begin; i < end; ++i) {
            scores = m.class_log_prior;
            for (size_t j = 0; j < m.ferns.size(); ++j) {
                const std::uint32_t bin = bins_for(j, candidate)[i];
                const double* row = table_for(j, candidate).data() + static_cast<size_t>(bin) * L;
                for (int c = 0; c < L; ++c) scores[c] += row[c];
            }
            const int pred = argmax_score(scores);
            const int ref = label[i - label_offset] - 1;
            ++seen[ref];
            if (pred == ref) ++correct[ref];
        }
        if (objective == Objective::OverallAccuracy) {
            std::uint64_t c = 0, s = 0;
            for (int k = 0; k < L; ++k) {
                c += correct[k];
                s += seen[k];
            }
            return s == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(s);
        }
        double acc = 0.0;
        int present = 0;
        for (int k = 0; k < L; ++k) {
            if (seen[k] == 0) continue;
            ++present;
            acc += static_cast<double>(correct[k]) / static_cast<double>(seen[k]);
        }
        return present == 0 ? 0.0 : acc / present;
    }

    void commit() {
        for (size_t k = 0; k < cand_ferns_.size(); ++k) {
            const size_t j = static_cast<size_t>(cand_ferns_[k]);
            if (j >= bins_.size()) {
                bins_.push_back(std::move(cand_bins_[k]));
                tables_.push_back(std::move(cand_tables_[k]));
            } else {
                bins_[j] = std::move(cand_bins_[k]);
                tables_[j] = std::move(cand_tables_[k]);
            }
        }
        model_ = std::move(candidate_);
    }

    const PolSarImage& img_;
    const TrainingSet& train_;
    const TrainingSet& val_;
    std::vector<int> pixels_;
    RandomFernsModel model_;
    RandomFernsModel candidate_;
    std::vector<std::vector<std::uint32_t>> bins_;
    std::vector<std::vector<double>> tables_;
    std::vector<int> cand_ferns_;
    std::vector<std::vector<std::uint32_t>> cand_bins_;
    std::vector<std::vector<double>> cand_tables_;
};

}  // namespace detail

/// Greedy structural hill climbing: draw a mutation, keep it only when the
/// validation objective strictly improves. Runs at least it_min iterations
/// and stops once delta_patience consecutive rejections pile up beyond that
/// point.
inline OptimizeResult iterative_optimize(const RandomFernsModel& model0,
                                         const PolSarImage& img, const TrainingSet& train_set,
                                         const TrainingSet& val_set, const IterConfig& cfg,
                                         std::mt19937_64& rng) {
    if (model0.ferns.empty())
        throw std::invalid_argument("iterative_optimize: model has no ferns");
    if (train_set.size() == 0 || val_set.size() == 0)
        throw std::invalid_argument("iterative_optimize: empty train or validation set");
    if (cfg.it_min < 0 || cfg.delta_patience < 1)
        throw std::invalid_argument("iterative_optimize: invalid iteration bounds");

    MutationContext ctx{img, train_set, cfg.features, cfg.new_fern_size, cfg.max_fern_size};
    detail::HillClimbState state(model0, img, train_set, val_set);

    OptimizeResult result;
    double best_val = state.objective_on_val(cfg.objective);
    double cur_train = state.objective_on_train(cfg.objective);
    int iteration = 0;
    int rejects_past_floor = 0;
    for (;;) {
        ++iteration;
        MutationOp op = draw_mutation(state.model(), rng, ctx);
        auto [accepted, val] = state.try_mutation(op, cfg.objective, best_val);
        if (accepted) {
            best_val = val;
            cur_train = state.objective_on_train(cfg.objective);
            rejects_past_floor = 0;
        } else if (iteration > cfg.it_min) {
            ++rejects_past_floor;
        }
        result.trace.push_back({iteration, op.kind, accepted, cur_train, best_val,
                                state.model().feature_count(),
                                static_cast<int>(state.model().ferns.size())});
        if (iteration >= cfg.it_min && rejects_past_floor >= cfg.delta_patience) break;
    }
    result.model = state.model();
    return result;
}

}  // namespace fernseg
