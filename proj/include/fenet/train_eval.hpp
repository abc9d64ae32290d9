#pragma once

// Weighted multi-head cross-entropy, mini-batch Adam training with early
// stopping, the four detection metrics, dataset splits (epoch-level 3:1:1 and
// patient-level cold-start folds) and hyperparameter grid search.

#include <atomic>
#include <chrono>
#include <map>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "fenet/adam.hpp"
#include "fenet/common.hpp"
#include "fenet/model.hpp"
#include "fenet/rr_signal.hpp"

namespace fenet {

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline constexpr double kProbFloor = 1e-12;

struct LossWeights {
    std::vector<double> lambda;  // one weight per head, offsets -m..+m

    // center weight lambda_0; the 2m side weights share (1-lambda_0) equally
    static LossWeights centered(int m, double center_weight) {
        require(m >= 0, ErrorKind::invalid_input, "LossWeights: m must be >= 0");
        if (m == 0) return LossWeights{{1.0}};
        require(center_weight > 0.0 && center_weight <= 1.0, ErrorKind::invalid_input,
                "LossWeights: center weight must be in (0,1]");
        LossWeights lw;
        lw.lambda.assign(2 * static_cast<std::size_t>(m) + 1, (1.0 - center_weight) / (2.0 * m));
        lw.lambda[static_cast<std::size_t>(m)] = center_weight;
        return lw;
    }

    void validate(std::size_t heads) const {
        require(lambda.size() == heads, ErrorKind::invalid_input,
                "LossWeights: " + std::to_string(lambda.size()) + " weights for " + std::to_string(heads) +
                    " heads");
        double sum = 0.0;
        for (double l : lambda) {
            require(l >= 0.0, ErrorKind::invalid_input, "LossWeights: negative weight");
            sum += l;
        }
        require(std::abs(sum - 1.0) <= 1e-12, ErrorKind::invalid_input,
                "LossWeights: weights must sum to 1, got " + std::to_string(sum));
    }
};

// Mean over samples of sum_h lambda_h * (-log P_h(label = a_h)).
// probs: one (n,2,1) tensor per head; targets: per sample, one label per head.
inline double weighted_ce_loss(const std::vector<Tensor>& probs,
                               const std::vector<std::vector<int>>& targets, const LossWeights& lw) {
    lw.validate(probs.size());
    require(!probs.empty() && probs[0].n == targets.size(), ErrorKind::invalid_input,
            "weighted_ce_loss: batch size mismatch");
    const std::size_t n = targets.size();
    double total = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        require(targets[b].size() == probs.size(), ErrorKind::invalid_input,
                "weighted_ce_loss: target width mismatch");
        for (std::size_t h = 0; h < probs.size(); ++h) {
            int a = targets[b][h];
            require(a == 0 || a == 1, ErrorKind::invalid_input, "weighted_ce_loss: target must be 0 or 1");
            double p = probs[h].at(b, static_cast<std::size_t>(a), 0);
            total += lw.lambda[h] * -std::log(std::max(p, kProbFloor));
        }
    }
    return total / static_cast<double>(n);
}

// Gradient of the mean loss w.r.t. per-head logits (softmax folded in):
// dlogit_j = lambda_h * (p_j - [j == a_h]) / n.
inline std::vector<Tensor> weighted_ce_logit_grad(const std::vector<Tensor>& probs,
                                                  const std::vector<std::vector<int>>& targets,
                                                  const LossWeights& lw) {
    const std::size_t n = targets.size();
    std::vector<Tensor> dlogits(probs.size());
    for (std::size_t h = 0; h < probs.size(); ++h) {
        dlogits[h] = Tensor::zeros_like(probs[h]);
        for (std::size_t b = 0; b < n; ++b) {
            const int a = targets[b][h];
            for (std::size_t j = 0; j < 2; ++j) {
                double p = probs[h].at(b, j, 0);
                dlogits[h].at(b, j, 0) =
                    lw.lambda[h] * (p - (static_cast<int>(j) == a ? 1.0 : 0.0)) / static_cast<double>(n);
            }
        }
    }
    return dlogits;
}

// ---------------------------------------------------------------------------
// Metrics (positive class = apnea = 1)
// ---------------------------------------------------------------------------

struct MetricsReport {
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    std::optional<double> acc, rec, pre, spe;

    long long total() const { return tp + tn + fp + fn; }

    void add(int predicted, int truth) {
        if (truth == 1)
            predicted == 1 ? ++tp : ++fn;
        else
            predicted == 0 ? ++tn : ++fp;
    }

    // Degenerate denominators stay unset rather than reading as 0.
    void finalize() {
        auto ratio = [](long long num, long long den) -> std::optional<double> {
            if (den == 0) return std::nullopt;
            return static_cast<double>(num) / static_cast<double>(den);
        };
        acc = ratio(tp + tn, total());
        rec = ratio(tp, tp + fn);
        pre = ratio(tp, tp + fp);
        spe = ratio(tn, tn + fp);
    }

    static MetricsReport from_counts(long long tp_, long long tn_, long long fp_, long long fn_) {
        MetricsReport r;
        r.tp = tp_;
        r.tn = tn_;
        r.fp = fp_;
        r.fn = fn_;
        r.finalize();
        return r;
    }
};

inline std::string metric_str(const std::optional<double>& v) {
    if (!v) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

// ---------------------------------------------------------------------------
// Nested datasets (kept epoch + 2m+1 target labels)
// ---------------------------------------------------------------------------

struct NestedSample {
    std::vector<double> x;  // 60 RR values of the sensed epoch
    std::vector<int> y;     // 2m+1 labels
    std::string patient_id;
    std::size_t center = 0;  // 0-based epoch index of the sensed epoch
};

struct NestedDataset {
    int m = 1;
    std::vector<NestedSample> items;

    std::size_t size() const { return items.size(); }

    // Downsample + nest every labeled patient record. Windows containing an
    // unlabeled epoch are dropped (counted in *dropped when given).
    static NestedDataset from_patients(const std::vector<EpochMatrix>& patients, int m,
                                       std::size_t* dropped = nullptr) {
        NestedDataset ds;
        ds.m = m;
        for (const EpochMatrix& em : patients) {
            require(em.labeled(), ErrorKind::invalid_input,
                    "NestedDataset: patient '" + em.patient_id + "' has no labels");
            DiscontinuousSequence seq = downsample(em, m);
            NestedLabelSeq nested = nest_labels(em.labels, m, em.patient_id);
            require(seq.kept_indices.size() == nested.entries.size(), ErrorKind::invalid_input,
                    "NestedDataset: window count mismatch");
            for (std::size_t k = 0; k < seq.kept_indices.size(); ++k) {
                bool has_unknown = false;
                for (int a : nested.entries[k]) has_unknown = has_unknown || a == kUnlabeled;
                if (has_unknown) {
                    if (dropped != nullptr) ++*dropped;
                    continue;
                }
                ds.items.push_back(
                    NestedSample{seq.epochs[k], nested.entries[k], em.patient_id, seq.kept_indices[k]});
            }
        }
        return ds;
    }

    NestedDataset subset(const std::vector<std::size_t>& idx) const {
        NestedDataset out;
        out.m = m;
        out.items.reserve(idx.size());
        for (std::size_t i : idx) out.items.push_back(items.at(i));
        return out;
    }
};

inline Tensor batch_tensor(const NestedDataset& ds, const std::vector<std::size_t>& idx) {
    Tensor x(idx.size(), 1, kEpochSeconds);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const NestedSample& s = ds.items.at(idx[b]);
        require(s.x.size() == kEpochSeconds, ErrorKind::invalid_input, "batch_tensor: bad epoch width");
        for (std::size_t j = 0; j < kEpochSeconds; ++j) x.at(b, 0, j) = s.x[j];
    }
    return x;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Tuple-wise evaluation: every head prediction is compared with its target.
inline MetricsReport evaluate(FENet& model, const NestedDataset& data) {
    require(data.m == model.cfg.m, ErrorKind::config, "evaluate: dataset m does not match model m");
    MetricsReport r;
    const std::size_t chunk = 512;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        std::size_t end = std::min(start + chunk, data.size());
        std::vector<std::size_t> idx(end - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        Tensor x = batch_tensor(data, idx);
        auto outs = model.classify(x);
        for (std::size_t b = 0; b < idx.size(); ++b)
            for (std::size_t h = 0; h < model.cfg.heads(); ++h)
                r.add(outs[b].head_labels[h], data.items[idx[b]].y[h]);
    }
    r.finalize();
    return r;
}

// Same counts, computed on the unfolded flat timelines per patient. Kept as an
// independent path; must agree with evaluate() exactly.
inline MetricsReport evaluate_unfolded(FENet& model, const NestedDataset& data) {
    require(data.m == model.cfg.m, ErrorKind::config, "evaluate_unfolded: dataset m mismatch");
    std::vector<std::string> order;
    std::map<std::string, NestedLabelSeq> pred, truth;
    const std::size_t chunk = 512;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        std::size_t end = std::min(start + chunk, data.size());
        std::vector<std::size_t> idx(end - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        Tensor x = batch_tensor(data, idx);
        auto outs = model.classify(x);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const NestedSample& s = data.items[idx[b]];
            if (pred.find(s.patient_id) == pred.end()) {
                order.push_back(s.patient_id);
                pred[s.patient_id] = NestedLabelSeq{s.patient_id, data.m, {}};
                truth[s.patient_id] = NestedLabelSeq{s.patient_id, data.m, {}};
            }
            pred[s.patient_id].entries.push_back(outs[b].head_labels);
            truth[s.patient_id].entries.push_back(s.y);
        }
    }
    MetricsReport r;
    for (const std::string& pid : order) {
        std::vector<int> p = unfold_labels(pred[pid]);
        std::vector<int> t = unfold_labels(truth[pid]);
        for (std::size_t i = 0; i < p.size(); ++i) r.add(p[i], t[i]);
    }
    r.finalize();
    return r;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitPlan {
    enum class Kind { epoch_random, patient_cold_start };
    Kind kind = Kind::epoch_random;
    double train_ratio = 3.0, val_ratio = 1.0, test_ratio = 1.0;  // normalized on use
    std::size_t folds = 5;
    std::uint64_t seed = 1;
};

struct EpochSplit {
    std::vector<std::size_t> train, val, test;
};

inline EpochSplit make_epoch_split(std::size_t n, const SplitPlan& plan) {
    require(n >= 3, ErrorKind::config, "make_epoch_split: need at least 3 samples");
    const double total = plan.train_ratio + plan.val_ratio + plan.test_ratio;
    require(total > 0.0 && plan.train_ratio > 0.0, ErrorKind::config, "make_epoch_split: bad ratios");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(plan.seed);
    rng.shuffle(idx);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * plan.train_ratio / total));
    const std::size_t n_val =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * plan.val_ratio / total));
    require(n_train >= 1 && n_train + n_val < n, ErrorKind::config,
            "make_epoch_split: ratios leave an empty split for n=" + std::to_string(n));
    EpochSplit s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    return s;
}

// Partition of patient ids into test folds; every patient lands in exactly one.
inline std::vector<std::vector<std::string>> make_patient_folds(std::vector<std::string> patient_ids,
                                                                const SplitPlan& plan) {
    require(plan.folds >= 2, ErrorKind::config, "make_patient_folds: need at least 2 folds");
    require(patient_ids.size() >= plan.folds, ErrorKind::config,
            "make_patient_folds: " + std::to_string(patient_ids.size()) + " patients for " +
                std::to_string(plan.folds) + " folds");
    Rng rng(plan.seed);
    rng.shuffle(patient_ids);
    std::vector<std::vector<std::string>> folds(plan.folds);
    for (std::size_t i = 0; i < patient_ids.size(); ++i) folds[i % plan.folds].push_back(patient_ids[i]);
    return folds;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::uint64_t seed = 1;
    FENetConfig model;
    double lambda_center = 0.7;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;  // 0 disables early stopping
    bool shuffle = true;

    void validate() const {
        model.validate();
        require(batch_size >= 2, ErrorKind::config, "train: batch size must be >= 2");
        require(max_epochs >= 1, ErrorKind::config, "train: max_epochs must be >= 1");
        require(lr >= 0.0, ErrorKind::config, "train: negative learning rate");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<MetricsReport> val;
    double wall_seconds = 0.0;
};

struct TrainResult {
    FENet model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

namespace detail {

inline std::vector<std::vector<int>> batch_targets(const NestedDataset& ds,
                                                   const std::vector<std::size_t>& idx) {
    std::vector<std::vector<int>> t;
    t.reserve(idx.size());
    for (std::size_t i : idx) t.push_back(ds.items.at(i).y);
    return t;
}

// A constant predictor (never emits one of the classes) maximizes recall or
// specificity trivially; recall-first selection must not reward it.
inline bool constant_prediction(const MetricsReport& r) {
    return (r.tn + r.fn == 0) || (r.tp + r.fp == 0);
}

// Selection score: recall first, accuracy as the tie-break. Candidates must be
// real detectors: non-constant output and accuracy no worse than guessing the
// majority class, else recall 1.0 from calling everything positive wins every
// comparison.
inline std::pair<double, double> val_score(const MetricsReport& r) {
    const long long pos = r.tp + r.fn, neg = r.tn + r.fp;
    if (constant_prediction(r) || r.total() == 0) return {-2.0, -2.0};
    const double baseline = static_cast<double>(std::max(pos, neg)) / static_cast<double>(r.total());
    const double acc = r.acc.value_or(-1.0);
    if (acc < baseline) return {-2.0, -2.0};
    return {r.rec.value_or(-1.0), acc};
}

}  // namespace detail

// Deterministic for a fixed seed. Validation (when given) drives early
// stopping on the recall plateau; without it the loop runs max_epochs flat.
inline TrainResult train(const NestedDataset& train_set, const NestedDataset* val_set,
                         const TrainConfig& cfg) {
    cfg.validate();
    require(!train_set.items.empty(), ErrorKind::config, "train: empty training split");
    require(train_set.items.size() >= 2, ErrorKind::config, "train: need at least 2 samples");
    require(train_set.m == cfg.model.m, ErrorKind::config, "train: dataset m does not match model m");

    FENet model(cfg.model);
    model.init_params(cfg.seed);
    LossWeights lw = LossWeights::centered(cfg.model.m, cfg.lambda_center);

    Rng master(cfg.seed);
    Rng shuffle_rng = master.fork(1);
    Rng dropout_rng = master.fork(2);

    AdamState adam;
    adam.lr = cfg.lr;

    auto refs = model.param_refs();
    std::size_t flat_size = 0;
    for (const ParamRef& r : refs)
        if (r.trainable) flat_size += r.value->size();
    std::vector<double> flat_p(flat_size), flat_g(flat_size);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    FENet best_model = model;
    // score of a real detector is > kUnqualified; the recall plateau is only
    // counted once one exists, else patience would stop runs that are still
    // escaping the initial constant-prediction phase
    const std::pair<double, double> kUnqualified{-2.0, -2.0};
    std::pair<double, double> best_score = kUnqualified;
    bool have_best = false;
    std::size_t best_epoch = 0, since_best = 0;
    const auto t0 = std::chrono::steady_clock::now();

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.shuffle) shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, order.size());
            if (end - start < 2) continue;  // batch norm needs >= 2 samples
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            Tensor x = batch_tensor(train_set, idx);
            auto targets = detail::batch_targets(train_set, idx);

            ForwardTrace tr = model.forward(x, true, &dropout_rng);
            double loss = weighted_ce_loss(tr.probs, targets, lw);
            require(std::isfinite(loss), ErrorKind::numeric,
                    "train: diverged (non-finite loss) at epoch " + std::to_string(epoch));
            loss_sum += loss * static_cast<double>(idx.size());
            loss_count += idx.size();

            model.zero_grad();
            model.backward(tr, weighted_ce_logit_grad(tr.probs, targets, lw));

            std::size_t off = 0;
            for (const ParamRef& r : refs) {
                if (!r.trainable) continue;
                std::copy(r.value->begin(), r.value->end(), flat_p.begin() + static_cast<std::ptrdiff_t>(off));
                std::copy(r.grad->begin(), r.grad->end(), flat_g.begin() + static_cast<std::ptrdiff_t>(off));
                off += r.value->size();
            }
            adam_step(flat_p, flat_g, adam);
            off = 0;
            for (const ParamRef& r : refs) {
                if (!r.trainable) continue;
                std::copy(flat_p.begin() + static_cast<std::ptrdiff_t>(off),
                          flat_p.begin() + static_cast<std::ptrdiff_t>(off + r.value->size()),
                          r.value->begin());
                off += r.value->size();
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        if (val_set != nullptr) rec.val = evaluate(model, *val_set);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);

        if (val_set != nullptr) {
            auto score = detail::val_score(*rec.val);
            if (score > kUnqualified && score > best_score) {
                best_score = score;
                best_model = model;
                best_epoch = epoch;
                have_best = true;
                since_best = 0;
            } else if (have_best) {
                ++since_best;
            }
            if (cfg.patience > 0 && have_best && since_best >= cfg.patience) break;
        }
    }

    if (val_set != nullptr && have_best) {
        result.model = std::move(best_model);
        result.best_epoch = best_epoch;
    } else {
        result.model = std::move(model);
        result.best_epoch = result.history.size();
    }
    return result;
}

// ---------------------------------------------------------------------------
// Grid search (lambda2 x l x w), selected by validation recall then accuracy
// ---------------------------------------------------------------------------

struct GridSpec {
    std::vector<double> lambda2{0.9, 0.7, 0.5, 0.3};
    std::vector<int> l{1, 2, 3, 4};
    std::vector<int> w{3, 5, 7};
};

struct GridRunResult {
    std::size_t run_id = 0;
    double lambda2 = 0.0;
    int l = 0;
    int w = 0;
    MetricsReport val;
    double wall_seconds = 0.0;
};

struct GridSearchResult {
    std::vector<GridRunResult> runs;
    std::size_t best_index = 0;
    TrainResult best;
};

inline std::string grid_point_str(double lambda2, int l, int w) {
    std::ostringstream os;
    os << "lambda2=" << lambda2 << ";l=" << l << ";w=" << w;
    return os.str();
}

// Runs are independent; per-run seeds derive from (base seed, run id) so the
// result table is identical for any worker count.
inline GridSearchResult grid_search(const NestedDataset& train_set, const NestedDataset& val_set,
                                    const TrainConfig& base, const GridSpec& grids,
                                    std::size_t workers = 1) {
    require(!grids.lambda2.empty() && !grids.l.empty() && !grids.w.empty(), ErrorKind::config,
            "grid_search: empty grid");
    struct Point {
        double lambda2;
        int l;
        int w;
    };
    std::vector<Point> points;
    for (double lam : grids.lambda2)
        for (int l : grids.l)
            for (int w : grids.w) points.push_back(Point{lam, l, w});

    std::vector<GridRunResult> runs(points.size());
    std::vector<TrainResult> results(points.size());

    auto run_one = [&](std::size_t i) {
        TrainConfig cfg = base;
        cfg.lambda_center = points[i].lambda2;
        cfg.model.l = points[i].l;
        cfg.model.w = points[i].w;
        cfg.seed = splitmix64(base.seed ^ splitmix64(i + 1));
        const auto t0 = std::chrono::steady_clock::now();
        results[i] = train(train_set, &val_set, cfg);
        GridRunResult& r = runs[i];
        r.run_id = i;
        r.lambda2 = points[i].lambda2;
        r.l = points[i].l;
        r.w = points[i].w;
        r.val = evaluate(results[i].model, val_set);
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < points.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) run_one(i);
        };
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(workers, points.size()); ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    auto key = [](const GridRunResult& r) { return detail::val_score(r.val); };
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (key(runs[i]) > key(runs[best])) best = i;

    GridSearchResult out;
    out.runs = std::move(runs);
    out.best_index = best;
    out.best = std::move(results[best]);
    return out;
}

// ---------------------------------------------------------------------------
// History / metrics lines:
//   run_id, grid point, split, TP, TN, FP, FN, Acc, Rec, Pre, Spe, wall_seconds
// ---------------------------------------------------------------------------

inline std::string metrics_csv_header() {
    return "run_id,grid_point,split,TP,TN,FP,FN,Acc,Rec,Pre,Spe,wall_seconds";
}

inline std::string metrics_csv_line(std::size_t run_id, const std::string& grid_point,
                                    const std::string& split, const MetricsReport& r,
                                    double wall_seconds) {
    std::ostringstream os;
    os << run_id << ',' << grid_point << ',' << split << ',' << r.tp << ',' << r.tn << ',' << r.fp << ','
       << r.fn << ',' << metric_str(r.acc) << ',' << metric_str(r.rec) << ',' << metric_str(r.pre) << ','
       << metric_str(r.spe) << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", wall_seconds);
    os << buf;
    return os.str();
}

// ---------------------------------------------------------------------------
// Training config files: key=value lines, '#' comments
// ---------------------------------------------------------------------------

struct RunConfig {
    TrainConfig train;
    SplitPlan split;
    GridSpec grids;
    std::size_t workers = 1;
};

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open config file: " + path);
    RunConfig rc;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const std::string at = path + ":" + std::to_string(lineno);
        auto eq = s.find('=');
        require(eq != std::string_view::npos, ErrorKind::parse, at + ": expected key=value");
        std::string key(trim(s.substr(0, eq)));
        std::string_view val = trim(s.substr(eq + 1));

        auto int_list = [&](std::string_view v) {
            std::vector<int> out;
            for (auto f : split(v, ',')) out.push_back(static_cast<int>(parse_int(f, at)));
            return out;
        };
        auto double_list = [&](std::string_view v) {
            std::vector<double> out;
            for (auto f : split(v, ',')) out.push_back(parse_double(f, at));
            return out;
        };

        if (key == "seed") {
            rc.train.seed = static_cast<std::uint64_t>(parse_int(val, at));
            rc.split.seed = rc.train.seed;
        } else if (key == "m") {
            rc.train.model.m = static_cast<int>(parse_int(val, at));
        } else if (key == "w") {
            rc.train.model.w = static_cast<int>(parse_int(val, at));
        } else if (key == "l") {
            rc.train.model.l = static_cast<int>(parse_int(val, at));
        } else if (key == "d1") {
            rc.train.model.d1 = int_list(val);
        } else if (key == "dropout") {
            rc.train.model.dropout = parse_double(val, at);
        } else if (key == "lambda2") {
            rc.train.lambda_center = parse_double(val, at);
        } else if (key == "batch_size") {
            rc.train.batch_size = static_cast<std::size_t>(parse_int(val, at));
        } else if (key == "lr") {
            rc.train.lr = parse_double(val, at);
        } else if (key == "max_epochs") {
            rc.train.max_epochs = static_cast<std::size_t>(parse_int(val, at));
        } else if (key == "patience") {
            rc.train.patience = static_cast<std::size_t>(parse_int(val, at));
        } else if (key == "shuffle") {
            rc.train.shuffle = parse_int(val, at) != 0;
        } else if (key == "split") {
            if (val == "epoch_random")
                rc.split.kind = SplitPlan::Kind::epoch_random;
            else if (val == "cold_start")
                rc.split.kind = SplitPlan::Kind::patient_cold_start;
            else
                fail(ErrorKind::config, at + ": split must be epoch_random or cold_start");
        } else if (key == "ratios") {
            auto parts = split(val, ':');
            require(parts.size() == 3, ErrorKind::config, at + ": ratios must be train:val:test");
            rc.split.train_ratio = parse_double(parts[0], at);
            rc.split.val_ratio = parse_double(parts[1], at);
            rc.split.test_ratio = parse_double(parts[2], at);
        } else if (key == "folds") {
            rc.split.folds = static_cast<std::size_t>(parse_int(val, at));
        } else if (key == "grid_lambda2") {
            rc.grids.lambda2 = double_list(val);
        } else if (key == "grid_l") {
            rc.grids.l = int_list(val);
        } else if (key == "grid_w") {
            rc.grids.w = int_list(val);
        } else if (key == "workers") {
            rc.workers = static_cast<std::size_t>(parse_int(val, at));
        } else {
            fail(ErrorKind::config, at + ": unknown key '" + key + "'");
        }
    }
    rc.train.validate();
    return rc;
}

}  // namespace fenet
