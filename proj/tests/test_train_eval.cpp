#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fenet/train_eval.hpp"
#include "support/oracles.hpp"

using namespace fenet;

namespace {

std::vector<Tensor> probs_tensor(const std::vector<std::vector<std::array<double, 2>>>& per_head) {
    std::vector<Tensor> out;
    for (const auto& head : per_head) {
        Tensor t(head.size(), 2, 1);
        for (std::size_t b = 0; b < head.size(); ++b) {
            t.at(b, 0, 0) = head[b][0];
            t.at(b, 1, 0) = head[b][1];
        }
        out.push_back(t);
    }
    return out;
}

// two separable clusters by mean RR level; every label in a window agrees
NestedDataset separable_dataset(Rng& rng, std::size_t n_items, int m = 1) {
    NestedDataset ds;
    ds.m = m;
    for (std::size_t i = 0; i < n_items; ++i) {
        int label = static_cast<int>(rng.uniform_int(0, 1));
        NestedSample s;
        s.patient_id = "toy";
        s.center = i;
        s.x.resize(kEpochSeconds);
        double base = label == 1 ? 1.15 : 0.75;
        for (double& v : s.x) v = base + 0.02 * rng.gaussian();
        s.y.assign(2 * static_cast<std::size_t>(m) + 1, label);
        ds.items.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

TEST_CASE("loss weights: lambda2=0.7 puts 0.15 on each neighbour") {
    LossWeights lw = LossWeights::centered(1, 0.7);
    REQUIRE(lw.lambda.size() == 3);
    CHECK(lw.lambda[0] == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(lw.lambda[1] == 0.7);
    CHECK(lw.lambda[2] == doctest::Approx(0.15).epsilon(1e-12));
    CHECK_NOTHROW(lw.validate(3));

    CHECK(LossWeights::centered(0, 0.4).lambda == std::vector<double>{1.0});
    CHECK_THROWS_AS(LossWeights::centered(1, 0.0), Error);
    CHECK_THROWS_AS(LossWeights::centered(1, 1.5), Error);

    LossWeights bad{{0.5, 0.4}};
    CHECK_THROWS_AS(bad.validate(2), Error);  // does not sum to 1
    LossWeights wrong = LossWeights::centered(1, 0.7);
    CHECK_THROWS_AS(wrong.validate(5), Error);  // width mismatch
}

TEST_CASE("loss is zero when confident and ln 2 when uniform") {
    LossWeights lw = LossWeights::centered(1, 0.7);
    std::vector<std::vector<int>> targets{{0, 1, 0}, {1, 1, 1}};

    std::vector<std::vector<std::array<double, 2>>> confident(3);
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t b = 0; b < 2; ++b)
            confident[h].push_back(targets[b][h] == 1 ? std::array<double, 2>{0.0, 1.0}
                                                      : std::array<double, 2>{1.0, 0.0});
    CHECK(weighted_ce_loss(probs_tensor(confident), targets, lw) == 0.0);

    std::vector<std::vector<std::array<double, 2>>> uniform(
        3, std::vector<std::array<double, 2>>(2, {0.5, 0.5}));
    for (double lam2 : {0.9, 0.5, 0.3}) {
        double loss = weighted_ce_loss(probs_tensor(uniform), targets, LossWeights::centered(1, lam2));
        CHECK(std::abs(loss - std::log(2.0)) <= 1e-12);  // weights sum to 1
    }
}

TEST_CASE("loss is monotone in the target-label probability of one head") {
    LossWeights lw = LossWeights::centered(1, 0.7);
    std::vector<std::vector<int>> targets{{1, 1, 1}};
    double prev = 1e300;
    for (double p = 0.1; p < 1.0; p += 0.1) {
        std::vector<std::vector<std::array<double, 2>>> probs(
            3, std::vector<std::array<double, 2>>(1, {0.4, 0.6}));
        probs[1][0] = {1.0 - p, p};
        double loss = weighted_ce_loss(probs_tensor(probs), targets, lw);
        CHECK(loss < prev);
        CHECK(loss >= 0.0);
        prev = loss;
    }
}

TEST_CASE("zero probability at the target is floored, never NaN") {
    LossWeights lw = LossWeights::centered(0, 1.0);
    std::vector<std::vector<int>> targets{{1}};
    std::vector<std::vector<std::array<double, 2>>> probs(1,
                                                          std::vector<std::array<double, 2>>(1, {1.0, 0.0}));
    double loss = weighted_ce_loss(probs_tensor(probs), targets, lw);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("loss gradient w.r.t. logits matches finite differences") {
    Rng rng(301);
    LossWeights lw = LossWeights::centered(1, 0.5);
    const std::size_t n = 5;
    std::vector<Tensor> logits(3, Tensor(n, 2, 1));
    for (auto& t : logits)
        for (double& v : t.v) v = rng.gaussian();
    std::vector<std::vector<int>> targets(n);
    for (auto& t : targets) {
        t.resize(3);
        for (int& v : t) v = static_cast<int>(rng.uniform_int(0, 1));
    }

    auto f = [&]() {
        std::vector<Tensor> probs;
        for (const Tensor& t : logits) probs.push_back(softmax_rows(t));
        return weighted_ce_loss(probs, targets, lw);
    };
    std::vector<Tensor> probs;
    for (const Tensor& t : logits) probs.push_back(softmax_rows(t));
    auto dlogits = weighted_ce_logit_grad(probs, targets, lw);
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t i = 0; i < logits[h].v.size(); ++i)
            CHECK(oracles::grad_matches(dlogits[h].v[i], oracles::central_diff(f, logits[h].v[i]), 1e-6));
}

TEST_CASE("metric arithmetic follows the four definitions") {
    MetricsReport r = MetricsReport::from_counts(4, 3, 2, 1);
    CHECK(*r.acc == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(*r.rec == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(*r.pre == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(*r.spe == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.total() == 10);

    MetricsReport perfect = MetricsReport::from_counts(5, 5, 0, 0);
    CHECK(*perfect.acc == 1.0);
    CHECK(*perfect.rec == 1.0);
    CHECK(*perfect.pre == 1.0);
    CHECK(*perfect.spe == 1.0);
}

TEST_CASE("degenerate denominators surface as not-a-value") {
    MetricsReport none_positive = MetricsReport::from_counts(0, 8, 0, 0);
    CHECK(!none_positive.rec.has_value());  // TP+FN = 0
    CHECK(!none_positive.pre.has_value());  // TP+FP = 0
    CHECK(none_positive.acc.has_value());
    CHECK(metric_str(none_positive.rec) == "NA");

    MetricsReport all_positive = MetricsReport::from_counts(8, 0, 0, 0);
    CHECK(!all_positive.spe.has_value());
    CHECK(MetricsReport{}.total() == 0);
    CHECK(!MetricsReport::from_counts(0, 0, 0, 0).acc.has_value());
}

TEST_CASE("metrics match a confusion-matrix oracle on random pairs") {
    Rng rng(302);
    std::vector<int> pred(5000), truth(5000);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred[i] = static_cast<int>(rng.uniform_int(0, 1));
        truth[i] = static_cast<int>(rng.uniform_int(0, 1));
    }
    MetricsReport r;
    for (std::size_t i = 0; i < pred.size(); ++i) r.add(pred[i], truth[i]);
    r.finalize();
    auto want = oracles::confusion_scan(pred, truth);
    CHECK(r.tp == want.tp);
    CHECK(r.tn == want.tn);
    CHECK(r.fp == want.fp);
    CHECK(r.fn == want.fn);
    CHECK(r.total() == 5000);
    // recomputing each metric from the stored counts reproduces the fields
    CHECK(*r.acc == static_cast<double>(want.tp + want.tn) / 5000.0);
    CHECK(*r.rec == static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fn));
    CHECK(*r.pre == static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp));
    CHECK(*r.spe == static_cast<double>(want.tn) / static_cast<double>(want.tn + want.fp));

    // a label-independent predictor lands near 0.5 accuracy on balanced data
    CHECK(*r.acc >= 0.45);
    CHECK(*r.acc <= 0.55);
}

TEST_CASE("epoch-random split is disjoint, exhaustive and 3:1:1 sized") {
    SplitPlan plan;
    plan.seed = 9;
    EpochSplit s = make_epoch_split(100, plan);
    CHECK(s.train.size() == 60);
    CHECK(s.val.size() == 20);
    CHECK(s.test.size() == 20);

    std::vector<int> seen(100, 0);
    for (std::size_t i : s.train) seen[i]++;
    for (std::size_t i : s.val) seen[i]++;
    for (std::size_t i : s.test) seen[i]++;
    for (int c : seen) CHECK(c == 1);

    EpochSplit odd = make_epoch_split(101, plan);
    CHECK(odd.train.size() + odd.val.size() + odd.test.size() == 101);
    CHECK(std::llabs(static_cast<long long>(odd.train.size()) - 61) <= 1);

    CHECK_THROWS_AS(make_epoch_split(2, plan), Error);
}

TEST_CASE("cold-start folds partition patients") {
    std::vector<std::string> ids;
    for (int i = 0; i < 95; ++i) ids.push_back("p" + std::to_string(i));
    SplitPlan plan;
    plan.kind = SplitPlan::Kind::patient_cold_start;
    plan.folds = 5;
    plan.seed = 21;
    auto folds = make_patient_folds(ids, plan);
    REQUIRE(folds.size() == 5);
    std::map<std::string, int> count;
    for (const auto& f : folds) {
        CHECK(f.size() == 19);  // 95 patients over 5 folds
        for (const auto& id : f) count[id]++;
    }
    CHECK(count.size() == 95);
    for (const auto& [id, c] : count) CHECK(c == 1);  // no patient in two folds

    std::vector<std::string> few{"a", "b", "c"};
    CHECK_THROWS_AS(make_patient_folds(few, plan), Error);
}

TEST_CASE("nested datasets pair kept epochs with label windows") {
    SynthParams sp;
    sp.seed = 77;
    sp.n_minutes = 30;
    sp.apnea_rate = 0.4;
    EpochMatrix em = synth_patient(sp);
    NestedDataset ds = NestedDataset::from_patients({em}, 1);
    CHECK(ds.items.size() == 10);  // 30 epochs, windows of 3
    for (std::size_t k = 0; k < ds.items.size(); ++k) {
        const NestedSample& s = ds.items[k];
        CHECK(s.center == 3 * k + 1);
        CHECK(s.x == em.epochs[s.center]);
        for (int off = -1; off <= 1; ++off)
            CHECK(s.y[static_cast<std::size_t>(off + 1)] ==
                  em.labels[s.center + static_cast<std::size_t>(off)]);
    }

    EpochMatrix partial = em;
    partial.labels[4] = kUnlabeled;  // kills the window centred at 4
    std::size_t dropped = 0;
    NestedDataset ds2 = NestedDataset::from_patients({partial}, 1, &dropped);
    CHECK(dropped == 1);
    CHECK(ds2.items.size() == 9);

    EpochMatrix unlabeled = em;
    unlabeled.labels.clear();
    CHECK_THROWS_AS(NestedDataset::from_patients({unlabeled}, 1), Error);
}

TEST_CASE("tuple-wise and unfolded evaluation agree exactly") {
    std::vector<EpochMatrix> patients;
    for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
        SynthParams sp;
        sp.seed = s;
        sp.n_minutes = 60;
        sp.apnea_rate = 0.35;
        patients.push_back(synth_patient(sp));
    }
    NestedDataset ds = NestedDataset::from_patients(patients, 1);
    FENet model(FENetConfig{});
    model.init_params(5);
    MetricsReport a = evaluate(model, ds);
    MetricsReport b = evaluate_unfolded(model, ds);
    CHECK(a.tp == b.tp);
    CHECK(a.tn == b.tn);
    CHECK(a.fp == b.fp);
    CHECK(a.fn == b.fn);
    CHECK(a.total() == static_cast<long long>(ds.items.size() * 3));
}

TEST_CASE("zero learning rate leaves parameters unchanged and the loss constant") {
    Rng rng(303);
    NestedDataset data = separable_dataset(rng, 64);
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.lr = 0.0;
    cfg.max_epochs = 3;
    cfg.batch_size = 16;
    cfg.shuffle = false;       // identical batches per epoch
    cfg.model.dropout = 0.0;   // no mask resampling across epochs
    cfg.patience = 0;

    FENet reference(cfg.model);
    reference.init_params(cfg.seed);

    TrainResult tr = train(data, nullptr, cfg);
    auto got = tr.model.param_refs();
    auto want = reference.param_refs();
    for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i].trainable) CHECK(*got[i].value == *want[i].value);
    REQUIRE(tr.history.size() == 3);
    CHECK(tr.history[0].train_loss == tr.history[1].train_loss);
    CHECK(tr.history[1].train_loss == tr.history[2].train_loss);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    Rng rng(304);
    NestedDataset data = separable_dataset(rng, 80);
    NestedDataset val = separable_dataset(rng, 30);
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.max_epochs = 3;
    cfg.batch_size = 16;
    cfg.patience = 0;

    TrainResult a = train(data, &val, cfg);
    TrainResult b = train(data, &val, cfg);
    auto ra = a.model.param_refs();
    auto rb = b.model.param_refs();
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(*ra[i].value == *rb[i].value);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i)
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
}

TEST_CASE("training loss strictly decreases on a separable task") {
    Rng rng(305);
    NestedDataset data = separable_dataset(rng, 256);
    TrainConfig cfg;
    cfg.seed = 8;
    cfg.max_epochs = 5;
    cfg.batch_size = 32;
    cfg.patience = 0;
    TrainResult tr = train(data, nullptr, cfg);
    REQUIRE(tr.history.size() == 5);
    for (std::size_t e = 1; e < tr.history.size(); ++e)
        CHECK(tr.history[e].train_loss < tr.history[e - 1].train_loss);
    // and it actually learns the task
    MetricsReport r = evaluate(tr.model, data);
    CHECK(*r.acc > 0.95);
}

TEST_CASE("patience does not fire while the model is still a constant predictor") {
    // small data keeps the network in its initial one-class phase for several
    // epochs; early stopping must wait for a real detector before counting
    std::vector<EpochMatrix> patients;
    for (std::uint64_t s : {21ULL, 22ULL, 23ULL}) {
        SynthParams sp;
        sp.seed = s;
        sp.n_minutes = 120;
        sp.apnea_rate = 0.4;
        patients.push_back(synth_patient(sp));
    }
    NestedDataset all = NestedDataset::from_patients(patients, 1);
    SplitPlan plan;
    plan.seed = 2;
    EpochSplit es = make_epoch_split(all.size(), plan);
    NestedDataset train_set = all.subset(es.train);
    NestedDataset val_set = all.subset(es.val);

    TrainConfig cfg;
    cfg.seed = 33;
    cfg.max_epochs = 40;
    cfg.patience = 3;  // would stop at epoch 4 if junk epochs counted
    TrainResult tr = train(train_set, &val_set, cfg);
    MetricsReport r = evaluate(tr.model, val_set);
    CHECK(!detail::constant_prediction(r));
    CHECK(tr.history.size() > 4);
}

TEST_CASE("training rejects empty splits and aborts on divergence") {
    NestedDataset empty;
    empty.m = 1;
    TrainConfig cfg;
    CHECK_THROWS_AS(train(empty, nullptr, cfg), Error);

    Rng rng(306);
    NestedDataset data = separable_dataset(rng, 32);
    cfg.lr = 1e9;  // blows up within a few steps
    cfg.max_epochs = 40;
    cfg.patience = 0;
    try {
        train(data, nullptr, cfg);
        // a run that survives a 1e9 learning rate without a non-finite loss is
        // acceptable; divergence is not guaranteed, only detected
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}

TEST_CASE("grid search covers the full grid and selects by recall") {
    Rng rng(307);
    NestedDataset data = separable_dataset(rng, 60);
    NestedDataset val = separable_dataset(rng, 24);
    TrainConfig base;
    base.seed = 3;
    base.max_epochs = 1;
    base.batch_size = 16;
    base.patience = 0;

    GridSpec full;  // 4 x 4 x 3
    GridSearchResult gs = grid_search(data, val, base, full);
    CHECK(gs.runs.size() == 48);
    for (std::size_t i = 0; i < gs.runs.size(); ++i) CHECK(gs.runs[i].run_id == i);
    // argmax invariant under the guarded (recall, accuracy) ordering
    for (const GridRunResult& r : gs.runs)
        CHECK(detail::val_score(gs.runs[gs.best_index].val) >= detail::val_score(r.val));

    GridSpec one;
    one.lambda2 = {0.7};
    one.l = {1};
    one.w = {3};
    GridSearchResult single = grid_search(data, val, base, one);
    CHECK(single.runs.size() == 1);
    CHECK(single.best_index == 0);
    CHECK(single.runs[0].l == 1);
}

TEST_CASE("grid search results do not depend on the worker count") {
    Rng rng(308);
    NestedDataset data = separable_dataset(rng, 48);
    NestedDataset val = separable_dataset(rng, 24);
    TrainConfig base;
    base.seed = 19;
    base.max_epochs = 1;
    base.batch_size = 16;
    base.patience = 0;
    GridSpec grids;
    grids.lambda2 = {0.9, 0.5};
    grids.l = {1, 2};
    grids.w = {3};

    GridSearchResult serial = grid_search(data, val, base, grids, 1);
    GridSearchResult parallel = grid_search(data, val, base, grids, 3);
    REQUIRE(serial.runs.size() == parallel.runs.size());
    CHECK(serial.best_index == parallel.best_index);
    for (std::size_t i = 0; i < serial.runs.size(); ++i) {
        CHECK(serial.runs[i].val.tp == parallel.runs[i].val.tp);
        CHECK(serial.runs[i].val.fn == parallel.runs[i].val.fn);
        CHECK(serial.runs[i].val.fp == parallel.runs[i].val.fp);
        CHECK(serial.runs[i].val.tn == parallel.runs[i].val.tn);
    }
    auto ra = serial.best.model.param_refs();
    auto rb = parallel.best.model.param_refs();
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(*ra[i].value == *rb[i].value);
}

TEST_CASE("config files parse and reject unknown keys") {
    auto path = (std::filesystem::temp_directory_path() / "fenet_train_cfg_test.cfg").string();
    {
        std::ofstream out(path);
        out << "# training config\nseed=7\nm=2\nlambda2=0.5\nbatch_size=32\nlr=0.002\n"
            << "max_epochs=20\npatience=4\nsplit=epoch_random\nratios=3:1:1\n"
            << "grid_lambda2=0.9,0.7\ngrid_l=1,2\ngrid_w=3\nworkers=2\nd1=3,4,5,6\n";
    }
    RunConfig rc = parse_config_file(path);
    CHECK(rc.train.seed == 7);
    CHECK(rc.train.model.m == 2);
    CHECK(rc.train.lambda_center == 0.5);
    CHECK(rc.train.batch_size == 32);
    CHECK(rc.train.lr == 0.002);
    CHECK(rc.train.max_epochs == 20);
    CHECK(rc.train.patience == 4);
    CHECK(rc.grids.lambda2 == std::vector<double>{0.9, 0.7});
    CHECK(rc.grids.l == std::vector<int>{1, 2});
    CHECK(rc.workers == 2);
    std::filesystem::remove(path);

    {
        std::ofstream out(path);
        out << "not_a_key=1\n";
    }
    try {
        parse_config_file(path);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
    std::filesystem::remove(path);
}

TEST_CASE("metrics csv lines carry NA for degenerate fields") {
    MetricsReport r = MetricsReport::from_counts(0, 10, 0, 0);
    std::string line = metrics_csv_line(3, "lambda2=0.7;l=1;w=3", "val", r, 1.25);
    CHECK(line.find("NA") != std::string::npos);
    CHECK(line.find("lambda2=0.7;l=1;w=3") != std::string::npos);
    CHECK(metrics_csv_header().find("wall_seconds") != std::string::npos);
}
