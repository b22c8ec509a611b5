#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "memda/errors.hpp"
#include "memda/trainer.hpp"

using namespace memda;

namespace {

ModelConfig tiny_model(Variant v, int K = 1) {
    ModelConfig c;
    c.variant = v;
    c.alpha = 4;
    c.K = K;
    c.C_e = 6;
    c.hidden = 5;
    c.L = 3;
    c.D = 4;
    c.N_s = 2;
    c.seed = 7;
    return c;
}

UrbanSeries six_day_series(double noise = 0.05, double magnitude = 1.5) {
    DriftConfig dc;
    dc.base_period = 24;
    dc.n_nodes = 3;
    dc.n_days = 6;
    dc.drift_time = 96;
    dc.magnitude = magnitude;
    dc.noise_std = noise;
    dc.seed = 21;
    return generate_synthetic_drift(dc);
}

TrainConfig fast_train(int epochs) {
    TrainConfig tc;
    tc.batch_size = 16;
    tc.max_epochs = epochs;
    tc.patience = epochs;
    tc.seed = 9;
    return tc;
}

std::vector<Tensor> snapshot(Model& m) {
    std::vector<Tensor> out;
    for (Parameter* p : m.parameters()) out.push_back(p->value);
    return out;
}

bool identical(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (long long j = 0; j < a[i].size(); ++j)
            if (a[i][j] != b[i][j]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("metric accumulator oracles") {
    MetricAccumulator acc;
    Tensor t({2}, {1.0, 2.0});
    acc.add(t, t);
    CHECK(acc.rmse() == 0.0);
    CHECK(acc.mae() == 0.0);
    CHECK(acc.mape() == 0.0);

    MetricAccumulator off;
    off.add(Tensor({2}, {2.0, 3.0}), Tensor({2}, {1.0, 2.0}));
    CHECK(off.mae() == 1.0);
    CHECK(off.rmse() == 1.0);

    MetricAccumulator pct;
    pct.add(Tensor({2}, {2.0, 4.0}), Tensor({2}, {1.0, 2.0}));
    CHECK(pct.mape() == doctest::Approx(100.0).epsilon(1e-12));

    MetricAccumulator masked;
    masked.add(Tensor({2}, {5.0, 2.0}), Tensor({2}, {1e-4, 2.0}));
    CHECK(masked.mape() == doctest::Approx(0.0));
    CHECK(masked.mae() == doctest::Approx((5.0 - 1e-4 + 0.0) / 2.0));

    MetricAccumulator all_masked;
    all_masked.add(Tensor({1}, {1.0}), Tensor({1}, {0.0}));
    CHECK_THROWS_AS(all_masked.mape(), Error);

    MetricAccumulator empty;
    CHECK_THROWS_AS(empty.mae(), Error);
    CHECK_THROWS_AS(empty.add(Tensor({2}), Tensor({3})), ShapeError);
}

TEST_CASE("adam converges on a quadratic and zeroes gradients") {
    Parameter w("w", Tensor({1}, {10.0}));
    Adam opt({&w}, 0.1);
    for (int i = 0; i < 500; ++i) {
        w.grad[0] = 2.0 * (w.value[0] - 3.0);
        opt.step(5.0);
        CHECK(w.grad[0] == 0.0);
    }
    CHECK(w.value[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("train config json round-trip rejects unknown keys") {
    TrainConfig tc;
    tc.batch_size = 8;
    tc.learning_rate = 0.01;
    tc.rm_enabled = false;
    const TrainConfig back = train_config_from_json(train_config_to_json(tc));
    CHECK(back.batch_size == 8);
    CHECK(back.learning_rate == 0.01);
    CHECK(back.rm_enabled == false);

    nlohmann::json j = train_config_to_json(tc);
    j["momentum"] = 0.9;
    CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
    j = train_config_to_json(tc);
    j["batch_size"] = 0;
    CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
}

TEST_CASE("prepare_dataset splits, stats, and anchor lists") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    CHECK(d.splits.train.begin == 0);
    CHECK(d.splits.train.end == 77);
    CHECK(d.splits.val.end == 96);
    CHECK(d.splits.test.end == 144);
    CHECK(d.train_anchors.front() == earliest_anchor(4, 24, 1));
    CHECK(d.train_anchors.back() == 77 - 1 - 4);
    CHECK(d.val_anchors.front() == 77);
    CHECK(d.val_anchors.back() == 96 - 1 - 4);
    CHECK(d.test_anchors.front() == 96);
    CHECK(d.test_anchors.back() == 144 - 1 - 4);

    // normalized train range has ~zero mean per node
    for (int i = 0; i < d.norm.N(); ++i) {
        double s = 0.0;
        for (long long t = 0; t < d.splits.train.end; ++t) s += d.norm.values.at(static_cast<int>(t), i, 0);
        CHECK(std::abs(s / static_cast<double>(d.splits.train.end)) < 1e-9);
    }

    // stats ignore everything at or after train.end
    UrbanSeries tweaked = series;
    for (long long t = d.splits.train.end; t < series.T(); ++t)
        for (int i = 0; i < series.N(); ++i) tweaked.values.at(static_cast<int>(t), i, 0) += 100.0;
    Dataset d2 = prepare_dataset(tweaked, 96, 0.2, 4, 1);
    for (long long i = 0; i < d.stats.mean.size(); ++i) {
        CHECK(d2.stats.mean[i] == d.stats.mean[i]);
        CHECK(d2.stats.std[i] == d.stats.std[i]);
    }

    // test range too short for any anchor: kept empty, rejected later at eval
    CHECK(prepare_dataset(series, 141, 0.0, 4, 1).test_anchors.empty());
}

TEST_CASE("training runs, tracks history, and counts encoder calls") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    REQUIRE(d.train_anchors.size() == 46);
    REQUIRE(d.val_anchors.size() == 15);

    Model m{tiny_model(Variant::memda)};
    TrainHistory h = train(m, d, fast_train(3));
    REQUIRE(h.epochs.size() == 3);
    // referenced replay times for anchors 27..91 with K=1: [3, 71]
    CHECK(h.warmup_encoder_calls == 69);
    for (const EpochStats& e : h.epochs) {
        CHECK(std::isfinite(e.train_mae));
        CHECK(std::isfinite(e.val_mae));
        CHECK(e.encoder_calls == 46);  // exactly one live encode per sample
        CHECK(e.seconds == 0.0);       // timing off by default
    }
    CHECK(h.best_epoch >= 1);
    CHECK(h.best_epoch <= 3);
    double best = h.epochs[0].val_mae;
    for (const EpochStats& e : h.epochs) best = std::min(best, e.val_mae);
    CHECK(h.best_mae == best);
}

TEST_CASE("plain mode re-encodes all 2K+1 segments per sample") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model m{tiny_model(Variant::memda)};
    TrainConfig tc = fast_train(2);
    tc.rm_enabled = false;
    TrainHistory h = train(m, d, tc);
    CHECK(h.warmup_encoder_calls == 0);
    for (const EpochStats& e : h.epochs) {
        CHECK(e.encoder_calls == 46 * 3);
        CHECK(std::isnan(e.embedding_drift));
    }
}

TEST_CASE("backbone variant trains without replay, pattern memory, or adaptor") {
    const UrbanSeries series = six_day_series();
    Model m{tiny_model(Variant::backbone)};
    Dataset d = prepare_dataset(series, 96, 0.2, 4, m.config().effective_K());
    CHECK(d.train_anchors.front() == 3);
    TrainHistory h = train(m, d, fast_train(2));
    CHECK(h.warmup_encoder_calls == 0);
    for (const EpochStats& e : h.epochs) CHECK(e.encoder_calls == 70);
}

TEST_CASE("fixed seed twice gives bit-identical parameters and loss curves") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model a{tiny_model(Variant::memda)};
    Model b{tiny_model(Variant::memda)};
    TrainHistory ha = train(a, d, fast_train(3));
    TrainHistory hb = train(b, d, fast_train(3));
    REQUIRE(ha.epochs.size() == hb.epochs.size());
    for (std::size_t i = 0; i < ha.epochs.size(); ++i) {
        CHECK(ha.epochs[i].train_mae == hb.epochs[i].train_mae);
        CHECK(ha.epochs[i].val_mae == hb.epochs[i].val_mae);
    }
    CHECK(identical(snapshot(a), snapshot(b)));
}

TEST_CASE("perturbing the test range leaves training bit-identical") {
    const UrbanSeries series = six_day_series();
    UrbanSeries tweaked = series;
    for (long long t = 96; t < series.T(); ++t)
        for (int i = 0; i < series.N(); ++i) tweaked.values.at(static_cast<int>(t), i, 0) += 100.0;

    Model a{tiny_model(Variant::memda)};
    Model b{tiny_model(Variant::memda)};
    train(a, prepare_dataset(series, 96, 0.2, 4, 1), fast_train(2));
    train(b, prepare_dataset(tweaked, 96, 0.2, 4, 1), fast_train(2));
    CHECK(identical(snapshot(a), snapshot(b)));
}

TEST_CASE("early stopping keeps the best-validation parameters") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model m{tiny_model(Variant::rm)};
    TrainConfig tc = fast_train(30);
    tc.patience = 3;
    TrainHistory h = train(m, d, tc);
    CHECK(h.epochs.size() <= 30);
    CHECK(static_cast<int>(h.epochs.size()) <= h.best_epoch + 3);
    double best = h.epochs[0].val_mae;
    for (const EpochStats& e : h.epochs) best = std::min(best, e.val_mae);
    CHECK(h.best_mae == best);
    CHECK(h.epochs[static_cast<std::size_t>(h.best_epoch - 1)].val_mae == best);
}

TEST_CASE("training diverges loudly on non-finite loss") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model m{tiny_model(Variant::rm)};
    for (Parameter* p : m.parameters())
        if (p->name == "decoder.b2") p->value.fill(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(train(m, d, fast_train(2)), Error);
}

TEST_CASE("empty validation split falls back to train-loss stopping") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.0, 4, 1);
    CHECK(d.val_anchors.empty());
    Model m{tiny_model(Variant::rm)};
    TrainHistory h = train(m, d, fast_train(2));
    for (const EpochStats& e : h.epochs) CHECK(std::isnan(e.val_mae));
    CHECK(h.best_mae == std::min(h.epochs[0].train_mae, h.epochs[1].train_mae));
}

TEST_CASE("online evaluation fills the rolling memory to exactly p*K") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model m{tiny_model(Variant::memda)};
    train(m, d, fast_train(2));

    REQUIRE(d.test_anchors.size() == 44);
    EvalReport r = evaluate_online(m, d, d.test_anchors);
    CHECK(r.anchors == 44);
    CHECK(r.scored == 44);
    CHECK(r.rm_capacity == 24);
    CHECK(r.rm_final_size == 24);
    CHECK(std::isfinite(r.rmse));
    CHECK(r.rmse >= r.mae);
    CHECK(r.mape > 0.0);
    CHECK(r.seconds == 0.0);

    REQUIRE(r.weights.size() == 44);
    for (const WeightSample& ws : r.weights) {
        REQUIRE(ws.w.size() == 6);
        double sum = 0.0;
        for (double w : ws.w) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(!r.per_day.empty());
    long long day_total = 0;
    for (const DayMetrics& dm : r.per_day) {
        CHECK(dm.day >= 4);
        day_total += dm.count;
    }
    CHECK(day_total == r.scored * 4 * 3);
}

TEST_CASE("evaluation guards: order, emptiness, metrics_from") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model m{tiny_model(Variant::rm)};
    train(m, d, fast_train(1));

    CHECK_THROWS_AS(evaluate_online(m, d, {}), ConfigError);
    std::vector<long long> shuffled = d.test_anchors;
    std::swap(shuffled[0], shuffled[1]);
    CHECK_THROWS_AS(evaluate_online(m, d, shuffled), Error);

    EvalOptions opts;
    opts.metrics_from = 120;
    EvalReport r = evaluate_online(m, d, d.test_anchors, opts);
    CHECK(r.anchors == 44);
    CHECK(r.scored == 20);  // anchors 120..139
}

TEST_CASE("pattern memory stays frozen through evaluation") {
    const UrbanSeries series = six_day_series();
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);
    Model m{tiny_model(Variant::memda)};
    train(m, d, fast_train(1));
    const std::vector<Tensor> before = snapshot(m);
    CHECK(m.pattern_memory()->frozen == false);
    evaluate_online(m, d, d.test_anchors);
    CHECK(identical(before, snapshot(m)));
    CHECK(m.pattern_memory()->frozen == false);
}

TEST_CASE("static fusion weights are constant over test anchors, memda's vary") {
    const UrbanSeries series = six_day_series(0.05, 3.0);
    Dataset d = prepare_dataset(series, 96, 0.2, 4, 1);

    Model stat{tiny_model(Variant::rm_pm)};
    train(stat, d, fast_train(2));
    EvalReport rs = evaluate_online(stat, d, d.test_anchors);
    for (const WeightSample& ws : rs.weights)
        for (std::size_t i = 0; i < ws.w.size(); ++i) CHECK(ws.w[i] == rs.weights[0].w[i]);

    Model dyn{tiny_model(Variant::memda)};
    train(dyn, d, fast_train(2));
    EvalReport rd = evaluate_online(dyn, d, d.test_anchors);
    bool varies = false;
    for (const WeightSample& ws : rd.weights)
        for (std::size_t i = 0; i < ws.w.size(); ++i)
            if (ws.w[i] != rd.weights[0].w[i]) varies = true;
    CHECK(varies);
}

TEST_CASE("copy-last-day is exact on a periodic series and shifted by m") {
    DriftConfig dc;
    dc.base_period = 24;
    dc.n_nodes = 2;
    dc.n_days = 4;
    dc.drift_time = 48;
    dc.magnitude = 0.0;  // no drift
    dc.noise_std = 0.0;
    const UrbanSeries periodic = generate_synthetic_drift(dc);
    std::vector<long long> anchors;
    for (long long t = 23; t + 4 < periodic.T(); ++t) anchors.push_back(t);
    EvalReport r = evaluate_copy_last_day(periodic, anchors, 4);
    CHECK(r.mae == 0.0);
    CHECK(r.rmse == 0.0);

    // additive day-over-day shift of exactly 2: dyadic values keep it exact
    UrbanSeries shifted;
    shifted.samples_per_day = 24;
    shifted.start_epoch_s = periodic.start_epoch_s;
    shifted.node_ids = {"a"};
    shifted.values = Tensor({96, 1, 1});
    for (int t = 0; t < 96; ++t)
        shifted.values.at(t, 0, 0) = 4.0 + 0.25 * (t % 24) + 2.0 * (t / 24);
    EvalReport rs = evaluate_copy_last_day(shifted, anchors, 4);
    CHECK(rs.mae == 2.0);
    CHECK(rs.rmse == 2.0);

    CHECK_THROWS_AS(copy_last_day_forecast(periodic, 5, 4), WindowError);
    CHECK_THROWS_AS(copy_last_day_forecast(periodic, periodic.T() + 20, 4), WindowError);
    CHECK_THROWS_AS(evaluate_copy_last_day(periodic, {}, 4), ConfigError);
}

TEST_CASE("memda overfits a tiny noise-free stream") {
    DriftConfig dc;
    dc.base_period = 24;
    dc.n_nodes = 2;
    dc.n_days = 4;
    dc.drift_time = 48;
    dc.magnitude = 0.0;
    dc.noise_std = 0.0;
    dc.seed = 13;
    const UrbanSeries series = generate_synthetic_drift(dc);

    Dataset d = prepare_dataset(series, series.T() - 5, 0.0, 4, 1);
    Model m{tiny_model(Variant::memda)};
    TrainConfig tc;
    tc.batch_size = 16;
    tc.max_epochs = 120;
    tc.patience = 120;
    tc.learning_rate = 0.003;
    tc.seed = 2;
    TrainHistory h = train(m, d, tc);
    CHECK(h.epochs.back().train_mae < 0.05);
}

TEST_CASE("drift augmentation perturbs training without touching replay memory") {
    Dataset d = prepare_dataset(six_day_series(), 96, 0.2, 4, 1);

    // every sample augmented: losses stay finite, no refreshed embeddings
    Model all{tiny_model(Variant::memda)};
    TrainConfig tc = fast_train(2);
    tc.drift_augment = 1.0;
    tc.drift_augment_scale = 0.5;
    TrainHistory h = train(all, d, tc);
    for (const EpochStats& e : h.epochs) {
        CHECK(std::isfinite(e.train_mae));
        CHECK(std::isnan(e.embedding_drift));  // writebacks all skipped
        CHECK(e.encoder_calls == 46);          // accounting unchanged
    }

    // the knob changes what memory-bearing variants learn
    Model clean{tiny_model(Variant::memda)};
    train(clean, d, fast_train(2));
    bool differs = false;
    std::vector<Tensor> a = snapshot(all), c = snapshot(clean);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (long long j = 0; j < a[i].size(); ++j)
            if (a[i][j] != c[i][j]) differs = true;
    CHECK(differs);

    // a model without look-back has no history to contradict; bit-identical
    Model bb1{tiny_model(Variant::backbone)};
    TrainConfig bb_tc = fast_train(2);
    bb_tc.drift_augment = 0.7;
    TrainHistory hb1 = train(bb1, d, bb_tc);
    Model bb2{tiny_model(Variant::backbone)};
    TrainHistory hb2 = train(bb2, d, fast_train(2));
    CHECK(hb1.to_json().dump() == hb2.to_json().dump());
    std::vector<Tensor> b1 = snapshot(bb1), b2 = snapshot(bb2);
    for (std::size_t i = 0; i < b1.size(); ++i)
        for (long long j = 0; j < b1[i].size(); ++j) CHECK(b1[i][j] == b2[i][j]);

    CHECK_THROWS_AS(train_config_from_json({{"drift_augment", 1.5}}), ConfigError);
}
