#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "memda/data.hpp"
#include "memda/metrics.hpp"
#include "memda/model.hpp"
#include "memda/replay_memory.hpp"

namespace memda {

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 0.001;
    int max_epochs = 200;
    int patience = 15;
    std::uint64_t seed = 0;
    bool rm_enabled = true;  // false: live-encode all 2K+1 segments every sample
    double grad_clip = 5.0;
    bool verbose = false;
    bool record_timing = false;  // off keeps history files bit-reproducible

    /// Probability of replaying a sample as a surprise regime change: the
    /// current-day segment and its target get a shared random affine shift
    /// while the look-back segments stay untouched. The fusion machinery
    /// only ever sees benign, stationary history otherwise, so this is what
    /// teaches it to move weight onto the current day when history stops
    /// matching. Augmented embeddings are never written to replay memory.
    /// Models without look-back segments have no history to contradict, so
    /// the knob is ignored for them.
    double drift_augment = 0.0;
    double drift_augment_scale = 1.0;  // offset scale, in normalized units

    void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = TrainConfig{});
nlohmann::json train_config_to_json(const TrainConfig& c);

/// Raw series plus its normalized twin and the anchor lists for each split.
/// Normalization stats come from the train range only.
struct Dataset {
    UrbanSeries raw;
    UrbanSeries norm;
    NormalizationStats stats;
    SplitRanges splits;
    std::vector<long long> train_anchors;
    std::vector<long long> val_anchors;  // empty when val_fraction == 0
    std::vector<long long> test_anchors;
};

Dataset prepare_dataset(const UrbanSeries& series, long long train_end, double val_fraction,
                        int alpha, int K);

struct EpochStats {
    int epoch = 0;
    double train_mae = 0.0;
    double val_mae = 0.0;          // NaN when there is no validation split
    double embedding_drift = 0.0;  // mean relative change of refreshed embeddings; NaN without RM
    long long encoder_calls = 0;   // training pass only
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
    double best_mae = 0.0;  // the early-stopping metric at best_epoch
    long long warmup_encoder_calls = 0;
    double seconds = 0.0;

    nlohmann::json to_json() const;
};

/// Adaptive-moment stochastic optimizer over bound parameters.
class Adam {
public:
    Adam(std::vector<Parameter*> params, double lr);

    /// Applies accumulated gradients (after optional global-norm clipping)
    /// and zeroes them.
    void step(double clip_norm);

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    double lr_;
    long long t_ = 0;
};

/// MAE-loss training with random batches, a warm-up embedding pass, between-
/// epoch replay refresh, and early stopping on validation MAE (train MAE when
/// no validation split exists). The model is left holding the best-epoch
/// parameters.
TrainHistory train(Model& model, const Dataset& data, const TrainConfig& cfg);

struct EvalOptions {
    long long metrics_from = -1;  // score only anchors >= this index (-1: all)
    bool record_weights = true;
    bool record_timing = false;
};

struct DayMetrics {
    long long day = 0;
    long long count = 0;
    double rmse = 0.0, mae = 0.0, mape = 0.0;
};

struct WeightSample {
    long long anchor_t = 0;
    std::vector<double> w;
};

struct EvalReport {
    double rmse = 0.0, mae = 0.0, mape = 0.0;
    long long anchors = 0;  // anchors processed
    long long scored = 0;   // anchors feeding the metrics
    long long encoder_calls = 0;
    long long rm_capacity = 0;
    long long rm_final_size = 0;
    double seconds = 0.0;
    std::vector<DayMetrics> per_day;
    std::vector<WeightSample> weights;

    nlohmann::json to_json() const;
};

/// Chronological test-then-update pass: rolling replay memory of capacity
/// p*K, sequential embedding writes, no parameter updates, metrics in
/// original units.
EvalReport evaluate_online(Model& model, const Dataset& data,
                           const std::vector<long long>& anchors, const EvalOptions& opts = {});

/// Forecast = the same alpha observations one day earlier.
Tensor copy_last_day_forecast(const UrbanSeries& series, long long t, int alpha);

EvalReport evaluate_copy_last_day(const UrbanSeries& series, const std::vector<long long>& anchors,
                                  int alpha, long long metrics_from = -1);

}  // namespace memda
