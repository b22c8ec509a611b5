#include "memda/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "memda/errors.hpp"

namespace memda {

namespace {

double elapsed_s(std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

double safe_mape(const MetricAccumulator& acc) {
    try {
        return acc.mape();
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void require_monotone(const std::vector<long long>& anchors) {
    for (std::size_t i = 1; i < anchors.size(); ++i)
        if (anchors[i] <= anchors[i - 1])
            throw Error("evaluation anchors must be strictly increasing (got " +
                        std::to_string(anchors[i]) + " after " + std::to_string(anchors[i - 1]) +
                        ")");
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
    if (drift_augment < 0.0 || drift_augment > 1.0)
        throw ConfigError("drift_augment must be a probability in [0, 1]");
    if (!(drift_augment_scale > 0.0)) throw ConfigError("drift_augment_scale must be positive");
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
    static const std::vector<std::string> known = {
        "batch_size", "learning_rate", "max_epochs",    "patience",
        "seed",       "rm_enabled",    "grad_clip",     "verbose",
        "record_timing", "drift_augment", "drift_augment_scale"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown train config key '" + it.key() + "'");
    }
    TrainConfig c = base;
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("rm_enabled")) c.rm_enabled = j.at("rm_enabled").get<bool>();
    if (j.contains("grad_clip")) c.grad_clip = j.at("grad_clip").get<double>();
    if (j.contains("verbose")) c.verbose = j.at("verbose").get<bool>();
    if (j.contains("record_timing")) c.record_timing = j.at("record_timing").get<bool>();
    if (j.contains("drift_augment")) c.drift_augment = j.at("drift_augment").get<double>();
    if (j.contains("drift_augment_scale"))
        c.drift_augment_scale = j.at("drift_augment_scale").get<double>();
    c.validate();
    return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    return nlohmann::json{
        {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
        {"max_epochs", c.max_epochs}, {"patience", c.patience},
        {"seed", c.seed},             {"rm_enabled", c.rm_enabled},
        {"grad_clip", c.grad_clip},   {"verbose", c.verbose},
        {"record_timing", c.record_timing},
        {"drift_augment", c.drift_augment},
        {"drift_augment_scale", c.drift_augment_scale},
    };
}

Dataset prepare_dataset(const UrbanSeries& series, long long train_end, double val_fraction,
                        int alpha, int K) {
    Dataset d;
    d.raw = series;
    d.splits = chronological_split(series.T(), train_end, val_fraction);
    d.stats = compute_stats(series, d.splits.train);
    d.norm = normalize(series, d.stats);
    d.train_anchors = enumerate_samples(d.norm, alpha, K, d.splits.train);
    if (d.splits.val.size() > 0) d.val_anchors = enumerate_samples(d.norm, alpha, K, d.splits.val);
    if (d.splits.test.size() > 0) {
        try {
            d.test_anchors = enumerate_samples(d.norm, alpha, K, d.splits.test);
        } catch (const ConfigError&) {
            // too short for any anchor; evaluation will reject it with context
        }
    }
    return d;
}

nlohmann::json TrainHistory::to_json() const {
    nlohmann::json eps = nlohmann::json::array();
    for (const EpochStats& e : epochs) {
        eps.push_back({{"epoch", e.epoch},
                       {"train_mae", e.train_mae},
                       {"val_mae", e.val_mae},
                       {"embedding_drift", e.embedding_drift},
                       {"encoder_calls", e.encoder_calls},
                       {"seconds", e.seconds}});
    }
    return nlohmann::json{{"epochs", eps},
                          {"best_epoch", best_epoch},
                          {"best_mae", best_mae},
                          {"warmup_encoder_calls", warmup_encoder_calls},
                          {"seconds", seconds}};
}

Adam::Adam(std::vector<Parameter*> params, double lr) : params_(std::move(params)), lr_(lr) {
    for (const Parameter* p : params_) {
        m_.emplace_back(Tensor(p->value.shape()));
        v_.emplace_back(Tensor(p->value.shape()));
    }
}

void Adam::step(double clip_norm) {
    double sq = 0.0;
    for (const Parameter* p : params_)
        for (long long i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
    const double norm = std::sqrt(sq);
    const double rescale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

    ++t_;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double correction =
        std::sqrt(1.0 - std::pow(b2, static_cast<double>(t_))) / (1.0 - std::pow(b1, static_cast<double>(t_)));
    const double lr_t = lr_ * correction;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        for (long long i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i] * rescale;
            m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * g;
            v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * g * g;
            p.value[i] -= lr_t * m_[k][i] / (std::sqrt(v_[k][i]) + eps);
        }
        p.grad.fill(0.0);
    }
}

TrainHistory train(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const ModelConfig& mc = model.config();
    const int alpha = mc.alpha;
    const int K = mc.effective_K();
    const int p = data.norm.samples_per_day;
    const bool use_rm = cfg.rm_enabled && K >= 1;
    if (data.train_anchors.empty()) throw ConfigError("no training anchors");

    Rng rng(cfg.seed);
    std::vector<Parameter*> params = model.parameters();
    Adam opt(params, cfg.learning_rate);
    ReplayMemory rm = ReplayMemory::training();

    auto segment_for = [&](long long ts) {
        return build_drift_aware_input(data.norm, ts, alpha, 0).segments[0];
    };
    ReplayMemory::FallbackEncoder fallback = [&](long long ts) {
        return model.encode_segment_plain(segment_for(ts));
    };

    TrainHistory history;
    const long long calls_at_entry = model.encoder_calls();
    if (use_rm) {
        std::set<long long> warm;
        for (long long t : data.train_anchors)
            for (long long ts : ReplayMemory::gather_times(t, alpha, p, K)) warm.insert(ts);
        for (long long t : data.val_anchors)
            for (long long ts : ReplayMemory::gather_times(t, alpha, p, K)) warm.insert(ts);
        for (long long ts : warm) rm.write(ts, model.encode_segment_plain(segment_for(ts)), 0);
    }
    history.warmup_encoder_calls = model.encoder_calls() - calls_at_entry;

    std::vector<Tensor> best_params;
    double best_metric = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        std::vector<long long> order = data.train_anchors;
        rng.shuffle(order);

        const long long calls_before = model.encoder_calls();
        double loss_sum = 0.0;
        double drift_sum = 0.0;
        long long drift_n = 0;
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t batch_n =
                std::min<std::size_t>(cfg.batch_size, order.size() - s);
            for (std::size_t b = 0; b < batch_n; ++b) {
                const long long t = order[s + b];
                Tape tape;
                DriftAwareInput input = build_drift_aware_input(data.norm, t, alpha, K);
                Tensor target_block = target_at(data.norm, t, alpha);
                bool augmented = false;
                if (cfg.drift_augment > 0.0 && K >= 1 && rng.uniform() < cfg.drift_augment) {
                    augmented = true;
                    const double rho = rng.uniform(0.6, 1.4);
                    const double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                                         rng.uniform(0.5, 2.0) * cfg.drift_augment_scale;
                    Tensor& current = input.segments[0];
                    for (long long i = 0; i < current.size(); ++i)
                        current[i] = rho * current[i] + delta;
                    for (long long i = 0; i < target_block.size(); ++i)
                        target_block[i] = rho * target_block[i] + delta;
                }
                std::vector<Tensor> replayed;
                if (use_rm) replayed = rm.gather(t, alpha, p, K, fallback, epoch);
                Model::Forward f = model.forward(tape, input, replayed);
                Tape::Var target = tape.leaf(flatten_target(target_block));
                Tape::Var loss = tape.mae(f.prediction, target);
                const double loss_value = tape.value(loss)[0];
                if (!std::isfinite(loss_value))
                    throw Error("training diverged: non-finite loss at epoch " +
                                std::to_string(epoch) + ", anchor t=" + std::to_string(t));
                loss_sum += loss_value;
                tape.backward(tape.scale(loss, 1.0 / static_cast<double>(batch_n)));
                if (use_rm && !augmented) {
                    Tensor z_new = tape.value(f.z_current);
                    if (const Tensor* prev = rm.read(t)) {
                        double dn = 0.0, pn = 0.0;
                        for (long long i = 0; i < z_new.size(); ++i) {
                            const double d = z_new[i] - (*prev)[i];
                            dn += d * d;
                            pn += (*prev)[i] * (*prev)[i];
                        }
                        drift_sum += std::sqrt(dn) / (std::sqrt(pn) + 1e-12);
                        ++drift_n;
                    }
                    rm.write(t, std::move(z_new), epoch);
                }
            }
            opt.step(cfg.grad_clip);
        }
        const long long train_calls = model.encoder_calls() - calls_before;

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mae = loss_sum / static_cast<double>(order.size());
        stats.encoder_calls = train_calls;
        stats.embedding_drift = drift_n > 0 ? drift_sum / static_cast<double>(drift_n)
                                            : std::numeric_limits<double>::quiet_NaN();

        if (!data.val_anchors.empty()) {
            MetricAccumulator acc;
            for (long long t : data.val_anchors) {
                Tape tape;
                DriftAwareInput input = build_drift_aware_input(data.norm, t, alpha, K);
                std::vector<Tensor> replayed;
                if (use_rm) replayed = rm.gather(t, alpha, p, K, fallback, epoch);
                Model::Forward f = model.forward(tape, input, replayed);
                acc.add(tape.value(f.prediction), flatten_target(target_at(data.norm, t, alpha)));
                if (use_rm) rm.write(t, tape.value(f.z_current), epoch);
            }
            stats.val_mae = acc.mae();
        } else {
            stats.val_mae = std::numeric_limits<double>::quiet_NaN();
        }

        if (cfg.record_timing) stats.seconds = elapsed_s(t_epoch);
        history.epochs.push_back(stats);
        if (cfg.verbose)
            std::fprintf(stderr, "epoch %3d  train_mae %.6f  val_mae %.6f  drift %.4f\n",
                         epoch, stats.train_mae, stats.val_mae, stats.embedding_drift);

        const double metric = data.val_anchors.empty() ? stats.train_mae : stats.val_mae;
        if (metric < best_metric) {
            best_metric = metric;
            history.best_epoch = epoch;
            epochs_since_best = 0;
            best_params.clear();
            for (const Parameter* q : params) best_params.push_back(q->value);
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
    history.best_mae = best_metric;
    if (cfg.record_timing) history.seconds = elapsed_s(t_start);
    return history;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json days = nlohmann::json::array();
    for (const DayMetrics& d : per_day) {
        days.push_back({{"day", d.day},
                        {"count", d.count},
                        {"rmse", d.rmse},
                        {"mae", d.mae},
                        {"mape", d.mape}});
    }
    return nlohmann::json{{"rmse", rmse},
                          {"mae", mae},
                          {"mape", mape},
                          {"anchors", anchors},
                          {"scored", scored},
                          {"encoder_calls", encoder_calls},
                          {"rm_capacity", rm_capacity},
                          {"rm_final_size", rm_final_size},
                          {"seconds", seconds},
                          {"per_day", days}};
}

EvalReport evaluate_online(Model& model, const Dataset& data,
                           const std::vector<long long>& anchors, const EvalOptions& opts) {
    if (anchors.empty())
        throw ConfigError("evaluation range holds no valid anchors (too short for the window)");
    require_monotone(anchors);
    const auto t_start = std::chrono::steady_clock::now();
    const ModelConfig& mc = model.config();
    const int alpha = mc.alpha;
    const int K = mc.effective_K();
    const int p = data.norm.samples_per_day;

    PatternMemory* pm = model.pattern_memory();
    const bool pm_was_frozen = pm ? pm->frozen : false;
    if (pm) pm->frozen = true;

    ReplayMemory rm = K >= 1 ? ReplayMemory::rolling(static_cast<long long>(p) * K)
                             : ReplayMemory::training();
    ReplayMemory::FallbackEncoder fallback = [&](long long ts) {
        return model.encode_segment_plain(build_drift_aware_input(data.norm, ts, alpha, 0).segments[0]);
    };

    EvalReport report;
    report.rm_capacity = K >= 1 ? static_cast<long long>(p) * K : 0;
    const long long calls_before = model.encoder_calls();
    MetricAccumulator total;
    std::map<long long, MetricAccumulator> by_day;

    for (long long t : anchors) {
        Tape tape;
        DriftAwareInput input = build_drift_aware_input(data.norm, t, alpha, K);
        std::vector<Tensor> replayed;
        if (K >= 1) replayed = rm.gather(t, alpha, p, K, fallback, 0);
        Model::Forward f = model.forward(tape, input, replayed);
        ++report.anchors;
        if (t >= opts.metrics_from) {
            Tensor pred = reshape_prediction(tape.value(f.prediction), alpha, mc.C);
            denormalize(pred, data.stats);
            const Tensor target = target_at(data.raw, t, alpha);
            total.add(pred, target);
            by_day[t / p].add(pred, target);
            ++report.scored;
        }
        if (K >= 1) rm.write(t, tape.value(f.z_current), 0);
        if (opts.record_weights && !f.weights.empty()) {
            WeightSample ws;
            ws.anchor_t = t;
            for (long long i = 0; i < f.weights.size(); ++i) ws.w.push_back(f.weights[i]);
            report.weights.push_back(std::move(ws));
        }
    }

    report.encoder_calls = model.encoder_calls() - calls_before;
    report.rm_final_size = K >= 1 ? static_cast<long long>(rm.keys().size()) : 0;
    if (report.scored > 0) {
        report.rmse = total.rmse();
        report.mae = total.mae();
        report.mape = safe_mape(total);
        for (const auto& [day, acc] : by_day)
            report.per_day.push_back({day, acc.count(), acc.rmse(), acc.mae(), safe_mape(acc)});
    }
    if (opts.record_timing) report.seconds = elapsed_s(t_start);
    if (pm) pm->frozen = pm_was_frozen;
    return report;
}

Tensor copy_last_day_forecast(const UrbanSeries& series, long long t, int alpha) {
    const int p = series.samples_per_day;
    const long long first = t + 1 - p;
    const long long last = t + alpha - p;
    if (first < 0 || last >= series.T())
        throw WindowError("copy-last-day needs observations [" + std::to_string(first) + ", " +
                          std::to_string(last) + "], series has [0, " + std::to_string(series.T()) +
                          ")");
    Tensor out({alpha, series.N(), series.C()});
    for (int a = 0; a < alpha; ++a)
        for (int i = 0; i < series.N(); ++i)
            for (int c = 0; c < series.C(); ++c)
                out.at(a, i, c) = series.values.at(static_cast<int>(first + a), i, c);
    return out;
}

EvalReport evaluate_copy_last_day(const UrbanSeries& series, const std::vector<long long>& anchors,
                                  int alpha, long long metrics_from) {
    if (anchors.empty()) throw ConfigError("no anchors for the copy-last-day baseline");
    require_monotone(anchors);
    EvalReport report;
    MetricAccumulator total;
    std::map<long long, MetricAccumulator> by_day;
    const int p = series.samples_per_day;
    for (long long t : anchors) {
        ++report.anchors;
        if (t < metrics_from) continue;
        const Tensor pred = copy_last_day_forecast(series, t, alpha);
        const Tensor target = target_at(series, t, alpha);
        total.add(pred, target);
        by_day[t / p].add(pred, target);
        ++report.scored;
    }
    if (report.scored > 0) {
        report.rmse = total.rmse();
        report.mae = total.mae();
        report.mape = safe_mape(total);
        for (const auto& [day, acc] : by_day)
            report.per_day.push_back({day, acc.count(), acc.rmse(), acc.mae(), safe_mape(acc)});
    }
    return report;
}

}  // namespace memda
