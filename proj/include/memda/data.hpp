#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "memda/errors.hpp"
#include "memda/tensor.hpp"

namespace memda {

/// Seconds-since-epoch parsing/formatting for "YYYY-MM-DDTHH:MM:SS" (UTC).
/// A space separator instead of 'T' is accepted on input.
std::int64_t parse_iso8601(const std::string& s);
std::string format_iso8601(std::int64_t epoch_s);

/// Half-open index range [begin, end).
struct Range {
    long long begin = 0;
    long long end = 0;

    long long size() const { return end - begin; }
    bool contains(long long t) const { return t >= begin && t < end; }
};

struct SplitRanges {
    Range train, val, test;
};

/// Chronologically ordered multivariate series: values (T x N x C) sampled
/// p times per day starting at start_epoch_s.
struct UrbanSeries {
    Tensor values;
    int samples_per_day = 0;
    std::int64_t start_epoch_s = 0;
    std::vector<std::string> node_ids;

    long long T() const { return values.empty() ? 0 : values.dim(0); }
    int N() const { return values.empty() ? 0 : values.dim(1); }
    int C() const { return values.empty() ? 0 : values.dim(2); }
    int step_seconds() const { return 86400 / samples_per_day; }
    std::int64_t timestamp_at(long long t) const {
        return start_epoch_s + t * static_cast<std::int64_t>(step_seconds());
    }
};

enum class DriftKind { sudden, incremental };

DriftKind drift_kind_from_string(const std::string& s);
std::string to_string(DriftKind k);

/// Synthetic stream parameters. The drift applies an additive level shift of
/// `magnitude` plus a pattern change; `incremental` ramps it in linearly over
/// seven days where `sudden` switches at drift_time.
struct DriftConfig {
    DriftKind drift_kind = DriftKind::sudden;
    long long drift_time = 0;
    double magnitude = 0.0;
    int base_period = 288;
    double noise_std = 0.0;
    int n_nodes = 8;
    int n_days = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

DriftConfig drift_config_from_json(const nlohmann::json& j, DriftConfig base = DriftConfig{});
nlohmann::json drift_config_to_json(const DriftConfig& c);

UrbanSeries generate_synthetic_drift(const DriftConfig& config);

/// CSV schema: header row, first column ISO-8601 timestamp, then one column
/// per node (C=1) or "node:channel" pairs. Missing cells are linearly
/// interpolated per node up to 3 consecutive gaps unless strict is set.
UrbanSeries load_csv(const std::string& path, int p, int channels, bool strict = false);
void save_csv(const UrbanSeries& series, const std::string& path);

/// train = [0, train_end*(1 - val_fraction)), val = rest of [0, train_end),
/// test = [train_end, T).
SplitRanges chronological_split(long long t_total, long long train_end, double val_fraction);

/// The 2K+1 periodic segments around anchor t, each spanning alpha
/// observations and ending at its stated endpoint: order
/// [X_t, X_{t-P_1}, X_{t+alpha-P_1}, ..., X_{t-P_K}, X_{t+alpha-P_K}]
/// with P_k = p*k.
struct DriftAwareInput {
    long long anchor_t = 0;
    int alpha = 0;
    int K = 0;
    std::vector<Tensor> segments;           // each (alpha x N x C)
    std::vector<long long> segment_ends;    // end index of each segment
};

DriftAwareInput build_drift_aware_input(const UrbanSeries& series, long long t, int alpha, int K);

/// Earliest anchor usable with the given window geometry.
long long earliest_anchor(int alpha, int p, int K);

/// Valid anchors t in split_range: window preconditions hold and the
/// alpha-step target {x_{t+1}..x_{t+alpha}} stays inside the range.
std::vector<long long> enumerate_samples(const UrbanSeries& series, int alpha, int K,
                                         const Range& split_range);

/// Target tensor (alpha x N x C) covering indices [t+1, t+alpha].
Tensor target_at(const UrbanSeries& series, long long t, int alpha);

/// Per node-channel z-score parameters with a 1e-4 std floor.
struct NormalizationStats {
    Tensor mean;  // (N x C)
    Tensor std;   // (N x C)
};

NormalizationStats compute_stats(const UrbanSeries& series, const Range& range);
UrbanSeries normalize(const UrbanSeries& series, const NormalizationStats& stats);
/// In-place inverse transform of a (alpha x N x C) prediction or target.
void denormalize(Tensor& block, const NormalizationStats& stats);

}  // namespace memda
