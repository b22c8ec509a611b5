#pragma once

#include "memda/tensor.hpp"

namespace memda {

/// Streaming forecast-error accumulator over any number of (pred, target)
/// pairs. MAPE skips targets with |y| < mask_threshold and reports percent.
class MetricAccumulator {
public:
    explicit MetricAccumulator(double mask_threshold = 1e-3) : mask_(mask_threshold) {}

    void add(const Tensor& pred, const Tensor& target);
    void merge(const MetricAccumulator& other);

    long long count() const { return count_; }
    double rmse() const;
    double mae() const;
    double mape() const;  // percent; throws Error if every target was masked

private:
    double mask_;
    double sum_sq_ = 0.0;
    double sum_abs_ = 0.0;
    double sum_ape_ = 0.0;
    long long count_ = 0;
    long long mape_count_ = 0;
};

}  // namespace memda
