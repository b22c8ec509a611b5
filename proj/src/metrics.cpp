#include "memda/metrics.hpp"

#include <cmath>

#include "memda/errors.hpp"

namespace memda {

void MetricAccumulator::add(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw ShapeError("metric shapes differ: " + pred.shape_str() + " vs " + target.shape_str());
    for (long long i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum_sq_ += d * d;
        sum_abs_ += std::abs(d);
        ++count_;
        const double y = target[i];
        if (std::abs(y) >= mask_) {
            sum_ape_ += std::abs(d) / std::abs(y);
            ++mape_count_;
        }
    }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
    sum_sq_ += other.sum_sq_;
    sum_abs_ += other.sum_abs_;
    sum_ape_ += other.sum_ape_;
    count_ += other.count_;
    mape_count_ += other.mape_count_;
}

double MetricAccumulator::rmse() const {
    if (count_ == 0) throw Error("no samples accumulated");
    return std::sqrt(sum_sq_ / static_cast<double>(count_));
}

double MetricAccumulator::mae() const {
    if (count_ == 0) throw Error("no samples accumulated");
    return sum_abs_ / static_cast<double>(count_);
}

double MetricAccumulator::mape() const {
    if (count_ == 0) throw Error("no samples accumulated");
    if (mape_count_ == 0) throw Error("every target fell below the MAPE magnitude mask");
    return 100.0 * sum_ape_ / static_cast<double>(mape_count_);
}

}  // namespace memda
