#pragma once

#include <cmath>
#include <vector>

#include "memda/rng.hpp"
#include "memda/tensor.hpp"

namespace memda {

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Tensor uniform_fanin(Rng& rng, std::vector<int> shape, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

}  // namespace memda
