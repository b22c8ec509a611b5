#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "memda/errors.hpp"
#include "memda/tensor.hpp"

namespace memda {

enum class RmMode { training, rolling };

/// Timestamp-indexed cache of encoder embeddings Z_t (each N x C_e).
/// Training mode grows unbounded and tags entries with the epoch that wrote
/// them; rolling mode keeps at most `capacity` entries, evicting the oldest
/// timestamp first.
class ReplayMemory {
public:
    using FallbackEncoder = std::function<Tensor(long long)>;

    static ReplayMemory training();
    static ReplayMemory rolling(long long capacity);

    RmMode mode() const { return mode_; }
    long long capacity() const { return capacity_; }
    std::size_t size() const { return store_.size(); }
    bool contains(long long t) const { return store_.count(t) > 0; }

    void write(long long t, Tensor z, int epoch);
    /// Stored embedding or nullptr when absent; never fabricates.
    const Tensor* read(long long t) const;
    /// Epoch tag of the entry at t, or -1 when absent.
    int epoch_tag(long long t) const;
    /// Keys in ascending time order.
    std::vector<long long> keys() const;
    long long oldest_key() const;
    void clear();

    /// The 2K replayed embeddings for anchor t in the order
    /// [Z_{t-P_1}, Z_{t+alpha-P_1}, ..., Z_{t-P_K}, Z_{t+alpha-P_K}].
    /// Absent entries are computed by `fallback` (treated as constants) and
    /// written back under the current epoch tag; a missing entry without a
    /// fallback is an error.
    std::vector<Tensor> gather(long long t, int alpha, int p, int K,
                               const FallbackEncoder& fallback, int epoch);
    /// Epoch tags the same gather would replay, -1 for absent entries.
    std::vector<int> gather_tags(long long t, int alpha, int p, int K) const;
    /// The timestamps a gather touches, in gather order.
    static std::vector<long long> gather_times(long long t, int alpha, int p, int K);

    /// Binary dump: magic "MEMDA-RM", one version byte, then per entry
    /// (t: int64, N: int32, C_e: int32, payload: N*C_e doubles), little-endian.
    void save(const std::string& path) const;
    static ReplayMemory load(const std::string& path);

private:
    struct Entry {
        Tensor z;
        int epoch = 0;
    };

    void check_shape(const Tensor& z) const;

    std::map<long long, Entry> store_;
    RmMode mode_ = RmMode::training;
    long long capacity_ = 0;  // 0 = unbounded (training mode)
    std::vector<int> entry_shape_;
};

}  // namespace memda
