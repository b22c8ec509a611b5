#include "memda/replay_memory.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace memda {

namespace {

constexpr char kMagic[] = "MEMDA-RM";
constexpr std::size_t kMagicLen = 8;
constexpr unsigned char kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw IoError("'" + path + "': truncated replay memory file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

ReplayMemory ReplayMemory::training() {
    ReplayMemory rm;
    rm.mode_ = RmMode::training;
    rm.capacity_ = 0;
    return rm;
}

ReplayMemory ReplayMemory::rolling(long long capacity) {
    if (capacity <= 0)
        throw ConfigError("rolling replay memory needs positive capacity, got " +
                          std::to_string(capacity));
    ReplayMemory rm;
    rm.mode_ = RmMode::rolling;
    rm.capacity_ = capacity;
    return rm;
}

void ReplayMemory::check_shape(const Tensor& z) const {
    if (z.rank() != 2)
        throw ShapeError("replay memory entries must be (N x C_e), got " + z.shape_str());
    if (!entry_shape_.empty() && z.shape() != entry_shape_)
        throw ShapeError("replay memory entry shape " + z.shape_str() + " differs from established " +
                         Tensor(entry_shape_).shape_str());
}

void ReplayMemory::write(long long t, Tensor z, int epoch) {
    check_shape(z);
    if (entry_shape_.empty()) entry_shape_ = z.shape();
    store_[t] = Entry{std::move(z), epoch};
    if (mode_ == RmMode::rolling)
        while (static_cast<long long>(store_.size()) > capacity_) store_.erase(store_.begin());
}

const Tensor* ReplayMemory::read(long long t) const {
    const auto it = store_.find(t);
    return it == store_.end() ? nullptr : &it->second.z;
}

int ReplayMemory::epoch_tag(long long t) const {
    const auto it = store_.find(t);
    return it == store_.end() ? -1 : it->second.epoch;
}

std::vector<long long> ReplayMemory::keys() const {
    std::vector<long long> out;
    out.reserve(store_.size());
    for (const auto& [t, _] : store_) out.push_back(t);
    return out;
}

long long ReplayMemory::oldest_key() const {
    if (store_.empty()) throw Error("replay memory is empty");
    return store_.begin()->first;
}

void ReplayMemory::clear() {
    store_.clear();
    entry_shape_.clear();
}

std::vector<long long> ReplayMemory::gather_times(long long t, int alpha, int p, int K) {
    std::vector<long long> times;
    for (int k = 1; k <= K; ++k) {
        const long long pk = static_cast<long long>(p) * k;
        times.push_back(t - pk);
        times.push_back(t + alpha - pk);
    }
    return times;
}

std::vector<Tensor> ReplayMemory::gather(long long t, int alpha, int p, int K,
                                         const FallbackEncoder& fallback, int epoch) {
    std::vector<Tensor> out;
    for (long long ts : gather_times(t, alpha, p, K)) {
        if (const Tensor* z = read(ts)) {
            out.push_back(*z);
            continue;
        }
        if (!fallback)
            throw Error("replay memory missing embedding for t=" + std::to_string(ts) +
                        " and no fallback encoder available");
        Tensor z = fallback(ts);
        out.push_back(z);
        write(ts, std::move(z), epoch);
    }
    return out;
}

std::vector<int> ReplayMemory::gather_tags(long long t, int alpha, int p, int K) const {
    std::vector<int> tags;
    for (long long ts : gather_times(t, alpha, p, K)) tags.push_back(epoch_tag(ts));
    return tags;
}

void ReplayMemory::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(kMagic, kMagicLen);
    out.put(static_cast<char>(kVersion));
    for (const auto& [t, entry] : store_) {
        write_le<std::int64_t>(out, t);
        write_le<std::int32_t>(out, entry.z.dim(0));
        write_le<std::int32_t>(out, entry.z.dim(1));
        for (long long i = 0; i < entry.z.size(); ++i) write_le<double>(out, entry.z[i]);
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

ReplayMemory ReplayMemory::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw IoError("'" + path + "': not a replay memory file (bad magic)");
    const int version = in.get();
    if (version != kVersion)
        throw IoError("'" + path + "': unsupported replay memory version " + std::to_string(version));
    ReplayMemory rm = ReplayMemory::training();
    while (in.peek() != std::ifstream::traits_type::eof()) {
        const auto t = read_le<std::int64_t>(in, path);
        const auto n = read_le<std::int32_t>(in, path);
        const auto ce = read_le<std::int32_t>(in, path);
        if (n <= 0 || ce <= 0) throw IoError("'" + path + "': corrupt entry header");
        Tensor z({n, ce});
        for (long long i = 0; i < z.size(); ++i) z[i] = read_le<double>(in, path);
        rm.write(t, std::move(z), 0);
    }
    return rm;
}

}  // namespace memda
