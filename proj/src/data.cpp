#include "memda/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "memda/rng.hpp"

namespace memda {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_missing_cell(const std::string& cell) {
    if (cell.empty()) return true;
    std::string low;
    for (char ch : cell) low += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return low == "nan" || low == "na" || low == "null";
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

void check_period(int p) {
    if (p <= 0) throw ConfigError("samples_per_day must be positive, got " + std::to_string(p));
    if (86400 % p != 0)
        throw ConfigError("samples_per_day must divide a day exactly, got " + std::to_string(p));
}

}  // namespace

std::int64_t parse_iso8601(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char sep = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec) != 7 ||
        (sep != 'T' && sep != ' '))
        throw DataError("unparsable timestamp: '" + s + "'");
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    const time_t t = timegm(&tm);
    if (t == static_cast<time_t>(-1)) throw DataError("timestamp out of range: '" + s + "'");
    return static_cast<std::int64_t>(t);
}

std::string format_iso8601(std::int64_t epoch_s) {
    const time_t t = static_cast<time_t>(epoch_s);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

DriftKind drift_kind_from_string(const std::string& s) {
    if (s == "sudden") return DriftKind::sudden;
    if (s == "incremental") return DriftKind::incremental;
    throw ConfigError("unknown drift_kind '" + s + "' (expected sudden or incremental)");
}

std::string to_string(DriftKind k) {
    return k == DriftKind::sudden ? "sudden" : "incremental";
}

void DriftConfig::validate() const {
    check_period(base_period);
    if (n_nodes <= 0) throw ConfigError("n_nodes must be positive");
    if (n_days <= 0) throw ConfigError("n_days must be positive");
    if (noise_std < 0.0) throw ConfigError("noise_std must be nonnegative");
    const long long total = static_cast<long long>(n_days) * base_period;
    if (drift_time <= 0 || drift_time >= total)
        throw ConfigError("drift_time must lie strictly inside (0, " + std::to_string(total) +
                          "), got " + std::to_string(drift_time));
}

DriftConfig drift_config_from_json(const nlohmann::json& j, DriftConfig base) {
    static const std::vector<std::string> known{"drift_kind", "drift_time", "magnitude",
                                               "base_period", "noise_std", "n_nodes",
                                               "n_days",     "seed"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown drift config key '" + key + "'");
    DriftConfig c = base;
    try {
        c.drift_kind = drift_kind_from_string(j.value("drift_kind", to_string(c.drift_kind)));
        c.drift_time = j.value("drift_time", c.drift_time);
        c.magnitude = j.value("magnitude", c.magnitude);
        c.base_period = j.value("base_period", c.base_period);
        c.noise_std = j.value("noise_std", c.noise_std);
        c.n_nodes = j.value("n_nodes", c.n_nodes);
        c.n_days = j.value("n_days", c.n_days);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad drift config value: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json drift_config_to_json(const DriftConfig& c) {
    return nlohmann::json{{"drift_kind", to_string(c.drift_kind)},
                          {"drift_time", c.drift_time},
                          {"magnitude", c.magnitude},
                          {"base_period", c.base_period},
                          {"noise_std", c.noise_std},
                          {"n_nodes", c.n_nodes},
                          {"n_days", c.n_days},
                          {"seed", c.seed}};
}

UrbanSeries generate_synthetic_drift(const DriftConfig& config) {
    config.validate();
    const int p = config.base_period;
    const int n = config.n_nodes;
    const long long total = static_cast<long long>(config.n_days) * p;
    Rng rng(config.seed);

    // per-node daily pattern before and after the drift; harmonics over full
    // days are exactly zero-mean, which keeps slice means analytically clean
    std::vector<double> base(n), amp(n), phase(n), h2(n);
    std::vector<double> amp_post(n), phase_post(n), h2_post(n);
    for (int i = 0; i < n; ++i) {
        base[i] = rng.uniform(4.0, 10.0);
        amp[i] = rng.uniform(0.8, 2.0);
        phase[i] = rng.uniform(0.0, kTwoPi);
        h2[i] = rng.uniform(0.1, 0.4);
        amp_post[i] = rng.uniform(0.8, 2.0);
        phase_post[i] = rng.uniform(0.0, kTwoPi);
        h2_post[i] = rng.uniform(0.1, 0.4);
    }

    const double mix = std::min(1.0, 0.5 * std::abs(config.magnitude));
    const double ramp_len = 7.0 * p;

    UrbanSeries s;
    s.values = Tensor({static_cast<int>(total), n, 1});
    s.samples_per_day = p;
    s.start_epoch_s = parse_iso8601("2024-01-01T00:00:00");
    for (int i = 0; i < n; ++i) s.node_ids.push_back("node_" + std::to_string(i));

    for (long long t = 0; t < total; ++t) {
        const double tau = static_cast<double>(t % p) / p;
        double lambda = 0.0;
        if (t >= config.drift_time) {
            if (config.drift_kind == DriftKind::sudden)
                lambda = 1.0;
            else
                lambda = std::min(1.0, static_cast<double>(t - config.drift_time) / ramp_len);
        }
        for (int i = 0; i < n; ++i) {
            const double f =
                amp[i] * (std::sin(kTwoPi * tau + phase[i]) + h2[i] * std::sin(2.0 * kTwoPi * tau + 2.0 * phase[i]));
            const double g = amp_post[i] * (std::sin(kTwoPi * tau + phase_post[i]) +
                                            h2_post[i] * std::sin(2.0 * kTwoPi * tau + 2.0 * phase_post[i]));
            double v = base[i] + (1.0 - lambda * mix) * f + lambda * mix * g + lambda * config.magnitude;
            if (config.noise_std > 0.0) v += config.noise_std * rng.normal();
            s.values.at(static_cast<int>(t), i, 0) = v;
        }
    }
    return s;
}

UrbanSeries load_csv(const std::string& path, int p, int channels, bool strict) {
    check_period(p);
    if (channels <= 0) throw ConfigError("channels must be positive");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "': empty file, header required");
    const auto header = split_line(line);
    if (header.size() < 2) throw DataError("'" + path + "': header needs a timestamp column and data columns");
    const int ncols = static_cast<int>(header.size()) - 1;
    if (ncols % channels != 0)
        throw DataError("'" + path + "': " + std::to_string(ncols) +
                        " data columns not divisible by " + std::to_string(channels) + " channels");
    const int n_nodes = ncols / channels;

    std::vector<std::string> node_ids;
    for (int i = 0; i < n_nodes; ++i) {
        std::string name = header[1 + static_cast<std::size_t>(i) * channels];
        const auto colon = name.find(':');
        if (colon != std::string::npos) name = name.substr(0, colon);
        node_ids.push_back(name);
    }

    std::vector<std::int64_t> timestamps;
    std::vector<double> flat;  // row-major (T, N, C), NaN marks missing
    long long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        if (static_cast<int>(cells.size()) != ncols + 1)
            throw DataError("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                            std::to_string(ncols + 1) + " columns, got " + std::to_string(cells.size()));
        std::int64_t ts;
        try {
            ts = parse_iso8601(cells[0]);
        } catch (const DataError& e) {
            throw DataError("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!timestamps.empty() && ts <= timestamps.back())
            throw DataError("'" + path + "' line " + std::to_string(lineno) +
                            ": timestamps not strictly increasing");
        timestamps.push_back(ts);
        for (int c = 1; c <= ncols; ++c) {
            const std::string& cell = cells[static_cast<std::size_t>(c)];
            if (is_missing_cell(cell)) {
                if (strict)
                    throw DataError("'" + path + "' line " + std::to_string(lineno) +
                                    ": missing value in column " + std::to_string(c));
                flat.push_back(std::nan(""));
                continue;
            }
            char* endp = nullptr;
            const double v = std::strtod(cell.c_str(), &endp);
            if (endp == cell.c_str() || *endp != '\0')
                throw DataError("'" + path + "' line " + std::to_string(lineno) +
                                ": unparsable value '" + cell + "'");
            if (std::isnan(v) && strict)
                throw DataError("'" + path + "' line " + std::to_string(lineno) + ": NaN value");
            flat.push_back(v);
        }
    }
    if (timestamps.empty()) throw DataError("'" + path + "': no data rows");

    const long long t_total = static_cast<long long>(timestamps.size());
    // interpolate runs of up to 3 missing values per column
    for (int col = 0; col < ncols; ++col) {
        long long t = 0;
        while (t < t_total) {
            if (!std::isnan(flat[static_cast<std::size_t>(t) * ncols + col])) {
                ++t;
                continue;
            }
            long long run_end = t;
            while (run_end < t_total && std::isnan(flat[static_cast<std::size_t>(run_end) * ncols + col]))
                ++run_end;
            const long long run = run_end - t;
            if (t == 0 || run_end == t_total || run > 3)
                throw DataError("'" + path + "': column " + std::to_string(col + 1) + " has a gap of " +
                                std::to_string(run) + " rows at row " + std::to_string(t + 1) +
                                " that cannot be interpolated (limit 3, both neighbors required)");
            const double lo = flat[static_cast<std::size_t>(t - 1) * ncols + col];
            const double hi = flat[static_cast<std::size_t>(run_end) * ncols + col];
            for (long long k = 0; k < run; ++k)
                flat[static_cast<std::size_t>(t + k) * ncols + col] =
                    lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(run + 1);
            t = run_end;
        }
    }

    if (t_total % p != 0)
        std::cerr << "warning: '" << path << "' has " << t_total << " rows, not a whole number of days (p="
                  << p << ")\n";

    UrbanSeries s;
    s.values = Tensor({static_cast<int>(t_total), n_nodes, channels}, std::move(flat));
    s.samples_per_day = p;
    s.start_epoch_s = timestamps.front();
    s.node_ids = std::move(node_ids);
    return s;
}

void save_csv(const UrbanSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "timestamp";
    for (int i = 0; i < series.N(); ++i) {
        if (series.C() == 1) {
            out << ',' << series.node_ids[static_cast<std::size_t>(i)];
        } else {
            for (int c = 0; c < series.C(); ++c)
                out << ',' << series.node_ids[static_cast<std::size_t>(i)] << ':' << c;
        }
    }
    out << '\n';
    char buf[40];
    for (long long t = 0; t < series.T(); ++t) {
        out << format_iso8601(series.timestamp_at(t));
        for (int i = 0; i < series.N(); ++i)
            for (int c = 0; c < series.C(); ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", series.values.at(static_cast<int>(t), i, c));
                out << ',' << buf;
            }
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

SplitRanges chronological_split(long long t_total, long long train_end, double val_fraction) {
    if (t_total <= 0) throw ConfigError("series is empty");
    if (train_end <= 0) throw ConfigError("train_end must be positive");
    if (train_end >= t_total)
        throw ConfigError("train_end " + std::to_string(train_end) + " leaves an empty test split (T=" +
                          std::to_string(t_total) + ")");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must be in [0, 1)");
    const long long val_len = std::llround(static_cast<double>(train_end) * val_fraction);
    SplitRanges s;
    s.train = {0, train_end - val_len};
    s.val = {train_end - val_len, train_end};
    s.test = {train_end, t_total};
    return s;
}

long long earliest_anchor(int alpha, int p, int K) {
    return static_cast<long long>(alpha) - 1 + static_cast<long long>(p) * K;
}

DriftAwareInput build_drift_aware_input(const UrbanSeries& series, long long t, int alpha, int K) {
    if (alpha <= 0) throw ConfigError("alpha must be positive");
    if (K < 0) throw ConfigError("K must be nonnegative");
    const int p = series.samples_per_day;
    check_period(p);
    if (p < alpha)
        throw ConfigError("samples_per_day (" + std::to_string(p) + ") must be >= alpha (" +
                          std::to_string(alpha) + ")");
    const long long earliest = earliest_anchor(alpha, p, K);
    if (t < earliest)
        throw WindowError("anchor " + std::to_string(t) + " too early; earliest valid anchor is " +
                          std::to_string(earliest));
    if (t >= series.T())
        throw WindowError("anchor " + std::to_string(t) + " beyond series end " +
                          std::to_string(series.T()));

    const int N = series.N(), C = series.C();
    auto slice_ending_at = [&](long long end) {
        Tensor seg({alpha, N, C});
        const long long begin = end - alpha + 1;
        for (int r = 0; r < alpha; ++r)
            for (int i = 0; i < N; ++i)
                for (int c = 0; c < C; ++c)
                    seg.at(r, i, c) = series.values.at(static_cast<int>(begin + r), i, c);
        return seg;
    };

    DriftAwareInput input;
    input.anchor_t = t;
    input.alpha = alpha;
    input.K = K;
    input.segment_ends.push_back(t);
    input.segments.push_back(slice_ending_at(t));
    for (int k = 1; k <= K; ++k) {
        const long long pk = static_cast<long long>(p) * k;
        input.segment_ends.push_back(t - pk);
        input.segments.push_back(slice_ending_at(t - pk));
        input.segment_ends.push_back(t + alpha - pk);
        input.segments.push_back(slice_ending_at(t + alpha - pk));
    }
    return input;
}

std::vector<long long> enumerate_samples(const UrbanSeries& series, int alpha, int K,
                                         const Range& split_range) {
    if (alpha <= 0) throw ConfigError("alpha must be positive");
    if (K < 0) throw ConfigError("K must be nonnegative");
    if (split_range.begin < 0 || split_range.end > series.T())
        throw ConfigError("split range outside series");
    const long long first = std::max(split_range.begin, earliest_anchor(alpha, series.samples_per_day, K));
    const long long last = split_range.end - 1 - alpha;
    std::vector<long long> anchors;
    for (long long t = first; t <= last; ++t) anchors.push_back(t);
    if (anchors.empty())
        throw ConfigError("range [" + std::to_string(split_range.begin) + ", " +
                          std::to_string(split_range.end) + ") admits no valid sample with alpha=" +
                          std::to_string(alpha) + ", K=" + std::to_string(K) + ", p=" +
                          std::to_string(series.samples_per_day));
    return anchors;
}

Tensor target_at(const UrbanSeries& series, long long t, int alpha) {
    if (t + alpha >= series.T())
        throw WindowError("target for anchor " + std::to_string(t) + " reaches past series end");
    const int N = series.N(), C = series.C();
    Tensor y({alpha, N, C});
    for (int r = 0; r < alpha; ++r)
        for (int i = 0; i < N; ++i)
            for (int c = 0; c < C; ++c)
                y.at(r, i, c) = series.values.at(static_cast<int>(t + 1 + r), i, c);
    return y;
}

NormalizationStats compute_stats(const UrbanSeries& series, const Range& range) {
    if (range.begin < 0 || range.end > series.T() || range.size() <= 0)
        throw ConfigError("invalid stats range");
    const int N = series.N(), C = series.C();
    NormalizationStats st;
    st.mean = Tensor({N, C});
    st.std = Tensor({N, C});
    const double cnt = static_cast<double>(range.size());
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c) {
            double sum = 0.0;
            for (long long t = range.begin; t < range.end; ++t)
                sum += series.values.at(static_cast<int>(t), i, c);
            const double mean = sum / cnt;
            double var = 0.0;
            for (long long t = range.begin; t < range.end; ++t) {
                const double d = series.values.at(static_cast<int>(t), i, c) - mean;
                var += d * d;
            }
            st.mean.at(i, c) = mean;
            st.std.at(i, c) = std::max(std::sqrt(var / cnt), 1e-4);
        }
    return st;
}

UrbanSeries normalize(const UrbanSeries& series, const NormalizationStats& stats) {
    UrbanSeries out = series;
    const int N = series.N(), C = series.C();
    for (long long t = 0; t < series.T(); ++t)
        for (int i = 0; i < N; ++i)
            for (int c = 0; c < C; ++c)
                out.values.at(static_cast<int>(t), i, c) =
                    (series.values.at(static_cast<int>(t), i, c) - stats.mean.at(i, c)) / stats.std.at(i, c);
    return out;
}

void denormalize(Tensor& block, const NormalizationStats& stats) {
    if (block.rank() != 3) throw ShapeError("denormalize expects (alpha x N x C), got " + block.shape_str());
    const int A = block.dim(0), N = block.dim(1), C = block.dim(2);
    if (N != stats.mean.dim(0) || C != stats.mean.dim(1))
        throw ShapeError("denormalize: stats shape " + stats.mean.shape_str() + " does not match block " +
                         block.shape_str());
    for (int r = 0; r < A; ++r)
        for (int i = 0; i < N; ++i)
            for (int c = 0; c < C; ++c)
                block.at(r, i, c) = block.at(r, i, c) * stats.std.at(i, c) + stats.mean.at(i, c);
}

}  // namespace memda
