#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "memda/data.hpp"

using namespace memda;

namespace {

// value encodes its own (t, node) position so window tests can read
// indices straight out of the slices
UrbanSeries make_index_series(int t_total, int n_nodes, int p) {
    UrbanSeries s;
    s.values = Tensor({t_total, n_nodes, 1});
    for (int t = 0; t < t_total; ++t)
        for (int i = 0; i < n_nodes; ++i) s.values.at(t, i, 0) = t + 0.001 * i;
    s.samples_per_day = p;
    s.start_epoch_s = parse_iso8601("2024-01-01T00:00:00");
    for (int i = 0; i < n_nodes; ++i) s.node_ids.push_back("node_" + std::to_string(i));
    return s;
}

double slice_mean(const UrbanSeries& s, int node, long long begin, long long end) {
    double sum = 0.0;
    for (long long t = begin; t < end; ++t) sum += s.values.at(static_cast<int>(t), node, 0);
    return sum / static_cast<double>(end - begin);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("iso8601 round trip") {
    CHECK(parse_iso8601("1970-01-01T00:00:00") == 0);
    CHECK(parse_iso8601("1970-01-01T00:05:00") == 300);
    CHECK(parse_iso8601("1970-01-02 00:00:00") == 86400);
    const std::int64_t t = parse_iso8601("2024-03-15T07:45:30");
    CHECK(format_iso8601(t) == "2024-03-15T07:45:30");
    CHECK_THROWS_AS(parse_iso8601("not-a-date"), DataError);
    CHECK_THROWS_AS(parse_iso8601("2024-03-15"), DataError);
}

TEST_CASE("drift config validation") {
    DriftConfig c;
    c.base_period = 24;
    c.n_days = 10;
    c.drift_time = 120;
    CHECK_NOTHROW(c.validate());

    DriftConfig bad = c;
    bad.drift_time = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.drift_time = 240;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.base_period = 7;  // does not divide a day
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.noise_std = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("drift config json round trip and unknown keys") {
    DriftConfig c;
    c.drift_kind = DriftKind::incremental;
    c.drift_time = 480;
    c.magnitude = 2.5;
    c.base_period = 24;
    c.noise_std = 0.05;
    c.n_nodes = 8;
    c.n_days = 30;
    c.seed = 7;
    const auto j = drift_config_to_json(c);
    const DriftConfig back = drift_config_from_json(j);
    CHECK(back.drift_kind == c.drift_kind);
    CHECK(back.drift_time == c.drift_time);
    CHECK(back.magnitude == c.magnitude);
    CHECK(back.base_period == c.base_period);
    CHECK(back.noise_std == c.noise_std);
    CHECK(back.n_nodes == c.n_nodes);
    CHECK(back.n_days == c.n_days);
    CHECK(back.seed == c.seed);

    auto j2 = j;
    j2["driftkind"] = "sudden";
    CHECK_THROWS_AS(drift_config_from_json(j2), ConfigError);
    auto j3 = j;
    j3["drift_kind"] = "seasonal";
    CHECK_THROWS_AS(drift_config_from_json(j3), ConfigError);
}

TEST_CASE("synthetic generator determinism and shape") {
    DriftConfig c;
    c.base_period = 24;
    c.n_days = 6;
    c.n_nodes = 3;
    c.drift_time = 72;
    c.magnitude = 1.0;
    c.noise_std = 0.1;
    c.seed = 42;
    const UrbanSeries a = generate_synthetic_drift(c);
    const UrbanSeries b = generate_synthetic_drift(c);
    CHECK(a.T() == 144);
    CHECK(a.N() == 3);
    CHECK(a.C() == 1);
    REQUIRE(a.values.size() == b.values.size());
    bool identical = true;
    for (long long i = 0; i < a.values.size(); ++i)
        if (a.values[i] != b.values[i]) identical = false;
    CHECK(identical);

    DriftConfig c2 = c;
    c2.seed = 43;
    const UrbanSeries d = generate_synthetic_drift(c2);
    bool differs = false;
    for (long long i = 0; i < a.values.size(); ++i)
        if (a.values[i] != d.values[i]) differs = true;
    CHECK(differs);
}

TEST_CASE("zero magnitude zero noise is exactly periodic") {
    DriftConfig c;
    c.base_period = 24;
    c.n_days = 8;
    c.n_nodes = 4;
    c.drift_time = 96;
    c.magnitude = 0.0;
    c.noise_std = 0.0;
    c.seed = 3;
    const UrbanSeries s = generate_synthetic_drift(c);
    for (long long t = 0; t + 24 < s.T(); ++t)
        for (int i = 0; i < s.N(); ++i)
            CHECK(s.values.at(static_cast<int>(t), i, 0) ==
                  s.values.at(static_cast<int>(t) + 24, i, 0));
}

TEST_CASE("sudden drift shifts whole-day slice means by exactly the magnitude") {
    DriftConfig c;
    c.base_period = 24;
    c.n_days = 10;
    c.n_nodes = 5;
    c.magnitude = 3.7;
    c.noise_std = 0.0;
    c.seed = 11;
    for (long long drift_time : {120LL, 130LL}) {  // day boundary and mid-day
        c.drift_time = drift_time;
        const UrbanSeries s = generate_synthetic_drift(c);
        for (int i = 0; i < s.N(); ++i) {
            const double pre = slice_mean(s, i, drift_time - 24, drift_time);
            const double post = slice_mean(s, i, drift_time, drift_time + 24);
            CHECK(post - pre == doctest::Approx(3.7).epsilon(1e-9));
        }
    }
}

TEST_CASE("incremental drift ramps to the full shift over seven days") {
    DriftConfig c;
    c.drift_kind = DriftKind::incremental;
    c.base_period = 24;
    c.n_days = 14;
    c.n_nodes = 3;
    c.drift_time = 96;
    c.magnitude = 2.0;
    c.noise_std = 0.0;
    c.seed = 9;
    const UrbanSeries s = generate_synthetic_drift(c);
    const long long ramp_end = 96 + 7 * 24;
    for (int i = 0; i < s.N(); ++i) {
        const double pre = slice_mean(s, i, 96 - 24, 96);
        const double post = slice_mean(s, i, ramp_end + 24, ramp_end + 48);
        CHECK(post - pre == doctest::Approx(2.0).epsilon(1e-9));
        // mid-ramp sits strictly between
        const double mid = slice_mean(s, i, 96 + 3 * 24, 96 + 4 * 24);
        CHECK(mid - pre > 0.2);
        CHECK(mid - pre < 1.8);
    }
}

TEST_CASE("chronological split arithmetic") {
    const SplitRanges s = chronological_split(1000, 800, 0.2);
    CHECK(s.train.begin == 0);
    CHECK(s.train.end == 640);
    CHECK(s.val.begin == 640);
    CHECK(s.val.end == 800);
    CHECK(s.test.begin == 800);
    CHECK(s.test.end == 1000);

    // partition property on a few shapes
    for (long long te : {100LL, 777LL, 999LL}) {
        const SplitRanges r = chronological_split(1000, te, 0.25);
        CHECK(r.train.begin == 0);
        CHECK(r.train.end == r.val.begin);
        CHECK(r.val.end == r.test.begin);
        CHECK(r.test.end == 1000);
    }

    const SplitRanges v0 = chronological_split(1000, 800, 0.0);
    CHECK(v0.val.size() == 0);

    CHECK_THROWS_AS(chronological_split(1000, 1000, 0.2), ConfigError);
    CHECK_THROWS_AS(chronological_split(1000, 0, 0.2), ConfigError);
    CHECK_THROWS_AS(chronological_split(1000, 500, 1.0), ConfigError);
}

TEST_CASE("drift-aware input segment layout") {
    const UrbanSeries s = make_index_series(1100, 2, 288);
    const DriftAwareInput in = build_drift_aware_input(s, 1000, 12, 2);
    REQUIRE(in.segments.size() == 5);
    CHECK(in.segment_ends == std::vector<long long>{1000, 712, 724, 424, 436});
    const std::vector<long long> starts{989, 701, 713, 413, 425};
    for (std::size_t g = 0; g < 5; ++g) {
        const Tensor& seg = in.segments[g];
        REQUIRE(seg.dim(0) == 12);
        REQUIRE(seg.dim(1) == 2);
        for (int r = 0; r < 12; ++r)
            for (int i = 0; i < 2; ++i)
                CHECK(seg.at(r, i, 0) == doctest::Approx(starts[g] + r + 0.001 * i));
    }
}

TEST_CASE("drift-aware input boundaries") {
    const UrbanSeries s = make_index_series(1100, 2, 288);
    const long long earliest = earliest_anchor(12, 288, 2);
    CHECK(earliest == 587);
    CHECK_NOTHROW(build_drift_aware_input(s, earliest, 12, 2));
    CHECK_THROWS_AS(build_drift_aware_input(s, earliest - 1, 12, 2), WindowError);
    CHECK_THROWS_AS(build_drift_aware_input(s, 1100, 12, 2), WindowError);

    // K=0 degenerates to the single current segment
    const DriftAwareInput solo = build_drift_aware_input(s, 50, 12, 0);
    CHECK(solo.segments.size() == 1);
    CHECK(solo.segment_ends == std::vector<long long>{50});

    // p < alpha rejected
    UrbanSeries tiny = make_index_series(100, 2, 8);
    CHECK_THROWS_AS(build_drift_aware_input(tiny, 50, 12, 1), ConfigError);
}

TEST_CASE("anchor enumeration") {
    const UrbanSeries s = make_index_series(1000, 2, 288);
    const auto anchors = enumerate_samples(s, 12, 2, Range{0, 1000});
    REQUIRE(!anchors.empty());
    CHECK(anchors.front() == 587);
    CHECK(anchors.back() == 987);
    for (std::size_t i = 1; i < anchors.size(); ++i) CHECK(anchors[i] == anchors[i - 1] + 1);

    const UrbanSeries s2 = make_index_series(100, 2, 24);
    const auto a2 = enumerate_samples(s2, 12, 0, Range{0, 100});
    CHECK(a2.front() == 11);
    CHECK(a2.back() == 87);

    CHECK_THROWS_AS(enumerate_samples(s2, 12, 2, Range{0, 60}), ConfigError);
}

TEST_CASE("target extraction") {
    const UrbanSeries s = make_index_series(100, 3, 24);
    const Tensor y = target_at(s, 50, 12);
    REQUIRE(y.dim(0) == 12);
    for (int r = 0; r < 12; ++r)
        for (int i = 0; i < 3; ++i) CHECK(y.at(r, i, 0) == doctest::Approx(51 + r + 0.001 * i));
    CHECK_THROWS_AS(target_at(s, 88, 12), WindowError);
}

TEST_CASE("normalization round trip and train-only stats") {
    DriftConfig c;
    c.base_period = 24;
    c.n_days = 20;
    c.n_nodes = 4;
    c.drift_time = 240;
    c.magnitude = 4.0;
    c.noise_std = 0.02;
    c.seed = 21;
    const UrbanSeries s = generate_synthetic_drift(c);
    const Range train{0, 240};
    const NormalizationStats st = compute_stats(s, train);
    const UrbanSeries norm = normalize(s, st);

    // train block is zero-mean per node under its own stats
    for (int i = 0; i < s.N(); ++i) {
        double m = 0.0;
        for (long long t = 0; t < 240; ++t) m += norm.values.at(static_cast<int>(t), i, 0);
        m /= 240.0;
        CHECK(std::abs(m) < 1e-6);
        // post-drift block is visibly shifted in normalized space
        double mt = 0.0;
        for (long long t = 240; t < s.T(); ++t) mt += norm.values.at(static_cast<int>(t), i, 0);
        mt /= static_cast<double>(s.T() - 240);
        CHECK(std::abs(mt) > 0.5);
    }

    // denormalize inverts normalize on a window
    Tensor block({12, s.N(), 1});
    for (int r = 0; r < 12; ++r)
        for (int i = 0; i < s.N(); ++i) block.at(r, i, 0) = norm.values.at(100 + r, i, 0);
    denormalize(block, st);
    for (int r = 0; r < 12; ++r)
        for (int i = 0; i < s.N(); ++i)
            CHECK(block.at(r, i, 0) ==
                  doctest::Approx(s.values.at(100 + r, i, 0)).epsilon(1e-9));

    // constant node gets the std floor and normalizes to zero
    UrbanSeries flat = make_index_series(50, 1, 10);
    for (int t = 0; t < 50; ++t) flat.values.at(t, 0, 0) = 7.5;
    const NormalizationStats fs = compute_stats(flat, Range{0, 50});
    CHECK(fs.std.at(0, 0) == doctest::Approx(1e-4));
    const UrbanSeries fn = normalize(flat, fs);
    CHECK(fn.values.at(10, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("csv parse of a minimal file") {
    const std::string path = temp_path("memda_test_min.csv");
    {
        std::ofstream out(path);
        out << "timestamp,a,b\n";
        out << "2024-01-01T00:00:00,1,2\n";
        out << "2024-01-01T08:00:00,3,4\n";
        out << "2024-01-01T16:00:00,5,6\n";
    }
    const UrbanSeries s = load_csv(path, 3, 1);
    CHECK(s.T() == 3);
    CHECK(s.N() == 2);
    CHECK(s.C() == 1);
    CHECK(s.node_ids == std::vector<std::string>{"a", "b"});
    CHECK(s.values.at(0, 0, 0) == 1.0);
    CHECK(s.values.at(2, 1, 0) == 6.0);
    std::remove(path.c_str());
}

TEST_CASE("csv rejects disorder and malformed rows") {
    const std::string path = temp_path("memda_test_bad.csv");
    {
        std::ofstream out(path);
        out << "timestamp,a\n";
        out << "2024-01-01T01:00:00,1\n";
        out << "2024-01-01T00:00:00,2\n";
    }
    CHECK_THROWS_AS(load_csv(path, 24, 1), DataError);
    {
        std::ofstream out(path);
        out << "timestamp,a\n";
        out << "2024-01-01T00:00:00,1,9\n";
    }
    CHECK_THROWS_AS(load_csv(path, 24, 1), DataError);
    {
        std::ofstream out(path);
        out << "timestamp,a\n";
        out << "2024-01-01T00:00:00,xyz\n";
    }
    CHECK_THROWS_AS(load_csv(path, 24, 1), DataError);
    std::remove(path.c_str());
}

TEST_CASE("csv missing-value policy") {
    const std::string path = temp_path("memda_test_gap.csv");
    auto write_gap = [&](int gap_len) {
        std::ofstream out(path);
        out << "timestamp,a\n";
        int hour = 0;
        auto row = [&](const std::string& v) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "2024-01-%02dT%02d:00:00", 1 + hour / 24, hour % 24);
            out << buf << "," << v << "\n";
            ++hour;
        };
        row("10");
        for (int i = 0; i < gap_len; ++i) row("");
        row("20");
    };

    write_gap(2);
    const UrbanSeries s = load_csv(path, 24, 1);
    CHECK(s.T() == 4);
    CHECK(s.values.at(1, 0, 0) == doctest::Approx(10.0 + 10.0 / 3.0));
    CHECK(s.values.at(2, 0, 0) == doctest::Approx(10.0 + 20.0 / 3.0));

    write_gap(4);
    CHECK_THROWS_AS(load_csv(path, 24, 1), DataError);

    write_gap(1);
    CHECK_THROWS_AS(load_csv(path, 24, 1, /*strict=*/true), DataError);

    // leading gap has no left neighbor
    {
        std::ofstream out(path);
        out << "timestamp,a\n";
        out << "2024-01-01T00:00:00,\n";
        out << "2024-01-01T01:00:00,5\n";
    }
    CHECK_THROWS_AS(load_csv(path, 24, 1), DataError);
    std::remove(path.c_str());
}

TEST_CASE("csv save/load round trip") {
    DriftConfig c;
    c.base_period = 24;
    c.n_days = 3;
    c.n_nodes = 3;
    c.drift_time = 36;
    c.magnitude = 1.5;
    c.noise_std = 0.3;
    c.seed = 77;
    const UrbanSeries s = generate_synthetic_drift(c);
    const std::string path = temp_path("memda_test_rt.csv");
    save_csv(s, path);
    const UrbanSeries back = load_csv(path, 24, 1);
    REQUIRE(back.T() == s.T());
    REQUIRE(back.N() == s.N());
    CHECK(back.start_epoch_s == s.start_epoch_s);
    CHECK(back.node_ids == s.node_ids);
    bool identical = true;
    for (long long i = 0; i < s.values.size(); ++i)
        if (back.values[i] != s.values[i]) identical = false;
    CHECK(identical);  // %.17g round-trips doubles exactly

    // byte-identical rewrite under the same seed
    const std::string path2 = temp_path("memda_test_rt2.csv");
    save_csv(generate_synthetic_drift(c), path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("multichannel csv header") {
    UrbanSeries s;
    s.values = Tensor({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    s.samples_per_day = 24;
    s.start_epoch_s = parse_iso8601("2024-01-01T00:00:00");
    s.node_ids = {"u", "v"};
    const std::string path = temp_path("memda_test_mc.csv");
    save_csv(s, path);
    const UrbanSeries back = load_csv(path, 24, 2);
    CHECK(back.N() == 2);
    CHECK(back.C() == 2);
    CHECK(back.node_ids == std::vector<std::string>{"u", "v"});
    for (long long i = 0; i < s.values.size(); ++i) CHECK(back.values[i] == s.values[i]);
    std::remove(path.c_str());
}
