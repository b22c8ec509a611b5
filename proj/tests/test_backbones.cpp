#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "memda/backbones.hpp"
#include "memda/errors.hpp"

using namespace memda;

namespace {

Tensor rand_segment(Rng& rng, int alpha, int n, int c) {
    Tensor seg({alpha, n, c});
    for (long long i = 0; i < seg.size(); ++i) seg[i] = rng.uniform(-1.0, 1.0);
    return seg;
}

}  // namespace

TEST_CASE("registry kinds and unknown-name error") {
    CHECK(encoder_names() == std::vector<std::string>{"temporal-conv", "recurrent"});
    Rng rng(1);
    EncoderConfig cfg;
    for (const auto& kind : encoder_names()) {
        cfg.kind = kind;
        CHECK(make_encoder(cfg, rng) != nullptr);
    }
    cfg.kind = "gw-net";
    try {
        make_encoder(cfg, rng);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("temporal-conv") != std::string::npos);
        CHECK(msg.find("recurrent") != std::string::npos);
    }
}

TEST_CASE("encoder output shape and determinism") {
    for (const auto& kind : encoder_names()) {
        EncoderConfig cfg;
        cfg.kind = kind;
        cfg.alpha = 12;
        cfg.C = 1;
        cfg.C_e = 16;
        cfg.hidden = 8;
        Rng rng(2);
        auto enc = make_encoder(cfg, rng);
        Rng data_rng(3);
        const Tensor seg = rand_segment(data_rng, 12, 4, 1);
        const Tensor z1 = enc->encode_plain(seg);
        const Tensor z2 = enc->encode_plain(seg);
        REQUIRE(z1.shape() == std::vector<int>{4, 16});
        for (long long i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);

        // same seed reproduces parameters
        Rng rng2(2);
        auto enc2 = make_encoder(cfg, rng2);
        auto pa = enc->parameters();
        auto pb = enc2->parameters();
        REQUIRE(pa.size() == pb.size());
        for (std::size_t p = 0; p < pa.size(); ++p)
            for (long long i = 0; i < pa[p]->value.size(); ++i)
                CHECK(pa[p]->value[i] == pb[p]->value[i]);
    }
}

TEST_CASE("segment shape mismatch is rejected") {
    EncoderConfig cfg;
    cfg.alpha = 12;
    Rng rng(4);
    auto enc = make_encoder(cfg, rng);
    Tape tape;
    CHECK_THROWS_AS(enc->encode(tape, Tensor({11, 4, 1})), ShapeError);
    CHECK_THROWS_AS(enc->encode(tape, Tensor({12, 4})), ShapeError);
}

TEST_CASE("zeroed temporal-conv encoder maps everything to zero") {
    EncoderConfig cfg;
    cfg.kind = "temporal-conv";
    cfg.alpha = 8;
    cfg.C_e = 6;
    cfg.hidden = 4;
    Rng rng(5);
    auto enc = make_encoder(cfg, rng);
    for (auto* p : enc->parameters()) p->value.fill(0.0);
    Rng data_rng(6);
    const Tensor z = enc->encode_plain(rand_segment(data_rng, 8, 3, 1));
    for (long long i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("encoders treat nodes independently") {
    for (const auto& kind : encoder_names()) {
        EncoderConfig cfg;
        cfg.kind = kind;
        cfg.alpha = 6;
        cfg.C_e = 8;
        cfg.hidden = 4;
        Rng rng(7);
        auto enc = make_encoder(cfg, rng);
        Rng data_rng(8);
        const Tensor seg = rand_segment(data_rng, 6, 3, 1);
        const Tensor full = enc->encode_plain(seg);
        for (int node = 0; node < 3; ++node) {
            Tensor solo({6, 1, 1});
            for (int t = 0; t < 6; ++t) solo.at(t, 0, 0) = seg.at(t, node, 0);
            const Tensor z = enc->encode_plain(solo);
            for (int c = 0; c < 8; ++c)
                CHECK(z.at(0, c) == doctest::Approx(full.at(node, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("decoder shape, zero case and layout round trip") {
    Rng rng(9);
    Decoder dec = Decoder::init(16, 8, 12, 1, rng);
    Tape tape;
    Rng data_rng(10);
    Tensor fused({4, 16});
    for (long long i = 0; i < fused.size(); ++i) fused[i] = data_rng.uniform(-1.0, 1.0);
    const Tensor& out = tape.value(dec.decode(tape, tape.leaf(fused)));
    CHECK(out.shape() == std::vector<int>{4, 12});

    const Tensor pred = reshape_prediction(out, 12, 1);
    CHECK(pred.shape() == std::vector<int>{12, 4, 1});
    const Tensor back = flatten_target(pred);
    for (long long i = 0; i < out.size(); ++i) CHECK(back[i] == out[i]);

    for (auto* p : dec.parameters()) p->value.fill(0.0);
    Tape t2;
    const Tensor& zero = t2.value(dec.decode(t2, t2.leaf(Tensor({4, 16}))));
    for (long long i = 0; i < zero.size(); ++i) CHECK(zero[i] == 0.0);

    Tape t3;
    CHECK_THROWS_AS(dec.decode(t3, t3.leaf(Tensor({4, 7}))), ShapeError);
}

TEST_CASE("decoder gradients match finite differences") {
    Rng rng(11);
    Decoder dec = Decoder::init(5, 4, 3, 1, rng);
    Rng data_rng(12);
    Tensor fused({2, 5}), coeffs({2, 3});
    for (long long i = 0; i < fused.size(); ++i) fused[i] = data_rng.uniform(-1.0, 1.0);
    for (long long i = 0; i < coeffs.size(); ++i) coeffs[i] = data_rng.uniform(-1.0, 1.0);

    auto build = [&](Tape& t) {
        return t.sum(t.mul(dec.decode(t, t.leaf(fused)), t.leaf(coeffs)));
    };
    for (auto* p : dec.parameters()) p->zero_grad();
    {
        Tape tape;
        tape.backward(build(tape));
    }
    const double h = 1e-6;
    for (auto* p : dec.parameters()) {
        for (long long i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            Tape tp;
            const double lp = tp.value(build(tp))[0];
            p->value[i] = orig - h;
            Tape tm;
            const double lm = tm.value(build(tm))[0];
            p->value[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(p->grad[i]), 1e-8});
            CHECK(std::abs(p->grad[i] - fd) / denom < 1e-4);
        }
    }
}

TEST_CASE("encoder gradients match finite differences") {
    for (const auto& kind : encoder_names()) {
        EncoderConfig cfg;
        cfg.kind = kind;
        cfg.alpha = 5;
        cfg.C = 1;
        cfg.C_e = 3;
        cfg.hidden = 2;
        Rng rng(13);
        auto enc = make_encoder(cfg, rng);
        Rng data_rng(14);
        // randomize every parameter (biases included) so no relu pre-activation
        // sits exactly on the kink, where subgradient and central difference
        // legitimately disagree
        for (auto* p : enc->parameters())
            for (long long i = 0; i < p->value.size(); ++i) p->value[i] = data_rng.uniform(-0.5, 0.5);
        const Tensor seg = rand_segment(data_rng, 5, 2, 1);
        Tensor coeffs({2, 3});
        for (long long i = 0; i < coeffs.size(); ++i) coeffs[i] = data_rng.uniform(-1.0, 1.0);

        auto build = [&](Tape& t) { return t.sum(t.mul(enc->encode(t, seg), t.leaf(coeffs))); };
        for (auto* p : enc->parameters()) p->zero_grad();
        {
            Tape tape;
            tape.backward(build(tape));
        }
        const double h = 1e-6;
        for (auto* p : enc->parameters()) {
            for (long long i = 0; i < p->value.size(); ++i) {
                const double orig = p->value[i];
                p->value[i] = orig + h;
                Tape tp;
                const double lp = tp.value(build(tp))[0];
                p->value[i] = orig - h;
                Tape tm;
                const double lm = tm.value(build(tm))[0];
                p->value[i] = orig;
                const double fd = (lp - lm) / (2.0 * h);
                const double denom = std::max({std::abs(fd), std::abs(p->grad[i]), 1e-8});
                INFO(kind, " param ", p->name, " index ", i);
                CHECK(std::abs(p->grad[i] - fd) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("desk-scale parameter budget stays under 500k") {
    Rng rng(15);
    for (const auto& kind : encoder_names()) {
        EncoderConfig cfg;
        cfg.kind = kind;
        cfg.alpha = 12;
        cfg.C = 1;
        cfg.C_e = 64;
        cfg.hidden = 32;
        auto enc = make_encoder(cfg, rng);
        Decoder dec = Decoder::init(64, 32, 12, 1, rng);
        const long long total = parameter_count(enc->parameters()) + parameter_count(dec.parameters());
        INFO(kind, " total ", total);
        CHECK(total < 500000);
    }
}
