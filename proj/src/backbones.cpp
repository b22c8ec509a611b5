#include "memda/backbones.hpp"

#include <algorithm>

#include "memda/errors.hpp"
#include "memda/init.hpp"

namespace memda {

namespace {

void check_segment(const Tensor& seg, const EncoderConfig& cfg) {
    if (seg.rank() != 3 || seg.dim(0) != cfg.alpha || seg.dim(2) != cfg.C)
        throw ShapeError("encoder expects (" + std::to_string(cfg.alpha) + " x N x " +
                         std::to_string(cfg.C) + ") segment, got " + seg.shape_str());
}

// (alpha x N x C) -> (N x alpha x C), the axis order conv1d wants
Tensor to_node_major(const Tensor& seg) {
    const int a = seg.dim(0), n = seg.dim(1), c = seg.dim(2);
    Tensor out({n, a, c});
    for (int t = 0; t < a; ++t)
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) out.at(i, t, ch) = seg.at(t, i, ch);
    return out;
}

/// Causal dilated conv stack (dilations 1, 2, 4, kernel 2) with ReLU between
/// layers, then a learned linear collapse of the full time axis.
class TemporalConvEncoder final : public Encoder {
public:
    TemporalConvEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int h = cfg.hidden;
        w1_ = Parameter("encoder.conv1.w", uniform_fanin(rng, {2, cfg.C, h}, 2 * cfg.C));
        b1_ = Parameter("encoder.conv1.b", Tensor({h}));
        w2_ = Parameter("encoder.conv2.w", uniform_fanin(rng, {2, h, h}, 2 * h));
        b2_ = Parameter("encoder.conv2.b", Tensor({h}));
        w3_ = Parameter("encoder.conv3.w", uniform_fanin(rng, {2, h, h}, 2 * h));
        b3_ = Parameter("encoder.conv3.b", Tensor({h}));
        w_out_ = Parameter("encoder.collapse.w",
                           uniform_fanin(rng, {cfg.alpha * h, cfg.C_e}, cfg.alpha * h));
        b_out_ = Parameter("encoder.collapse.b", Tensor({cfg.C_e}));
    }

    Tape::Var encode(Tape& tape, const Tensor& segment) override {
        check_segment(segment, cfg_);
        const int n = segment.dim(1);
        auto x = tape.leaf(to_node_major(segment));
        auto h1 = tape.relu(tape.conv1d_causal(x, tape.param(w1_), tape.param(b1_), 1));
        auto h2 = tape.relu(tape.conv1d_causal(h1, tape.param(w2_), tape.param(b2_), 2));
        auto h3 = tape.relu(tape.conv1d_causal(h2, tape.param(w3_), tape.param(b3_), 4));
        auto flat = tape.reshape(h3, {n, cfg_.alpha * cfg_.hidden});
        return tape.add_rows(tape.matmul(flat, tape.param(w_out_)), tape.param(b_out_));
    }

    std::vector<Parameter*> parameters() override {
        return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_, &w_out_, &b_out_};
    }

    const EncoderConfig& config() const override { return cfg_; }

private:
    EncoderConfig cfg_;
    Parameter w1_, b1_, w2_, b2_, w3_, b3_, w_out_, b_out_;
};

/// Gated recurrent encoder; the last hidden state is the embedding.
class RecurrentEncoder final : public Encoder {
public:
    RecurrentEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int c = cfg.C, h = cfg.C_e;
        w_r_ = Parameter("encoder.gru.w_r", uniform_fanin(rng, {c, h}, c));
        u_r_ = Parameter("encoder.gru.u_r", uniform_fanin(rng, {h, h}, h));
        b_r_ = Parameter("encoder.gru.b_r", Tensor({h}));
        w_z_ = Parameter("encoder.gru.w_z", uniform_fanin(rng, {c, h}, c));
        u_z_ = Parameter("encoder.gru.u_z", uniform_fanin(rng, {h, h}, h));
        b_z_ = Parameter("encoder.gru.b_z", Tensor({h}));
        w_n_ = Parameter("encoder.gru.w_n", uniform_fanin(rng, {c, h}, c));
        u_n_ = Parameter("encoder.gru.u_n", uniform_fanin(rng, {h, h}, h));
        b_n_ = Parameter("encoder.gru.b_n", Tensor({h}));
    }

    Tape::Var encode(Tape& tape, const Tensor& segment) override {
        check_segment(segment, cfg_);
        const int n = segment.dim(1), c = cfg_.C, hw = cfg_.C_e;
        auto h = tape.leaf(Tensor({n, hw}));
        auto ones = tape.leaf(Tensor::full({n, hw}, 1.0));
        for (int t = 0; t < cfg_.alpha; ++t) {
            Tensor step({n, c});
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) step.at(i, ch) = segment.at(t, i, ch);
            auto x = tape.leaf(std::move(step));
            auto r = tape.sigmoid(tape.add_rows(
                tape.add(tape.matmul(x, tape.param(w_r_)), tape.matmul(h, tape.param(u_r_))),
                tape.param(b_r_)));
            auto z = tape.sigmoid(tape.add_rows(
                tape.add(tape.matmul(x, tape.param(w_z_)), tape.matmul(h, tape.param(u_z_))),
                tape.param(b_z_)));
            auto cand = tape.tanh(tape.add_rows(
                tape.add(tape.matmul(x, tape.param(w_n_)),
                         tape.matmul(tape.mul(r, h), tape.param(u_n_))),
                tape.param(b_n_)));
            h = tape.add(tape.mul(tape.sub(ones, z), cand), tape.mul(z, h));
        }
        return h;
    }

    std::vector<Parameter*> parameters() override {
        return {&w_r_, &u_r_, &b_r_, &w_z_, &u_z_, &b_z_, &w_n_, &u_n_, &b_n_};
    }

    const EncoderConfig& config() const override { return cfg_; }

private:
    EncoderConfig cfg_;
    Parameter w_r_, u_r_, b_r_, w_z_, u_z_, b_z_, w_n_, u_n_, b_n_;
};

}  // namespace

std::vector<std::string> encoder_names() { return {"temporal-conv", "recurrent"}; }

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg, Rng& rng) {
    if (cfg.alpha <= 0 || cfg.C <= 0 || cfg.C_e <= 0 || cfg.hidden <= 0)
        throw ConfigError("encoder dims must be positive");
    if (cfg.kind == "temporal-conv") return std::make_unique<TemporalConvEncoder>(cfg, rng);
    if (cfg.kind == "recurrent") return std::make_unique<RecurrentEncoder>(cfg, rng);
    std::string names;
    for (const auto& n : encoder_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown encoder kind '" + cfg.kind + "' (available: " + names + ")");
}

Decoder Decoder::init(int C_e, int hidden, int alpha, int C, Rng& rng) {
    if (C_e <= 0 || hidden <= 0 || alpha <= 0 || C <= 0)
        throw ConfigError("decoder dims must be positive");
    Decoder d;
    d.C_e = C_e;
    d.hidden = hidden;
    d.alpha = alpha;
    d.C = C;
    d.w1 = Parameter("decoder.w1", uniform_fanin(rng, {C_e, hidden}, C_e));
    d.b1 = Parameter("decoder.b1", Tensor({hidden}));
    d.w2 = Parameter("decoder.w2", uniform_fanin(rng, {hidden, alpha * C}, hidden));
    d.b2 = Parameter("decoder.b2", Tensor({alpha * C}));
    return d;
}

Tape::Var Decoder::decode(Tape& tape, Tape::Var fused) {
    const Tensor& f = tape.value(fused);
    if (f.rank() != 2 || f.dim(1) != C_e)
        throw ShapeError("decoder expects (N x " + std::to_string(C_e) + "), got " + f.shape_str());
    auto h = tape.relu(tape.add_rows(tape.matmul(fused, tape.param(w1)), tape.param(b1)));
    return tape.add_rows(tape.matmul(h, tape.param(w2)), tape.param(b2));
}

std::vector<Parameter*> Decoder::parameters() { return {&w1, &b1, &w2, &b2}; }

Tensor reshape_prediction(const Tensor& dec_out, int alpha, int C) {
    if (dec_out.rank() != 2 || dec_out.dim(1) != alpha * C)
        throw ShapeError("prediction reshape expects (N x " + std::to_string(alpha * C) +
                         "), got " + dec_out.shape_str());
    const int n = dec_out.dim(0);
    Tensor out({alpha, n, C});
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < alpha; ++t)
            for (int c = 0; c < C; ++c) out.at(t, i, c) = dec_out.at(i, t * C + c);
    return out;
}

Tensor flatten_target(const Tensor& block) {
    if (block.rank() != 3) throw ShapeError("target flatten expects (alpha x N x C)");
    const int a = block.dim(0), n = block.dim(1), c = block.dim(2);
    Tensor out({n, a * c});
    for (int t = 0; t < a; ++t)
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) out.at(i, t * c + ch) = block.at(t, i, ch);
    return out;
}

long long parameter_count(const std::vector<Parameter*>& params) {
    long long n = 0;
    for (const auto* p : params) n += p->value.size();
    return n;
}

}  // namespace memda
