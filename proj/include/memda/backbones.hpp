#pragma once

#include <memory>
#include <string>
#include <vector>

#include "memda/autodiff.hpp"
#include "memda/rng.hpp"

namespace memda {

struct EncoderConfig {
    std::string kind = "temporal-conv";
    int alpha = 12;
    int C = 1;
    int C_e = 64;
    int hidden = 32;
};

/// Segment encoder: maps one raw (alpha x N x C) segment to (N x C_e),
/// collapsing time. Segments are constants; gradients flow only into the
/// encoder parameters.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual Tape::Var encode(Tape& tape, const Tensor& segment) = 0;
    virtual std::vector<Parameter*> parameters() = 0;
    virtual const EncoderConfig& config() const = 0;

    Tensor encode_plain(const Tensor& segment) {
        Tape tape;
        return tape.value(encode(tape, segment));
    }
};

/// Registered encoder kinds, currently {"temporal-conv", "recurrent"}.
std::vector<std::string> encoder_names();
std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg, Rng& rng);

/// Pointwise two-layer projection head. On tape the output lives in
/// (N x alpha*C) layout; reshape_prediction restores (alpha x N x C).
struct Decoder {
    int C_e = 0, hidden = 0, alpha = 0, C = 0;
    Parameter w1;  // (C_e x hidden)
    Parameter b1;  // (hidden)
    Parameter w2;  // (hidden x alpha*C)
    Parameter b2;  // (alpha*C)

    static Decoder init(int C_e, int hidden, int alpha, int C, Rng& rng);
    Tape::Var decode(Tape& tape, Tape::Var fused);
    std::vector<Parameter*> parameters();
};

/// (N x alpha*C) decoder layout -> (alpha x N x C) block.
Tensor reshape_prediction(const Tensor& dec_out, int alpha, int C);
/// (alpha x N x C) block -> (N x alpha*C) decoder layout.
Tensor flatten_target(const Tensor& block);

long long parameter_count(const std::vector<Parameter*>& params);

}  // namespace memda
