#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memda/adaptor.hpp"
#include "memda/backbones.hpp"
#include "memda/data.hpp"
#include "memda/pattern_memory.hpp"

namespace memda {

/// Ablation ladder: encoder+decoder only; + replayed drift-aware inputs with
/// a static trainable fusion vector; + pattern memory; static fusion swapped
/// for a weight generator fed by pooled embeddings; full pair/NTN adaptor.
enum class Variant { backbone, rm, rm_pm, meta, memda };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);
std::vector<std::string> variant_names();

struct ModelConfig {
    Variant variant = Variant::memda;
    std::string encoder_kind = "temporal-conv";
    int alpha = 12;
    int K = 2;
    int C = 1;
    int C_e = 256;
    int hidden = 64;
    int L = 20;
    int D = 32;
    int N_s = 5;
    std::uint64_t seed = 0;

    /// Look-back actually used: the backbone variant keeps none.
    int effective_K() const { return variant == Variant::backbone ? 0 : K; }
    int segment_count() const { return 2 * effective_K() + 1; }
    bool uses_pm() const {
        return variant == Variant::rm_pm || variant == Variant::meta || variant == Variant::memda;
    }
    int fusion_count() const { return uses_pm() ? 4 * K + 2 : 2 * K + 1; }

    void validate() const;
};

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = ModelConfig{});
nlohmann::json model_config_to_json(const ModelConfig& c);

/// One forecasting model instance: encoder, optional pattern memory, a
/// fusion-weight source chosen by the variant, and the projection decoder.
class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    Encoder& encoder() { return *encoder_; }
    Decoder& decoder() { return decoder_; }
    PatternMemory* pattern_memory() { return pm_ ? &*pm_ : nullptr; }
    DriftAdaptor* adaptor() { return adaptor_ ? &*adaptor_ : nullptr; }
    Parameter* static_weights() { return static_w_ ? &*static_w_ : nullptr; }

    /// Every trainable parameter, in a fixed order.
    std::vector<Parameter*> parameters();

    /// Counted live encode; all encoder invocations go through here.
    Tape::Var encode_segment(Tape& tape, const Tensor& segment);
    Tensor encode_segment_plain(const Tensor& segment);
    long long encoder_calls() const { return encoder_calls_; }
    void reset_encoder_calls() { encoder_calls_ = 0; }

    struct Forward {
        Tape::Var prediction{-1};  // (N x alpha*C) decoder layout
        Tape::Var z_current{-1};   // live embedding of X_t
        Tensor weights;            // fusion weights used (empty for backbone)
    };

    /// `replayed`: the 2K embeddings gathered from replay memory in gather
    /// order, treated as constants. Pass empty to live-encode every segment
    /// (the no-replay mode; gradients then flow through all 2K+1 encodes).
    Forward forward(Tape& tape, const DriftAwareInput& input, const std::vector<Tensor>& replayed);

    /// Convenience forward without gradients: (alpha x N x C) prediction.
    Tensor predict(const DriftAwareInput& input, const std::vector<Tensor>& replayed,
                   Tensor* weights_out = nullptr);

private:
    ModelConfig cfg_;
    std::unique_ptr<Encoder> encoder_;
    Decoder decoder_;
    std::optional<PatternMemory> pm_;
    std::optional<DriftAdaptor> adaptor_;
    std::optional<Parameter> static_w_;              // rm, rm_pm
    std::optional<Parameter> meta_w_, meta_b_;       // meta variant generator
    long long encoder_calls_ = 0;
};

}  // namespace memda
