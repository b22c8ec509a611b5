#include "memda/model.hpp"

#include "memda/errors.hpp"
#include "memda/init.hpp"

namespace memda {

Variant variant_from_string(const std::string& s) {
    if (s == "backbone") return Variant::backbone;
    if (s == "rm") return Variant::rm;
    if (s == "rm_pm") return Variant::rm_pm;
    if (s == "meta") return Variant::meta;
    if (s == "memda") return Variant::memda;
    std::string names;
    for (const auto& n : variant_names()) {
        if (!names.empty()) names += ", ";
        names += n;
    }
    throw ConfigError("unknown variant '" + s + "' (known: " + names + ")");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::backbone: return "backbone";
        case Variant::rm: return "rm";
        case Variant::rm_pm: return "rm_pm";
        case Variant::meta: return "meta";
        case Variant::memda: return "memda";
    }
    throw ConfigError("invalid variant value");
}

std::vector<std::string> variant_names() {
    return {"backbone", "rm", "rm_pm", "meta", "memda"};
}

void ModelConfig::validate() const {
    if (alpha < 1) throw ConfigError("alpha must be >= 1, got " + std::to_string(alpha));
    if (variant != Variant::backbone && K < 1)
        throw ConfigError("K must be >= 1 for variant " + to_string(variant));
    if (C < 1 || C_e < 1 || hidden < 1)
        throw ConfigError("channel and width settings must be >= 1");
    if (uses_pm() && (L < 1 || D < 1))
        throw ConfigError("pattern memory needs L >= 1 and D >= 1");
    if (variant == Variant::memda && N_s < 1)
        throw ConfigError("N_s must be >= 1 for variant memda");
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base) {
    static const std::vector<std::string> known = {
        "variant", "encoder", "alpha", "K", "C", "C_e", "hidden", "L", "D", "N_s", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown model config key '" + it.key() + "'");
    }
    ModelConfig c = base;
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("encoder")) c.encoder_kind = j.at("encoder").get<std::string>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<int>();
    if (j.contains("K")) c.K = j.at("K").get<int>();
    if (j.contains("C")) c.C = j.at("C").get<int>();
    if (j.contains("C_e")) c.C_e = j.at("C_e").get<int>();
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<int>();
    if (j.contains("L")) c.L = j.at("L").get<int>();
    if (j.contains("D")) c.D = j.at("D").get<int>();
    if (j.contains("N_s")) c.N_s = j.at("N_s").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{
        {"variant", to_string(c.variant)}, {"encoder", c.encoder_kind}, {"alpha", c.alpha},
        {"K", c.K},                        {"C", c.C},                  {"C_e", c.C_e},
        {"hidden", c.hidden},              {"L", c.L},                  {"D", c.D},
        {"N_s", c.N_s},                    {"seed", c.seed},
    };
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    EncoderConfig ec{cfg_.encoder_kind, cfg_.alpha, cfg_.C, cfg_.C_e, cfg_.hidden};
    encoder_ = make_encoder(ec, rng);
    decoder_ = Decoder::init(cfg_.C_e, cfg_.hidden, cfg_.alpha, cfg_.C, rng);
    if (cfg_.uses_pm()) pm_.emplace(PatternMemory::init(cfg_.L, cfg_.D, cfg_.C_e, rng));
    switch (cfg_.variant) {
        case Variant::backbone:
            break;
        case Variant::rm:
        case Variant::rm_pm: {
            const int n = cfg_.fusion_count();
            static_w_.emplace(Parameter("fusion.w", Tensor::full({n}, 1.0 / n)));
            break;
        }
        case Variant::meta: {
            const int n = cfg_.fusion_count();
            meta_w_.emplace(
                Parameter("fusion.meta.w", uniform_fanin(rng, {n, cfg_.C_e}, cfg_.C_e)));
            meta_b_.emplace(Parameter("fusion.meta.b", Tensor({n})));
            break;
        }
        case Variant::memda:
            adaptor_.emplace(DriftAdaptor::init(cfg_.K, cfg_.C_e, cfg_.N_s, rng));
            break;
    }
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out = encoder_->parameters();
    for (Parameter* p : decoder_.parameters()) out.push_back(p);
    if (pm_) {
        for (Parameter* p : pm_->parameters()) out.push_back(p);
    }
    if (static_w_) out.push_back(&*static_w_);
    if (meta_w_) {
        out.push_back(&*meta_w_);
        out.push_back(&*meta_b_);
    }
    if (adaptor_) {
        for (Parameter* p : adaptor_->parameters()) out.push_back(p);
    }
    return out;
}

Tape::Var Model::encode_segment(Tape& tape, const Tensor& segment) {
    ++encoder_calls_;
    return encoder_->encode(tape, segment);
}

Tensor Model::encode_segment_plain(const Tensor& segment) {
    ++encoder_calls_;
    return encoder_->encode_plain(segment);
}

Model::Forward Model::forward(Tape& tape, const DriftAwareInput& input,
                              const std::vector<Tensor>& replayed) {
    const int n_seg = cfg_.segment_count();
    if (static_cast<int>(input.segments.size()) != n_seg)
        throw ShapeError("expected " + std::to_string(n_seg) + " segments, got " +
                         std::to_string(input.segments.size()));
    if (!replayed.empty() && static_cast<int>(replayed.size()) != n_seg - 1)
        throw ShapeError("expected " + std::to_string(n_seg - 1) + " replayed embeddings, got " +
                         std::to_string(replayed.size()));

    Forward out;
    out.z_current = encode_segment(tape, input.segments[0]);
    if (cfg_.variant == Variant::backbone) {
        out.prediction = decoder_.decode(tape, out.z_current);
        return out;
    }

    std::vector<Tape::Var> z;
    z.push_back(out.z_current);
    for (int i = 1; i < n_seg; ++i) {
        if (replayed.empty())
            z.push_back(encode_segment(tape, input.segments[i]));
        else
            z.push_back(tape.leaf(replayed[i - 1]));
    }

    std::vector<Tape::Var> entries = z;
    if (pm_) {
        for (const Tape::Var& zi : z) entries.push_back(pm_query(tape, *pm_, zi));
    }

    Tape::Var w{-1};
    switch (cfg_.variant) {
        case Variant::rm:
        case Variant::rm_pm:
            w = tape.param(*static_w_);
            break;
        case Variant::meta: {
            Tape::Var pooled = tape.mean_rows(z[0]);
            for (int i = 1; i < n_seg; ++i) pooled = tape.add(pooled, tape.mean_rows(z[i]));
            pooled = tape.scale(pooled, 1.0 / n_seg);
            Tape::Var logits = tape.affine(tape.param(*meta_w_), pooled, tape.param(*meta_b_));
            w = tape.softmax(logits);
            break;
        }
        case Variant::memda:
            w = adaptation_weights(tape, *adaptor_, z);
            break;
        case Variant::backbone:
            break;
    }

    Tape::Var fused = fuse(tape, entries, w);
    out.prediction = decoder_.decode(tape, fused);
    out.weights = tape.value(w);
    return out;
}

Tensor Model::predict(const DriftAwareInput& input, const std::vector<Tensor>& replayed,
                      Tensor* weights_out) {
    Tape tape;
    Forward f = forward(tape, input, replayed);
    if (weights_out) *weights_out = f.weights;
    return reshape_prediction(tape.value(f.prediction), cfg_.alpha, cfg_.C);
}

}  // namespace memda
