#include "memda/adaptor.hpp"

#include "memda/errors.hpp"
#include "memda/init.hpp"

namespace memda {

std::vector<PairSpec> build_pairs(int K) {
    if (K < 1) throw ConfigError("the drift adaptor needs at least one look-back day (K >= 1)");
    std::vector<PairSpec> pairs;
    pairs.push_back({PairKind::x, 0, -1, 1, -1});
    for (int k = 1; k < K; ++k) pairs.push_back({PairKind::x, 2 * k - 1, -1, 2 * k + 1, -1});
    for (int k = 1; k < K; ++k) pairs.push_back({PairKind::y, 2 * k, -1, 2 * k + 2, -1});
    for (int k = 1; k < K; ++k)
        pairs.push_back({PairKind::xy, 2 * k - 1, 2 * k, 2 * k + 1, 2 * k + 2});
    return pairs;
}

NtnParams NtnParams::init(const std::string& name, int d, int N_s, Rng& rng) {
    if (d <= 0 || N_s <= 0)
        throw ConfigError("NTN dims must be positive (d=" + std::to_string(d) + ", N_s=" +
                          std::to_string(N_s) + ")");
    NtnParams p;
    p.d = d;
    p.N_s = N_s;
    p.w_s = Parameter(name + ".w_s", uniform_fanin(rng, {N_s, d, d}, d));
    p.v = Parameter(name + ".v", uniform_fanin(rng, {N_s, 2 * d}, 2 * d));
    p.b_s = Parameter(name + ".b_s", Tensor({N_s}));
    return p;
}

std::vector<Parameter*> NtnParams::parameters() { return {&w_s, &v, &b_s}; }

Tape::Var ntn_similarity(Tape& tape, NtnParams& params, Tape::Var zi, Tape::Var zj) {
    const Tensor& a = tape.value(zi);
    const Tensor& b = tape.value(zj);
    if (a.rank() != 1 || a.dim(0) != params.d || b.rank() != 1 || b.dim(0) != params.d)
        throw ShapeError("ntn_similarity expects two (" + std::to_string(params.d) +
                         ") vectors, got " + a.shape_str() + " and " + b.shape_str());
    auto bil = tape.bilinear(zi, zj, tape.param(params.w_s));
    auto lin = tape.affine(tape.param(params.v), tape.concat(zi, zj), tape.param(params.b_s));
    return tape.tanh(tape.add(bil, lin));
}

DriftAdaptor DriftAdaptor::init(int K, int C_e, int N_s, Rng& rng) {
    if (K < 1) throw ConfigError("the drift adaptor needs at least one look-back day (K >= 1)");
    if (C_e <= 0 || N_s <= 0) throw ConfigError("C_e and N_s must be positive");
    DriftAdaptor ad;
    ad.K = K;
    ad.C_e = C_e;
    ad.N_s = N_s;
    ad.ntn_x = NtnParams::init("adaptor.ntn_x", C_e, N_s, rng);
    ad.ntn_y = NtnParams::init("adaptor.ntn_y", C_e, N_s, rng);
    ad.ntn_xy = NtnParams::init("adaptor.ntn_xy", 2 * C_e, N_s, rng);
    const int sim_len = (3 * K - 2) * N_s;
    const int out_len = 4 * K + 2;
    ad.meta_w = Parameter("adaptor.meta_w", uniform_fanin(rng, {out_len, sim_len}, sim_len));
    ad.meta_b = Parameter("adaptor.meta_b", Tensor({out_len}));
    return ad;
}

std::vector<Parameter*> DriftAdaptor::parameters() {
    std::vector<Parameter*> out;
    for (auto* p : ntn_x.parameters()) out.push_back(p);
    for (auto* p : ntn_y.parameters()) out.push_back(p);
    for (auto* p : ntn_xy.parameters()) out.push_back(p);
    out.push_back(&meta_w);
    out.push_back(&meta_b);
    return out;
}

Tape::Var adaptation_weights(Tape& tape, DriftAdaptor& adaptor,
                             const std::vector<Tape::Var>& z_vars) {
    if (static_cast<int>(z_vars.size()) != 2 * adaptor.K + 1)
        throw ShapeError("adaptation_weights expects " + std::to_string(2 * adaptor.K + 1) +
                         " embeddings, got " + std::to_string(z_vars.size()));

    std::vector<Tape::Var> pooled;
    pooled.reserve(z_vars.size());
    for (Tape::Var z : z_vars) pooled.push_back(tape.mean_rows(z));

    auto side = [&](int a, int b) {
        return b < 0 ? pooled[static_cast<std::size_t>(a)]
                     : tape.concat(pooled[static_cast<std::size_t>(a)], pooled[static_cast<std::size_t>(b)]);
    };

    Tape::Var sims{-1};
    for (const PairSpec& spec : build_pairs(adaptor.K)) {
        NtnParams& params = spec.kind == PairKind::x   ? adaptor.ntn_x
                            : spec.kind == PairKind::y ? adaptor.ntn_y
                                                       : adaptor.ntn_xy;
        auto sim = ntn_similarity(tape, params, side(spec.left_a, spec.left_b),
                                  side(spec.right_a, spec.right_b));
        sims = sims.valid() ? tape.concat(sims, sim) : sim;
    }
    auto logits = tape.affine(tape.param(adaptor.meta_w), sims, tape.param(adaptor.meta_b));
    return tape.softmax(logits);
}

Tape::Var fuse(Tape& tape, const std::vector<Tape::Var>& h, Tape::Var w) {
    return tape.weighted_sum(h, w);
}

}  // namespace memda
