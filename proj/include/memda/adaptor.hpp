#pragma once

#include <string>
#include <vector>

#include "memda/autodiff.hpp"
#include "memda/rng.hpp"

namespace memda {

/// Embedding list indexing shared by the whole adaptor: entry 0 is Z_t and,
/// for k >= 1, entry 2k-1 is Z_{t-P_k} and entry 2k is Z_{t+alpha-P_k}
/// (the order drift-aware inputs and replay gathers already use).
enum class PairKind { x, y, xy };

/// One temporal-alignment pair. For kinds x and y each side is a single
/// embedding (second index -1); for kind xy each side concatenates an input
/// embedding with its target-aligned sibling.
struct PairSpec {
    PairKind kind;
    int left_a, left_b;
    int right_a, right_b;
};

/// The 3K-2 alignment pairs: (Z_t, Z_{t-P_1}), then chains between
/// consecutive look-back days for inputs, targets and joint pairs.
std::vector<PairSpec> build_pairs(int K);

/// Bilinear-plus-linear relational scorer: sim = tanh(zi^T W_s zj + V [zi; zj] + b_s).
struct NtnParams {
    int d = 0, N_s = 0;
    Parameter w_s;  // (N_s x d x d)
    Parameter v;    // (N_s x 2d)
    Parameter b_s;  // (N_s)

    static NtnParams init(const std::string& name, int d, int N_s, Rng& rng);
    std::vector<Parameter*> parameters();
};

/// zi, zj on tape as (d) vectors; output (N_s).
Tape::Var ntn_similarity(Tape& tape, NtnParams& params, Tape::Var zi, Tape::Var zj);

/// Pair construction + per-kind NTNs + affine meta layer + softmax,
/// producing the per-sample fusion weights W_t of length 4K+2.
struct DriftAdaptor {
    int K = 0, C_e = 0, N_s = 0;
    NtnParams ntn_x, ntn_y, ntn_xy;
    Parameter meta_w;  // (4K+2 x (3K-2)*N_s)
    Parameter meta_b;  // (4K+2)

    static DriftAdaptor init(int K, int C_e, int N_s, Rng& rng);
    std::vector<Parameter*> parameters();
};

/// z_vars: the 2K+1 segment embeddings (N x C_e) in embedding-list order.
/// Each is mean-pooled over nodes before scoring. Returns W_t (4K+2),
/// nonnegative and summing to 1.
Tape::Var adaptation_weights(Tape& tape, DriftAdaptor& adaptor,
                             const std::vector<Tape::Var>& z_vars);

/// Convex-combination fusion of |w| same-shaped entries.
Tape::Var fuse(Tape& tape, const std::vector<Tape::Var>& h, Tape::Var w);

}  // namespace memda
