#pragma once

#include <vector>

#include "memda/autodiff.hpp"
#include "memda/rng.hpp"
#include "memda/tensor.hpp"

namespace memda {

/// Trainable prototype matrix M (L x D) with query/value projections.
/// Each node row of a segment embedding queries M by softmax attention over
/// raw dot products; the attended prototype is projected back to C_e.
struct PatternMemory {
    int L = 0, D = 0, C_e = 0;
    Parameter M;    // (L x D)
    Parameter w_q;  // (C_e x D)
    Parameter b_q;  // (D)
    Parameter w_v;  // (D x C_e)
    Parameter b_v;  // (C_e)
    bool frozen = false;

    static PatternMemory init(int L, int D, int C_e, Rng& rng);
    std::vector<Parameter*> parameters();
};

/// On-tape query: E (N x C_e) -> V (N x C_e).
Tape::Var pm_query(Tape& tape, PatternMemory& pm, Tape::Var e_seg);

/// Plain forward without gradient tracking.
Tensor pm_query(PatternMemory& pm, const Tensor& e_seg);

/// Attention rows phi (N x L) for diagnostics; each row sums to 1.
Tensor pm_attention(PatternMemory& pm, const Tensor& e_seg);

}  // namespace memda
