#include "memda/pattern_memory.hpp"

#include "memda/errors.hpp"
#include "memda/init.hpp"

namespace memda {

PatternMemory PatternMemory::init(int L, int D, int C_e, Rng& rng) {
    if (L <= 0 || D <= 0 || C_e <= 0)
        throw ConfigError("pattern memory dims must be positive (L=" + std::to_string(L) + ", D=" +
                          std::to_string(D) + ", C_e=" + std::to_string(C_e) + ")");
    PatternMemory pm;
    pm.L = L;
    pm.D = D;
    pm.C_e = C_e;
    pm.M = Parameter("pm.M", uniform_fanin(rng, {L, D}, D));
    pm.w_q = Parameter("pm.w_q", uniform_fanin(rng, {C_e, D}, C_e));
    pm.b_q = Parameter("pm.b_q", Tensor({D}));
    pm.w_v = Parameter("pm.w_v", uniform_fanin(rng, {D, C_e}, D));
    pm.b_v = Parameter("pm.b_v", Tensor({C_e}));
    return pm;
}

std::vector<Parameter*> PatternMemory::parameters() {
    return {&M, &w_q, &b_q, &w_v, &b_v};
}

Tape::Var pm_query(Tape& tape, PatternMemory& pm, Tape::Var e_seg) {
    const Tensor& e = tape.value(e_seg);
    if (e.rank() != 2 || e.dim(1) != pm.C_e)
        throw ShapeError("pm_query expects (N x " + std::to_string(pm.C_e) + "), got " + e.shape_str());
    auto q = tape.add_rows(tape.matmul(e_seg, tape.param(pm.w_q)), tape.param(pm.b_q));
    auto scores = tape.matmul_nt(q, tape.param(pm.M));
    auto phi = tape.softmax_rows(scores);
    auto attended = tape.matmul(phi, tape.param(pm.M));
    return tape.add_rows(tape.matmul(attended, tape.param(pm.w_v)), tape.param(pm.b_v));
}

Tensor pm_query(PatternMemory& pm, const Tensor& e_seg) {
    Tape tape;
    return tape.value(pm_query(tape, pm, tape.leaf(e_seg)));
}

Tensor pm_attention(PatternMemory& pm, const Tensor& e_seg) {
    Tape tape;
    auto e = tape.leaf(e_seg);
    auto q = tape.add_rows(tape.matmul(e, tape.param(pm.w_q)), tape.param(pm.b_q));
    return tape.value(tape.softmax_rows(tape.matmul_nt(q, tape.param(pm.M))));
}

}  // namespace memda
