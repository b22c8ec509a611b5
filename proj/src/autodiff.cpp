#include "memda/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace memda {

namespace {

void check2d(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
}

void check1d(const Tensor& t, const char* op) {
    if (t.rank() != 1) throw ShapeError(std::string(op) + ": expected rank-1 tensor, got " + t.shape_str());
}

void softmax_row(const double* x, double* y, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= sum;
}

void softmax_row_back(const double* y, const double* g, double* ga, int n) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += y[i] * g[i];
    for (int i = 0; i < n; ++i) ga[i] += y[i] * (g[i] - dot);
}

}  // namespace

Tape::Var Tape::push(Tensor value, BackFn back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::leaf(Tensor v) { return push(std::move(v), nullptr); }

Tape::Var Tape::param(Parameter& p) {
    if (p.grad.empty()) p.grad = Tensor(p.value.shape());
    Var v = push(p.value, nullptr);
    nodes_.back().bound = &p;
    return v;
}

Tape::Var Tape::matmul(Var a, Var b) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(b.idx);
    check2d(A, "matmul");
    check2d(B, "matmul");
    if (A.dim(1) != B.dim(0))
        throw ShapeError("matmul: inner dims differ " + A.shape_str() + " vs " + B.shape_str());
    const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<std::size_t>(i) * k;
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = B.data() + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi, m, k, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& A2 = t.val(ai);
        const Tensor& B2 = t.val(bi);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        // dA = g B^T, dB = A^T g
        for (int i = 0; i < m; ++i) {
            const double* grow = g.data() + static_cast<std::size_t>(i) * n;
            double* garow = ga.data() + static_cast<std::size_t>(i) * k;
            const double* arow = A2.data() + static_cast<std::size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const double* brow = B2.data() + static_cast<std::size_t>(kk) * n;
                double* gbrow = gb.data() + static_cast<std::size_t>(kk) * n;
                const double av = arow[kk];
                double acc = 0.0;
                for (int j = 0; j < n; ++j) {
                    acc += grow[j] * brow[j];
                    gbrow[j] += av * grow[j];
                }
                garow[kk] += acc;
            }
        }
    });
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(b.idx);
    check2d(A, "matmul_nt");
    check2d(B, "matmul_nt");
    if (A.dim(1) != B.dim(1))
        throw ShapeError("matmul_nt: inner dims differ " + A.shape_str() + " vs " + B.shape_str());
    const int m = A.dim(0), k = A.dim(1), n = B.dim(0);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = B.data() + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            out.at(i, j) = s;
        }
    }
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi, m, k, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& A2 = t.val(ai);
        const Tensor& B2 = t.val(bi);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        for (int i = 0; i < m; ++i) {
            const double* grow = g.data() + static_cast<std::size_t>(i) * n;
            const double* arow = A2.data() + static_cast<std::size_t>(i) * k;
            double* garow = ga.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < n; ++j) {
                const double gv = grow[j];
                if (gv == 0.0) continue;
                const double* brow = B2.data() + static_cast<std::size_t>(j) * k;
                double* gbrow = gb.data() + static_cast<std::size_t>(j) * k;
                for (int kk = 0; kk < k; ++kk) {
                    garow[kk] += gv * brow[kk];
                    gbrow[kk] += gv * arow[kk];
                }
            }
        }
    });
}

Tape::Var Tape::add(Var a, Var b) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(b.idx);
    if (!A.same_shape(B)) throw ShapeError("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        for (long long i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

Tape::Var Tape::add_rows(Var a, Var bias) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(bias.idx);
    check2d(A, "add_rows");
    check1d(B, "add_rows");
    if (A.dim(1) != B.dim(0))
        throw ShapeError("add_rows: width mismatch " + A.shape_str() + " vs " + B.shape_str());
    const int m = A.dim(0), n = A.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = A.at(i, j) + B[j];
    const int ai = a.idx, bi = bias.idx;
    return push(std::move(out), [ai, bi, m, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double gv = g.data()[static_cast<std::size_t>(i) * n + j];
                ga.data()[static_cast<std::size_t>(i) * n + j] += gv;
                gb[j] += gv;
            }
    });
}

Tape::Var Tape::sub(Var a, Var b) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(b.idx);
    if (!A.same_shape(B)) throw ShapeError("sub: shape mismatch");
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        for (long long i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

Tape::Var Tape::mul(Var a, Var b) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(b.idx);
    if (!A.same_shape(B)) throw ShapeError("mul: shape mismatch");
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& A2 = t.val(ai);
        const Tensor& B2 = t.val(bi);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        for (long long i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * B2[i];
            gb[i] += g[i] * A2[i];
        }
    });
}

Tape::Var Tape::scale(Var a, double c) {
    const Tensor& A = val(a.idx);
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = c * A[i];
    const int ai = a.idx;
    return push(std::move(out), [ai, c](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        for (long long i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Tape::Var Tape::tanh(Var a) {
    const Tensor& A = val(a.idx);
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = std::tanh(A[i]);
    const int ai = a.idx;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(ai);
        for (long long i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Tape::Var Tape::sigmoid(Var a) {
    const Tensor& A = val(a.idx);
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-A[i]));
    const int ai = a.idx;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(ai);
        for (long long i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Tape::Var Tape::relu(Var a) {
    const Tensor& A = val(a.idx);
    Tensor out(A.shape());
    for (long long i = 0; i < A.size(); ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
    const int ai = a.idx;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& A2 = t.val(ai);
        Tensor& ga = t.grad_mut(ai);
        for (long long i = 0; i < g.size(); ++i)
            if (A2[i] > 0.0) ga[i] += g[i];
    });
}

Tape::Var Tape::softmax_rows(Var a) {
    const Tensor& A = val(a.idx);
    check2d(A, "softmax_rows");
    const int m = A.dim(0), n = A.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        softmax_row(A.data() + static_cast<std::size_t>(i) * n, out.data() + static_cast<std::size_t>(i) * n, n);
    const int ai = a.idx;
    return push(std::move(out), [ai, m, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(ai);
        for (int i = 0; i < m; ++i)
            softmax_row_back(y.data() + static_cast<std::size_t>(i) * n,
                             g.data() + static_cast<std::size_t>(i) * n,
                             ga.data() + static_cast<std::size_t>(i) * n, n);
    });
}

Tape::Var Tape::softmax(Var a) {
    const Tensor& A = val(a.idx);
    check1d(A, "softmax");
    const int n = A.dim(0);
    Tensor out({n});
    softmax_row(A.data(), out.data(), n);
    const int ai = a.idx;
    return push(std::move(out), [ai, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& y = t.val(self);
        Tensor& ga = t.grad_mut(ai);
        softmax_row_back(y.data(), g.data(), ga.data(), n);
    });
}

Tape::Var Tape::mean_rows(Var a) {
    const Tensor& A = val(a.idx);
    check2d(A, "mean_rows");
    const int m = A.dim(0), n = A.dim(1);
    Tensor out({n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j] += A.at(i, j);
    for (int j = 0; j < n; ++j) out[j] /= m;
    const int ai = a.idx;
    return push(std::move(out), [ai, m, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        const double inv = 1.0 / m;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga.data()[static_cast<std::size_t>(i) * n + j] += g[j] * inv;
    });
}

Tape::Var Tape::sum(Var a) {
    const Tensor& A = val(a.idx);
    double acc = 0.0;
    for (long long i = 0; i < A.size(); ++i) acc += A[i];
    const int ai = a.idx;
    return push(Tensor::scalar(acc), [ai](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        const double gv = g[0];
        for (long long i = 0; i < ga.size(); ++i) ga[i] += gv;
    });
}

Tape::Var Tape::concat(Var a, Var b) {
    const Tensor& A = val(a.idx);
    const Tensor& B = val(b.idx);
    check1d(A, "concat");
    check1d(B, "concat");
    const int na = A.dim(0), nb = B.dim(0);
    Tensor out({na + nb});
    for (int i = 0; i < na; ++i) out[i] = A[i];
    for (int i = 0; i < nb; ++i) out[na + i] = B[i];
    const int ai = a.idx, bi = b.idx;
    return push(std::move(out), [ai, bi, na, nb](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        Tensor& gb = t.grad_mut(bi);
        for (int i = 0; i < na; ++i) ga[i] += g[i];
        for (int i = 0; i < nb; ++i) gb[i] += g[na + i];
    });
}

Tape::Var Tape::reshape(Var a, std::vector<int> shape) {
    const Tensor& A = val(a.idx);
    if (Tensor::count(shape) != A.size())
        throw ShapeError("reshape: element count mismatch for " + A.shape_str());
    Tensor out(std::move(shape), A.raw());
    const int ai = a.idx;
    return push(std::move(out), [ai](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        Tensor& ga = t.grad_mut(ai);
        for (long long i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Tape::Var Tape::conv1d_causal(Var x, Var w, Var b, int dilation) {
    const Tensor& X = val(x.idx);
    const Tensor& W = val(w.idx);
    const Tensor& B = val(b.idx);
    if (X.rank() != 3) throw ShapeError("conv1d: input must be (N,T,Ci), got " + X.shape_str());
    if (W.rank() != 3) throw ShapeError("conv1d: kernel must be (k,Ci,Co), got " + W.shape_str());
    if (X.dim(2) != W.dim(1))
        throw ShapeError("conv1d: channel mismatch " + X.shape_str() + " vs " + W.shape_str());
    if (B.rank() != 1 || B.dim(0) != W.dim(2)) throw ShapeError("conv1d: bias shape mismatch");
    const int N = X.dim(0), T = X.dim(1), Ci = X.dim(2);
    const int k = W.dim(0), Co = W.dim(2);
    Tensor out({N, T, Co});
    for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
            double* orow = out.data() + (static_cast<std::size_t>(n) * T + t) * Co;
            for (int co = 0; co < Co; ++co) orow[co] = B[co];
            for (int kk = 0; kk < k; ++kk) {
                const int src = t - kk * dilation;
                if (src < 0) continue;
                const double* xrow = X.data() + (static_cast<std::size_t>(n) * T + src) * Ci;
                const double* wsl = W.data() + static_cast<std::size_t>(kk) * Ci * Co;
                for (int ci = 0; ci < Ci; ++ci) {
                    const double xv = xrow[ci];
                    if (xv == 0.0) continue;
                    const double* wrow = wsl + static_cast<std::size_t>(ci) * Co;
                    for (int co = 0; co < Co; ++co) orow[co] += xv * wrow[co];
                }
            }
        }
    const int xi = x.idx, wi = w.idx, bi = b.idx;
    return push(std::move(out), [xi, wi, bi, N, T, Ci, k, Co, dilation](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& X2 = t.val(xi);
        const Tensor& W2 = t.val(wi);
        Tensor& gx = t.grad_mut(xi);
        Tensor& gw = t.grad_mut(wi);
        Tensor& gb = t.grad_mut(bi);
        for (int n = 0; n < N; ++n)
            for (int tt = 0; tt < T; ++tt) {
                const double* grow = g.data() + (static_cast<std::size_t>(n) * T + tt) * Co;
                for (int co = 0; co < Co; ++co) gb[co] += grow[co];
                for (int kk = 0; kk < k; ++kk) {
                    const int src = tt - kk * dilation;
                    if (src < 0) continue;
                    const double* xrow = X2.data() + (static_cast<std::size_t>(n) * T + src) * Ci;
                    double* gxrow = gx.data() + (static_cast<std::size_t>(n) * T + src) * Ci;
                    const double* wsl = W2.data() + static_cast<std::size_t>(kk) * Ci * Co;
                    double* gwsl = gw.data() + static_cast<std::size_t>(kk) * Ci * Co;
                    for (int ci = 0; ci < Ci; ++ci) {
                        const double* wrow = wsl + static_cast<std::size_t>(ci) * Co;
                        double* gwrow = gwsl + static_cast<std::size_t>(ci) * Co;
                        const double xv = xrow[ci];
                        double acc = 0.0;
                        for (int co = 0; co < Co; ++co) {
                            acc += grow[co] * wrow[co];
                            gwrow[co] += grow[co] * xv;
                        }
                        gxrow[ci] += acc;
                    }
                }
            }
    });
}

Tape::Var Tape::bilinear(Var zi, Var zj, Var w) {
    const Tensor& Zi = val(zi.idx);
    const Tensor& Zj = val(zj.idx);
    const Tensor& W = val(w.idx);
    check1d(Zi, "bilinear");
    check1d(Zj, "bilinear");
    if (W.rank() != 3) throw ShapeError("bilinear: weight must be (S,d,d), got " + W.shape_str());
    const int d = Zi.dim(0), S = W.dim(0);
    if (Zj.dim(0) != d || W.dim(1) != d || W.dim(2) != d)
        throw ShapeError("bilinear: dim mismatch " + Zi.shape_str() + ", " + Zj.shape_str() + ", " +
                         W.shape_str());
    Tensor out({S});
    for (int s = 0; s < S; ++s) {
        const double* ws = W.data() + static_cast<std::size_t>(s) * d * d;
        double acc = 0.0;
        for (int a = 0; a < d; ++a) {
            const double za = Zi[a];
            if (za == 0.0) continue;
            const double* wrow = ws + static_cast<std::size_t>(a) * d;
            double inner = 0.0;
            for (int bb = 0; bb < d; ++bb) inner += wrow[bb] * Zj[bb];
            acc += za * inner;
        }
        out[s] = acc;
    }
    const int ii = zi.idx, ji = zj.idx, wi = w.idx;
    return push(std::move(out), [ii, ji, wi](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& Zi2 = t.val(ii);
        const Tensor& Zj2 = t.val(ji);
        const Tensor& W2 = t.val(wi);
        Tensor& gi = t.grad_mut(ii);
        Tensor& gj = t.grad_mut(ji);
        Tensor& gw = t.grad_mut(wi);
        const int S = W2.dim(0), d = W2.dim(1);
        for (int s = 0; s < S; ++s) {
            const double gs = g[s];
            if (gs == 0.0) continue;
            const double* ws = W2.data() + static_cast<std::size_t>(s) * d * d;
            double* gws = gw.data() + static_cast<std::size_t>(s) * d * d;
            for (int a = 0; a < d; ++a) {
                const double* wrow = ws + static_cast<std::size_t>(a) * d;
                double* gwrow = gws + static_cast<std::size_t>(a) * d;
                const double za = Zi2[a];
                double inner = 0.0;
                for (int bb = 0; bb < d; ++bb) {
                    inner += wrow[bb] * Zj2[bb];
                    gwrow[bb] += gs * za * Zj2[bb];
                    gj[bb] += gs * za * wrow[bb];
                }
                gi[a] += gs * inner;
            }
        }
    });
}

Tape::Var Tape::affine(Var w, Var x, Var b) {
    const Tensor& W = val(w.idx);
    const Tensor& X = val(x.idx);
    const Tensor& B = val(b.idx);
    check2d(W, "affine");
    check1d(X, "affine");
    check1d(B, "affine");
    const int o = W.dim(0), i = W.dim(1);
    if (X.dim(0) != i || B.dim(0) != o)
        throw ShapeError("affine: shape mismatch " + W.shape_str() + ", " + X.shape_str() + ", " +
                         B.shape_str());
    Tensor out({o});
    for (int r = 0; r < o; ++r) {
        const double* wrow = W.data() + static_cast<std::size_t>(r) * i;
        double s = B[r];
        for (int c = 0; c < i; ++c) s += wrow[c] * X[c];
        out[r] = s;
    }
    const int wi = w.idx, xi = x.idx, bi = b.idx;
    return push(std::move(out), [wi, xi, bi, o, i](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& W2 = t.val(wi);
        const Tensor& X2 = t.val(xi);
        Tensor& gw = t.grad_mut(wi);
        Tensor& gx = t.grad_mut(xi);
        Tensor& gb = t.grad_mut(bi);
        for (int r = 0; r < o; ++r) {
            const double gv = g[r];
            if (gv == 0.0) continue;
            gb[r] += gv;
            const double* wrow = W2.data() + static_cast<std::size_t>(r) * i;
            double* gwrow = gw.data() + static_cast<std::size_t>(r) * i;
            for (int c = 0; c < i; ++c) {
                gwrow[c] += gv * X2[c];
                gx[c] += gv * wrow[c];
            }
        }
    });
}

Tape::Var Tape::weighted_sum(const std::vector<Var>& hs, Var w) {
    if (hs.empty()) throw ShapeError("weighted_sum: empty input list");
    const Tensor& W = val(w.idx);
    check1d(W, "weighted_sum");
    if (W.dim(0) != static_cast<int>(hs.size()))
        throw ShapeError("weighted_sum: weight length " + std::to_string(W.dim(0)) +
                         " != entry count " + std::to_string(hs.size()));
    const Tensor& H0 = val(hs[0].idx);
    Tensor out(H0.shape());
    std::vector<int> idxs;
    idxs.reserve(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const Tensor& Hi = val(hs[i].idx);
        if (!Hi.same_shape(H0)) throw ShapeError("weighted_sum: entry shape mismatch");
        const double wv = W[static_cast<long long>(i)];
        for (long long j = 0; j < Hi.size(); ++j) out[j] += wv * Hi[j];
        idxs.push_back(hs[i].idx);
    }
    const int wi = w.idx;
    return push(std::move(out), [idxs, wi](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& W2 = t.val(wi);
        Tensor& gw = t.grad_mut(wi);
        for (std::size_t i = 0; i < idxs.size(); ++i) {
            const Tensor& Hi = t.val(idxs[i]);
            Tensor& gh = t.grad_mut(idxs[i]);
            const double wv = W2[static_cast<long long>(i)];
            double dot = 0.0;
            for (long long j = 0; j < g.size(); ++j) {
                gh[j] += wv * g[j];
                dot += g[j] * Hi[j];
            }
            gw[static_cast<long long>(i)] += dot;
        }
    });
}

Tape::Var Tape::mae(Var pred, Var target) {
    const Tensor& P = val(pred.idx);
    const Tensor& T = val(target.idx);
    if (!P.same_shape(T)) throw ShapeError("mae: shape mismatch " + P.shape_str() + " vs " + T.shape_str());
    double acc = 0.0;
    for (long long i = 0; i < P.size(); ++i) acc += std::abs(P[i] - T[i]);
    const double n = static_cast<double>(P.size());
    Tensor out = Tensor::scalar(acc / n);
    const int pi = pred.idx, ti = target.idx;
    return push(std::move(out), [pi, ti, n](Tape& t, int self) {
        const Tensor& g = t.grad_mut(self);
        const Tensor& P2 = t.val(pi);
        const Tensor& T2 = t.val(ti);
        Tensor& gp = t.grad_mut(pi);
        Tensor& gt = t.grad_mut(ti);
        const double s = g[0] / n;
        for (long long i = 0; i < P2.size(); ++i) {
            const double d = P2[i] - T2[i];
            const double sg = d > 0.0 ? s : (d < 0.0 ? -s : 0.0);
            gp[i] += sg;
            gt[i] -= sg;
        }
    });
}

void Tape::backward(Var root) {
    if (!root.valid()) throw Error("backward: invalid root");
    if (val(root.idx).size() != 1) throw ShapeError("backward: root must be scalar");
    for (auto& n : nodes_)
        if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    grad_mut(root.idx)[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.back) n.back(*this, i);
        if (n.bound) {
            Tensor& pg = n.bound->grad;
            for (long long j = 0; j < n.grad.size(); ++j) pg[j] += n.grad[j];
        }
    }
}

void Tape::reset() { nodes_.clear(); }

}  // namespace memda
