#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mmdg/tape.hpp"

namespace mmdg {

enum class Mode { train, eval };

/// BatchNorm running statistics; mutated only by train-mode forward passes.
template <typename S>
struct BatchNormRunningT {
    TensorT<S> mean;
    TensorT<S> var;

    BatchNormRunningT() = default;
    explicit BatchNormRunningT(int dim) : mean({dim}), var({dim}) { var.fill(S(1)); }
};

using BatchNormRunning = BatchNormRunningT<float>;

namespace detail {

template <typename S>
inline void require_same_tape(const VarT<S>& a, const VarT<S>& b, const char* op) {
    if (a.tape != b.tape) throw ShapeError(std::string(op) + ": operands on different tapes");
}

template <typename S>
inline S norm_floor() {
    return std::numeric_limits<S>::min();  // smallest normal; anything below counts as zero
}

}  // namespace detail

// Every op follows the same shape: compute the forward value, then record it
// together with a closure that scatters the output gradient into the input
// gradients. The output node id is known before record() because ids are
// assigned sequentially.

// ---------------------------------------------------------------------------
// elementwise / structural
// ---------------------------------------------------------------------------

template <typename S>
VarT<S> add(VarT<S> a, VarT<S> b) {
    detail::require_same_tape(a, b, "add");
    const auto& av = a.value();
    const auto& bv = b.value();
    if (!av.same_shape(bv)) throw ShapeError("add: " + av.shape_str() + " vs " + bv.shape_str());
    TensorT<S> out(av.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    TapeT<S>* tp = a.tape;
    const int ia = a.id, ib = b.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ia, ib, io](TapeT<S>& t) {
        const auto& go = t.grad(io);
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    });
}

/// out = x * c for a plain constant c.
template <typename S>
VarT<S> scale_const(VarT<S> x, S c) {
    const auto& xv = x.value();
    TensorT<S> out(xv.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * c;
    TapeT<S>* tp = x.tape;
    const int ix = x.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ix, io, c](TapeT<S>& t) {
        const auto& go = t.grad(io);
        auto& gx = t.grad_mut(ix);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * c;
    });
}

template <typename S>
VarT<S> relu(VarT<S> x) {
    const auto& xv = x.value();
    TensorT<S> out(xv.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > S(0) ? xv[i] : S(0);
    TapeT<S>* tp = x.tape;
    const int ix = x.id, io = static_cast<int>(tp->size());
    // subgradient at exactly 0 is 0
    return tp->record(std::move(out), [ix, io](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& xv = t.value(ix);
        auto& gx = t.grad_mut(ix);
        for (size_t i = 0; i < go.size(); ++i)
            if (xv[i] > S(0)) gx[i] += go[i];
    });
}

template <typename S>
VarT<S> exp_op(VarT<S> x) {
    const auto& xv = x.value();
    TensorT<S> out(xv.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
    TapeT<S>* tp = x.tape;
    const int ix = x.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ix, io](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& yv = t.value(io);
        auto& gx = t.grad_mut(ix);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * yv[i];
    });
}

template <typename S>
VarT<S> recip(VarT<S> x) {
    const auto& xv = x.value();
    TensorT<S> out(xv.shape());
    for (size_t i = 0; i < out.size(); ++i) {
        if (std::abs(xv[i]) < detail::norm_floor<S>()) throw NumericError("recip: division by zero");
        out[i] = S(1) / xv[i];
    }
    TapeT<S>* tp = x.tape;
    const int ix = x.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ix, io](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& yv = t.value(io);
        auto& gx = t.grad_mut(ix);
        for (size_t i = 0; i < go.size(); ++i) gx[i] -= go[i] * yv[i] * yv[i];
    });
}

/// Broadcast-multiply a tensor by a scalar node (both differentiable).
template <typename S>
VarT<S> mul_scalar(VarT<S> m, VarT<S> s) {
    detail::require_same_tape(m, s, "mul_scalar");
    if (s.value().size() != 1) throw ShapeError("mul_scalar: scale must be scalar, has " + s.value().shape_str());
    const auto& mv = m.value();
    const S sv = s.value()[0];
    TensorT<S> out(mv.shape());
    for (size_t i = 0; i < out.size(); ++i) out[i] = mv[i] * sv;
    TapeT<S>* tp = m.tape;
    const int im = m.id, is = s.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [im, is, io](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& mv = t.value(im);
        const S sv = t.value(is)[0];
        auto& gm = t.grad_mut(im);
        auto& gs = t.grad_mut(is);
        S acc = S(0);
        for (size_t i = 0; i < go.size(); ++i) {
            gm[i] += go[i] * sv;
            acc += go[i] * mv[i];
        }
        gs[0] += acc;
    });
}

// ---------------------------------------------------------------------------
// matrix ops
// ---------------------------------------------------------------------------

/// C = A (n×k) · B (k×m). Backward: dA = dC·Bᵀ, dB = Aᵀ·dC.
template <typename S>
VarT<S> matmul(VarT<S> a, VarT<S> b) {
    detail::require_same_tape(a, b, "matmul");
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
        throw ShapeError("matmul: " + av.shape_str() + " x " + bv.shape_str());
    const int n = av.rows(), k = av.cols(), m = bv.cols();
    TensorT<S> out({n, m});
    for (int i = 0; i < n; ++i) {
        S* orow = out.data() + static_cast<size_t>(i) * m;
        const S* arow = av.data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const S aip = arow[p];
            if (aip == S(0)) continue;
            const S* brow = bv.data() + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    TapeT<S>* tp = a.tape;
    const int ia = a.id, ib = b.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ia, ib, io, n, k, m](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& av = t.value(ia);
        const auto& bv = t.value(ib);
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (int i = 0; i < n; ++i) {
            const S* grow = go.data() + static_cast<size_t>(i) * m;
            S* garow = ga.data() + static_cast<size_t>(i) * k;
            const S* arow = av.data() + static_cast<size_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                const S* brow = bv.data() + static_cast<size_t>(p) * m;
                S acc = S(0);
                for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
                garow[p] += acc;
                // dB row p accumulates A[i,p] * dC row i
                const S aip = arow[p];
                if (aip != S(0)) {
                    S* gbrow = gb.data() + static_cast<size_t>(p) * m;
                    for (int j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
                }
            }
        }
    });
}

/// C = A (n×k) · Bᵀ where B is (m×k); C is (n×m). Row-vs-row dot products.
template <typename S>
VarT<S> matmul_nt(VarT<S> a, VarT<S> b) {
    detail::require_same_tape(a, b, "matmul_nt");
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols())
        throw ShapeError("matmul_nt: " + av.shape_str() + " x " + bv.shape_str() + "^T");
    const int n = av.rows(), k = av.cols(), m = bv.rows();
    TensorT<S> out({n, m});
    for (int i = 0; i < n; ++i) {
        const S* arow = av.data() + static_cast<size_t>(i) * k;
        S* orow = out.data() + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const S* brow = bv.data() + static_cast<size_t>(j) * k;
            S acc = S(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    TapeT<S>* tp = a.tape;
    const int ia = a.id, ib = b.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ia, ib, io, n, k, m](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& av = t.value(ia);
        const auto& bv = t.value(ib);
        auto& ga = t.grad_mut(ia);
        auto& gb = t.grad_mut(ib);
        for (int i = 0; i < n; ++i) {
            const S* grow = go.data() + static_cast<size_t>(i) * m;
            S* garow = ga.data() + static_cast<size_t>(i) * k;
            const S* arow = av.data() + static_cast<size_t>(i) * k;
            for (int j = 0; j < m; ++j) {
                const S g = grow[j];
                if (g == S(0)) continue;
                const S* brow = bv.data() + static_cast<size_t>(j) * k;
                S* gbrow = gb.data() + static_cast<size_t>(j) * k;
                for (int p = 0; p < k; ++p) {
                    garow[p] += g * brow[p];
                    gbrow[p] += g * arow[p];
                }
            }
        }
    });
}

/// M (n×d) + row vector b (d), broadcast over rows.
template <typename S>
VarT<S> add_rowvec(VarT<S> m, VarT<S> b) {
    detail::require_same_tape(m, b, "add_rowvec");
    const auto& mv = m.value();
    const auto& bv = b.value();
    if (mv.rank() != 2 || bv.rank() != 1 || mv.cols() != bv.rows())
        throw ShapeError("add_rowvec: " + mv.shape_str() + " + " + bv.shape_str());
    const int n = mv.rows(), d = mv.cols();
    TensorT<S> out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = mv.at(i, j) + bv[j];
    TapeT<S>* tp = m.tape;
    const int im = m.id, ib = b.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [im, ib, io, n, d](TapeT<S>& t) {
        const auto& go = t.grad(io);
        auto& gm = t.grad_mut(im);
        auto& gb = t.grad_mut(ib);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                const S g = go.at(i, j);
                gm.values()[static_cast<size_t>(i) * d + j] += g;
                gb[j] += g;
            }
    });
}

/// Column-wise concatenation of (n×d_k) blocks into (n×Σd_k).
template <typename S>
VarT<S> concat_cols(const std::vector<VarT<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    TapeT<S>* tp = parts[0].tape;
    const int n = parts[0].value().rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.tape != tp) throw ShapeError("concat_cols: operands on different tapes");
        if (p.value().rank() != 2 || p.value().rows() != n)
            throw ShapeError("concat_cols: row mismatch " + p.value().shape_str());
        total += p.value().cols();
    }
    TensorT<S> out({n, total});
    std::vector<int> ids, widths, offsets;
    int off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.value();
        const int d = pv.cols();
        for (int i = 0; i < n; ++i)
            std::copy(pv.data() + static_cast<size_t>(i) * d, pv.data() + static_cast<size_t>(i + 1) * d,
                      out.data() + static_cast<size_t>(i) * total + off);
        ids.push_back(p.id);
        widths.push_back(d);
        offsets.push_back(off);
        off += d;
    }
    const int io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ids, widths, offsets, io, n, total](TapeT<S>& t) {
        const auto& go = t.grad(io);
        for (size_t b = 0; b < ids.size(); ++b) {
            auto& g = t.grad_mut(ids[b]);
            const int d = widths[b], off = offsets[b];
            for (int i = 0; i < n; ++i) {
                const S* src = go.data() + static_cast<size_t>(i) * total + off;
                S* dst = g.data() + static_cast<size_t>(i) * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        }
    });
}

/// Row i of M scaled by constant r[i]. r is data (not differentiated).
template <typename S>
VarT<S> scale_rows(VarT<S> m, const TensorT<S>& r) {
    const auto& mv = m.value();
    if (mv.rank() != 2 || r.rank() != 1 || r.rows() != mv.rows())
        throw ShapeError("scale_rows: " + mv.shape_str() + " by " + r.shape_str());
    const int n = mv.rows(), d = mv.cols();
    TensorT<S> out({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = mv.at(i, j) * r[i];
    TapeT<S>* tp = m.tape;
    const int im = m.id, io = static_cast<int>(tp->size());
    std::vector<S> rv = r.values();
    return tp->record(std::move(out), [im, io, n, d, rv](TapeT<S>& t) {
        const auto& go = t.grad(io);
        auto& gm = t.grad_mut(im);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) gm.values()[static_cast<size_t>(i) * d + j] += go.at(i, j) * rv[i];
    });
}

// ---------------------------------------------------------------------------
// normalization / similarity
// ---------------------------------------------------------------------------

/// Rows mapped to unit L2 norm. Zero-norm rows raise rather than clamp.
template <typename S>
VarT<S> l2_normalize_rows(VarT<S> x) {
    const auto& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("l2_normalize_rows: need matrix, got " + xv.shape_str());
    const int n = xv.rows(), d = xv.cols();
    TensorT<S> out({n, d});
    std::vector<S> inv_norm(n);
    for (int i = 0; i < n; ++i) {
        S nsq = S(0);
        for (int j = 0; j < d; ++j) nsq += xv.at(i, j) * xv.at(i, j);
        const S nrm = std::sqrt(nsq);
        if (nrm < detail::norm_floor<S>()) throw NumericError("l2_normalize_rows: zero-norm row " + std::to_string(i));
        inv_norm[i] = S(1) / nrm;
        for (int j = 0; j < d; ++j) out.at(i, j) = xv.at(i, j) * inv_norm[i];
    }
    TapeT<S>* tp = x.tape;
    const int ix = x.id, io = static_cast<int>(tp->size());
    return tp->record(std::move(out), [ix, io, n, d, inv_norm](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& u = t.value(io);  // normalized rows
        auto& gx = t.grad_mut(ix);
        for (int i = 0; i < n; ++i) {
            S dot = S(0);
            for (int j = 0; j < d; ++j) dot += go.at(i, j) * u.at(i, j);
            for (int j = 0; j < d; ++j)
                gx.values()[static_cast<size_t>(i) * d + j] += (go.at(i, j) - dot * u.at(i, j)) * inv_norm[i];
        }
    });
}

/// Cosine similarity of two 1-D vectors; scalar output in [-1, 1].
template <typename S>
VarT<S> cosine_similarity(VarT<S> u, VarT<S> v) {
    detail::require_same_tape(u, v, "cosine_similarity");
    const auto& uv = u.value();
    const auto& vv = v.value();
    if (uv.rank() != 1 || vv.rank() != 1 || uv.rows() != vv.rows())
        throw ShapeError("cosine_similarity: " + uv.shape_str() + " vs " + vv.shape_str());
    const int d = uv.rows();
    S dot = S(0), nu = S(0), nv = S(0);
    for (int j = 0; j < d; ++j) {
        dot += uv[j] * vv[j];
        nu += uv[j] * uv[j];
        nv += vv[j] * vv[j];
    }
    const S un = std::sqrt(nu), vn = std::sqrt(nv);
    if (un < detail::norm_floor<S>() || vn < detail::norm_floor<S>())
        throw NumericError("cosine_similarity: zero-norm input");
    const S c = dot / (un * vn);
    TapeT<S>* tp = u.tape;
    const int iu = u.id, iv = v.id, io = static_cast<int>(tp->size());
    return tp->record(TensorT<S>::scalar(c), [iu, iv, io, d, un, vn, c](TapeT<S>& t) {
        const S g = t.grad(io)[0];
        const auto& uv = t.value(iu);
        const auto& vv = t.value(iv);
        auto& gu = t.grad_mut(iu);
        auto& gv = t.grad_mut(iv);
        for (int j = 0; j < d; ++j) {
            gu[j] += g * (vv[j] / (un * vn) - c * uv[j] / (un * un));
            gv[j] += g * (uv[j] / (un * vn) - c * vv[j] / (vn * vn));
        }
    });
}

// ---------------------------------------------------------------------------
// losses-level primitives
// ---------------------------------------------------------------------------

/// Mean over the batch of -log softmax(logits)[label], max-shifted for
/// stability. Backward: (softmax - onehot) / batch.
template <typename S>
VarT<S> softmax_cross_entropy(VarT<S> logits, const std::vector<int>& labels) {
    const auto& lv = logits.value();
    if (lv.rank() != 2) throw ShapeError("softmax_cross_entropy: need (batch x classes), got " + lv.shape_str());
    const int n = lv.rows(), c = lv.cols();
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(n));
    for (int i = 0; i < n; ++i)
        if (labels[i] < 0 || labels[i] >= c)
            throw IndexError("softmax_cross_entropy: label " + std::to_string(labels[i]) + " out of [0, " +
                             std::to_string(c) + ") at row " + std::to_string(i));
    std::vector<S> probs(static_cast<size_t>(n) * c);
    S loss = S(0);
    for (int i = 0; i < n; ++i) {
        const S* row = lv.data() + static_cast<size_t>(i) * c;
        S mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        S sum = S(0);
        for (int j = 0; j < c; ++j) {
            const S e = std::exp(row[j] - mx);
            probs[static_cast<size_t>(i) * c + j] = e;
            sum += e;
        }
        const S lse = mx + std::log(sum);
        for (int j = 0; j < c; ++j) probs[static_cast<size_t>(i) * c + j] /= sum;
        loss += lse - row[labels[i]];
    }
    loss /= static_cast<S>(n);
    TapeT<S>* tp = logits.tape;
    const int il = logits.id, io = static_cast<int>(tp->size());
    return tp->record(TensorT<S>::scalar(loss), [il, io, n, c, labels, probs](TapeT<S>& t) {
        const S g = t.grad(io)[0];
        auto& gl = t.grad_mut(il);
        const S inv_n = S(1) / static_cast<S>(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                S p = probs[static_cast<size_t>(i) * c + j];
                if (j == labels[i]) p -= S(1);
                gl.values()[static_cast<size_t>(i) * c + j] += g * p * inv_n;
            }
    });
}

/// BatchNorm over the batch dimension of x (batch×dim).
/// Train mode normalizes by batch statistics (biased variance, eps inside the
/// sqrt) and updates `running` with the given momentum; eval mode normalizes
/// by the running statistics and leaves them untouched. The train backward
/// carries the full mean/variance coupling terms.
template <typename S>
VarT<S> batchnorm(VarT<S> x, VarT<S> gamma, VarT<S> beta, BatchNormRunningT<S>* running, Mode mode,
                  S momentum = S(0.1), S eps = S(1e-5)) {
    detail::require_same_tape(x, gamma, "batchnorm");
    detail::require_same_tape(x, beta, "batchnorm");
    const auto& xv = x.value();
    if (xv.rank() != 2) throw ShapeError("batchnorm: need (batch x dim), got " + xv.shape_str());
    const int n = xv.rows(), d = xv.cols();
    if (gamma.value().rank() != 1 || gamma.value().rows() != d || beta.value().rank() != 1 ||
        beta.value().rows() != d)
        throw ShapeError("batchnorm: affine params must be (" + std::to_string(d) + ")");
    if (running == nullptr) throw ConfigError("batchnorm: running stats not initialized");
    TapeT<S>* tp = x.tape;
    const int ix = x.id, ig = gamma.id, ibt = beta.id, io = static_cast<int>(tp->size());

    if (mode == Mode::train) {
        if (n < 2) throw ConfigError("batchnorm: train mode needs batch >= 2, got " + std::to_string(n));
        std::vector<S> mean(d, S(0)), var(d, S(0)), inv_std(d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) mean[j] += xv.at(i, j);
        for (int j = 0; j < d; ++j) mean[j] /= static_cast<S>(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                const S dv = xv.at(i, j) - mean[j];
                var[j] += dv * dv;
            }
        for (int j = 0; j < d; ++j) {
            var[j] /= static_cast<S>(n);
            inv_std[j] = S(1) / std::sqrt(var[j] + eps);
        }
        std::vector<S> xhat(static_cast<size_t>(n) * d);
        TensorT<S> out({n, d});
        const auto& gv = gamma.value();
        const auto& bv = beta.value();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                const S h = (xv.at(i, j) - mean[j]) * inv_std[j];
                xhat[static_cast<size_t>(i) * d + j] = h;
                out.at(i, j) = gv[j] * h + bv[j];
            }
        for (int j = 0; j < d; ++j) {
            running->mean[j] = (S(1) - momentum) * running->mean[j] + momentum * mean[j];
            running->var[j] = (S(1) - momentum) * running->var[j] + momentum * var[j];
        }
        return tp->record(std::move(out), [ix, ig, ibt, io, n, d, xhat, inv_std](TapeT<S>& t) {
            const auto& go = t.grad(io);
            const auto& gv = t.value(ig);
            auto& gx = t.grad_mut(ix);
            auto& gg = t.grad_mut(ig);
            auto& gb = t.grad_mut(ibt);
            for (int j = 0; j < d; ++j) {
                S sum_dy = S(0), sum_dy_xhat = S(0);
                for (int i = 0; i < n; ++i) {
                    const S dy = go.at(i, j);
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat[static_cast<size_t>(i) * d + j];
                }
                gb[j] += sum_dy;
                gg[j] += sum_dy_xhat;
                const S k = gv[j] * inv_std[j] / static_cast<S>(n);
                for (int i = 0; i < n; ++i) {
                    const S dy = go.at(i, j);
                    const S h = xhat[static_cast<size_t>(i) * d + j];
                    gx.values()[static_cast<size_t>(i) * d + j] +=
                        k * (static_cast<S>(n) * dy - sum_dy - h * sum_dy_xhat);
                }
            }
        });
    }

    // eval: affine transform by frozen statistics
    std::vector<S> inv_std(d);
    for (int j = 0; j < d; ++j) inv_std[j] = S(1) / std::sqrt(running->var[j] + eps);
    std::vector<S> rm = running->mean.values();
    TensorT<S> out({n, d});
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = gv[j] * (xv.at(i, j) - rm[j]) * inv_std[j] + bv[j];
    return tp->record(std::move(out), [ix, ig, ibt, io, n, d, rm, inv_std](TapeT<S>& t) {
        const auto& go = t.grad(io);
        const auto& xv = t.value(ix);
        const auto& gv = t.value(ig);
        auto& gx = t.grad_mut(ix);
        auto& gg = t.grad_mut(ig);
        auto& gb = t.grad_mut(ibt);
        for (int j = 0; j < d; ++j) {
            const S k = gv[j] * inv_std[j];
            S sum_dy = S(0), sum_dy_xhat = S(0);
            for (int i = 0; i < n; ++i) {
                const S dy = go.at(i, j);
                sum_dy += dy;
                sum_dy_xhat += dy * (xv.at(i, j) - rm[j]) * inv_std[j];
                gx.values()[static_cast<size_t>(i) * d + j] += dy * k;
            }
            gb[j] += sum_dy;
            gg[j] += sum_dy_xhat;
        }
    });
}

}  // namespace mmdg
