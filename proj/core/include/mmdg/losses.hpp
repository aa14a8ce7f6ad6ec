#pragma once

#include <vector>

#include "mmdg/model.hpp"
#include "mmdg/ops.hpp"

namespace mmdg {

/// Scalar loss components of one training step. Alignment components are the
/// sum of both InfoNCE directions; pairs whose stream is disabled contribute
/// exactly zero.
struct LossBreakdown {
    double l_c = 0.0;
    double l_ap_t = 0.0;
    double l_m_t = 0.0;
    double l_a_that = 0.0;  // audio pair (target picked by align_audio_to)
    double l_align = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

template <typename S>
struct LossVarsT {
    VarT<S> l_c, l_ap_t, l_m_t, l_a_that, l_align, total;
};

/// One direction of InfoNCE over row features: anchor i scores against every
/// target j with cosine similarity over temperature; positives sit on the
/// diagonal. Log-sum-exp stabilized, differentiable through tau.
template <typename S>
VarT<S> infonce_directional(VarT<S> anchors, VarT<S> targets, VarT<S> tau) {
    const auto& xv = anchors.value();
    const auto& yv = targets.value();
    if (xv.rank() != 2 || yv.rank() != 2 || !xv.same_shape(yv))
        throw ShapeError("infonce: " + xv.shape_str() + " vs " + yv.shape_str());
    if (tau.value().size() != 1) throw ShapeError("infonce: tau must be scalar");
    if (!(tau.value()[0] > S(0))) throw NumericError("infonce: tau must be positive");
    const int b = xv.rows();
    VarT<S> sim = matmul_nt(l2_normalize_rows(anchors), l2_normalize_rows(targets));
    VarT<S> logits = mul_scalar(sim, recip(tau));
    std::vector<int> diag(b);
    for (int i = 0; i < b; ++i) diag[i] = i;
    return softmax_cross_entropy(logits, diag);
}

/// Both directions summed: L_{x,y} = L_{x->y} + L_{y->x}.
template <typename S>
VarT<S> alignment_pair_loss(VarT<S> x, VarT<S> y, VarT<S> tau) {
    return add(infonce_directional(x, y, tau), infonce_directional(y, x, tau));
}

/// Classification loss plus lambda-weighted alignment total over the active
/// (feature, narration) pairs. Requires a train-mode forward pass when
/// alignment is enabled.
template <typename S>
LossVarsT<S> total_loss(TapeT<S>& tape, const ForwardPass<S>& fp, const ModelConfig& cfg,
                        const std::vector<int>& labels, S lambda) {
    LossVarsT<S> lv;
    lv.l_c = softmax_cross_entropy(fp.out.logits, labels);

    if (!cfg.flags.use_alignment) {
        lv.total = lv.l_c;
        return lv;
    }
    if (fp.out.t.tape == nullptr)
        throw ConfigError("total_loss: alignment enabled but forward pass has no narration features");

    VarT<S> tau = exp_op(fp.vars.log_tau);
    VarT<S> align{};
    auto accumulate = [&](VarT<S> pair) { align = align.tape == nullptr ? pair : add(align, pair); };

    if (fp.out.ap.tape != nullptr) {
        lv.l_ap_t = alignment_pair_loss(fp.out.ap, fp.out.t, tau);
        accumulate(lv.l_ap_t);
    }
    if (fp.out.m.tape != nullptr) {
        lv.l_m_t = alignment_pair_loss(fp.out.m, fp.out.t, tau);
        accumulate(lv.l_m_t);
    }
    if (fp.out.a.tape != nullptr) {
        VarT<S> target = cfg.flags.align_audio_to == AlignTarget::audio_narration ? fp.out.t_hat : fp.out.t;
        if (target.tape == nullptr) throw ConfigError("total_loss: audio alignment target missing");
        lv.l_a_that = alignment_pair_loss(fp.out.a, target, tau);
        accumulate(lv.l_a_that);
    }
    if (align.tape == nullptr) {
        lv.total = lv.l_c;
        return lv;
    }
    lv.l_align = align;
    lv.total = add(lv.l_c, scale_const(align, lambda));
    return lv;
}

template <typename S>
LossBreakdown breakdown(const LossVarsT<S>& lv, double lambda) {
    LossBreakdown b;
    b.lambda = lambda;
    b.l_c = static_cast<double>(lv.l_c.value().item());
    if (lv.l_ap_t.tape != nullptr) b.l_ap_t = static_cast<double>(lv.l_ap_t.value().item());
    if (lv.l_m_t.tape != nullptr) b.l_m_t = static_cast<double>(lv.l_m_t.value().item());
    if (lv.l_a_that.tape != nullptr) b.l_a_that = static_cast<double>(lv.l_a_that.value().item());
    if (lv.l_align.tape != nullptr) b.l_align = static_cast<double>(lv.l_align.value().item());
    b.total = static_cast<double>(lv.total.value().item());
    return b;
}

}  // namespace mmdg
