#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mmdg/adam.hpp"
#include "mmdg/dataset.hpp"
#include "mmdg/ops.hpp"
#include "mmdg/rng.hpp"

namespace mmdg {

enum class AlignTarget { visual, audio_narration };

/// Which modality streams exist and which training-time mechanisms are on.
/// These realize the paper's modality-combination and ablation rows.
struct ModeFlags {
    bool use_appearance = true;
    bool use_motion = true;
    bool use_audio = true;
    bool fuse_early_ap_mo = false;  // one encoder over concat(ap, m) instead of two
    bool use_alignment = false;
    AlignTarget align_audio_to = AlignTarget::audio_narration;
    bool use_consistency_weighting = false;
};

struct ModelConfig {
    ModalityDims dims;
    int embed_dim = 256;  // hidden width == encoder output width, one knob
    int num_classes = 0;
    ModeFlags flags;
    bool bn_before_relu = false;  // conventional-order switch; default keeps Linear->ReLU->BN

    int stream_count() const {
        int n = 0;
        if (flags.fuse_early_ap_mo)
            n += 1;
        else
            n += (flags.use_appearance ? 1 : 0) + (flags.use_motion ? 1 : 0);
        n += flags.use_audio ? 1 : 0;
        return n;
    }

    void validate() const {
        if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
        if (embed_dim < 1) throw ConfigError("model: embed_dim must be >= 1");
        if (flags.fuse_early_ap_mo && (!flags.use_appearance || !flags.use_motion))
            throw ConfigError("model: early ap-mo fusion needs both appearance and motion enabled");
        if (stream_count() == 0) throw ConfigError("model: no modality streams enabled");
    }
};

/// Two fully connected layers, each followed by ReLU activation and
/// BatchNorm.
template <typename S>
struct EncoderParamsT {
    TensorT<S> w1, b1, gamma1, beta1;
    BatchNormRunningT<S> bn1;
    TensorT<S> w2, b2, gamma2, beta2;
    BatchNormRunningT<S> bn2;
};

template <typename S>
struct ModelParamsT {
    ModelConfig cfg;
    std::optional<EncoderParamsT<S>> enc_apmo, enc_ap, enc_m, enc_au, enc_text;
    TensorT<S> cls_w, cls_b;
    TensorT<S> log_tau;  // learnable temperature in log space

    S tau() const { return std::exp(log_tau.item()); }
};

using ModelParams = ModelParamsT<float>;

namespace detail {

template <typename S>
EncoderParamsT<S> init_encoder(int d_in, int hidden, uint64_t seed) {
    Rng rng(seed);
    EncoderParamsT<S> e;
    auto he_uniform = [&](int rows, int cols, int fan_in) {
        TensorT<S> w({rows, cols});
        const double bound = std::sqrt(6.0 / fan_in);
        for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<S>(rng.uniform(-bound, bound));
        return w;
    };
    e.w1 = he_uniform(d_in, hidden, d_in);
    e.b1 = TensorT<S>({hidden});
    e.gamma1 = TensorT<S>({hidden});
    e.gamma1.fill(S(1));
    e.beta1 = TensorT<S>({hidden});
    e.bn1 = BatchNormRunningT<S>(hidden);
    e.w2 = he_uniform(hidden, hidden, hidden);
    e.b2 = TensorT<S>({hidden});
    e.gamma2 = TensorT<S>({hidden});
    e.gamma2.fill(S(1));
    e.beta2 = TensorT<S>({hidden});
    e.bn2 = BatchNormRunningT<S>(hidden);
    return e;
}

}  // namespace detail

/// He-uniform weights, zero biases, BN gamma=1 beta=0, tau init 0.07.
/// Every component draws from its own derived stream, so the same seed gives
/// bit-identical parameters regardless of which streams are enabled.
template <typename S>
ModelParamsT<S> init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelParamsT<S> p;
    p.cfg = cfg;
    const int h = cfg.embed_dim;
    if (cfg.flags.fuse_early_ap_mo)
        p.enc_apmo = detail::init_encoder<S>(cfg.dims.appearance + cfg.dims.motion, h,
                                             Rng::derive(seed, fnv1a64_str("enc_apmo")));
    else {
        if (cfg.flags.use_appearance)
            p.enc_ap = detail::init_encoder<S>(cfg.dims.appearance, h, Rng::derive(seed, fnv1a64_str("enc_ap")));
        if (cfg.flags.use_motion)
            p.enc_m = detail::init_encoder<S>(cfg.dims.motion, h, Rng::derive(seed, fnv1a64_str("enc_m")));
    }
    if (cfg.flags.use_audio)
        p.enc_au = detail::init_encoder<S>(cfg.dims.audio, h, Rng::derive(seed, fnv1a64_str("enc_au")));
    if (cfg.flags.use_alignment)
        p.enc_text = detail::init_encoder<S>(cfg.dims.text, h, Rng::derive(seed, fnv1a64_str("enc_text")));

    Rng rng(Rng::derive(seed, fnv1a64_str("classifier")));
    const int fused = cfg.stream_count() * h;
    p.cls_w = TensorT<S>({fused, cfg.num_classes});
    const double bound = std::sqrt(6.0 / fused);
    for (size_t i = 0; i < p.cls_w.size(); ++i) p.cls_w[i] = static_cast<S>(rng.uniform(-bound, bound));
    p.cls_b = TensorT<S>({cfg.num_classes});
    p.log_tau = TensorT<S>::scalar(static_cast<S>(std::log(0.07)));
    return p;
}

// ---------------------------------------------------------------------------
// parameter enumeration (fixed order: streams, text encoder, classifier, tau)
// ---------------------------------------------------------------------------

template <typename S>
void enumerate_encoder(const std::string& prefix, EncoderParamsT<S>& e, std::vector<NamedParamT<S>>& out) {
    out.push_back({prefix + ".w1", &e.w1});
    out.push_back({prefix + ".b1", &e.b1});
    out.push_back({prefix + ".gamma1", &e.gamma1});
    out.push_back({prefix + ".beta1", &e.beta1});
    out.push_back({prefix + ".w2", &e.w2});
    out.push_back({prefix + ".b2", &e.b2});
    out.push_back({prefix + ".gamma2", &e.gamma2});
    out.push_back({prefix + ".beta2", &e.beta2});
}

template <typename S>
std::vector<NamedParamT<S>> trainable_params(ModelParamsT<S>& p) {
    std::vector<NamedParamT<S>> out;
    if (p.enc_apmo) enumerate_encoder("enc_apmo", *p.enc_apmo, out);
    if (p.enc_ap) enumerate_encoder("enc_ap", *p.enc_ap, out);
    if (p.enc_m) enumerate_encoder("enc_m", *p.enc_m, out);
    if (p.enc_au) enumerate_encoder("enc_au", *p.enc_au, out);
    if (p.enc_text) enumerate_encoder("enc_text", *p.enc_text, out);
    out.push_back({"classifier.w", &p.cls_w});
    out.push_back({"classifier.b", &p.cls_b});
    out.push_back({"log_tau", &p.log_tau});
    return out;
}

/// Trainables plus BatchNorm running statistics; everything a checkpoint holds.
template <typename S>
std::vector<NamedParamT<S>> state_tensors(ModelParamsT<S>& p) {
    auto out = trainable_params(p);
    auto add_bn = [&](const std::string& prefix, EncoderParamsT<S>& e) {
        out.push_back({prefix + ".bn1.mean", &e.bn1.mean});
        out.push_back({prefix + ".bn1.var", &e.bn1.var});
        out.push_back({prefix + ".bn2.mean", &e.bn2.mean});
        out.push_back({prefix + ".bn2.var", &e.bn2.var});
    };
    if (p.enc_apmo) add_bn("enc_apmo", *p.enc_apmo);
    if (p.enc_ap) add_bn("enc_ap", *p.enc_ap);
    if (p.enc_m) add_bn("enc_m", *p.enc_m);
    if (p.enc_au) add_bn("enc_au", *p.enc_au);
    if (p.enc_text) add_bn("enc_text", *p.enc_text);
    return out;
}

/// Projects log_tau back into [ln 0.01, ln 1.0] after an optimizer step.
template <typename S>
void clamp_log_tau(ModelParamsT<S>& p) {
    const S lo = static_cast<S>(std::log(0.01)), hi = S(0);
    if (p.log_tau[0] < lo) p.log_tau[0] = lo;
    if (p.log_tau[0] > hi) p.log_tau[0] = hi;
}

// ---------------------------------------------------------------------------
// forward graph
// ---------------------------------------------------------------------------

template <typename S>
struct EncoderVarsT {
    VarT<S> w1, b1, gamma1, beta1, w2, b2, gamma2, beta2;
    BatchNormRunningT<S>* bn1 = nullptr;
    BatchNormRunningT<S>* bn2 = nullptr;
};

template <typename S>
struct ModelVarsT {
    std::optional<EncoderVarsT<S>> apmo, ap, m, au, text;
    VarT<S> cls_w, cls_b, log_tau;
    std::vector<VarT<S>> leaves;  // parallel to trainable_params order
};

template <typename S>
EncoderVarsT<S> encoder_vars(TapeT<S>& tape, EncoderParamsT<S>& e, std::vector<VarT<S>>& leaves) {
    EncoderVarsT<S> v;
    v.w1 = tape.leaf(e.w1);
    v.b1 = tape.leaf(e.b1);
    v.gamma1 = tape.leaf(e.gamma1);
    v.beta1 = tape.leaf(e.beta1);
    v.w2 = tape.leaf(e.w2);
    v.b2 = tape.leaf(e.b2);
    v.gamma2 = tape.leaf(e.gamma2);
    v.beta2 = tape.leaf(e.beta2);
    v.bn1 = &e.bn1;
    v.bn2 = &e.bn2;
    for (auto var : {v.w1, v.b1, v.gamma1, v.beta1, v.w2, v.b2, v.gamma2, v.beta2}) leaves.push_back(var);
    return v;
}

/// Leaf nodes for every trainable, in trainable_params order.
template <typename S>
ModelVarsT<S> make_vars(TapeT<S>& tape, ModelParamsT<S>& p) {
    ModelVarsT<S> v;
    if (p.enc_apmo) v.apmo = encoder_vars(tape, *p.enc_apmo, v.leaves);
    if (p.enc_ap) v.ap = encoder_vars(tape, *p.enc_ap, v.leaves);
    if (p.enc_m) v.m = encoder_vars(tape, *p.enc_m, v.leaves);
    if (p.enc_au) v.au = encoder_vars(tape, *p.enc_au, v.leaves);
    if (p.enc_text) v.text = encoder_vars(tape, *p.enc_text, v.leaves);
    v.cls_w = tape.leaf(p.cls_w);
    v.cls_b = tape.leaf(p.cls_b);
    v.log_tau = tape.leaf(p.log_tau);
    v.leaves.push_back(v.cls_w);
    v.leaves.push_back(v.cls_b);
    v.leaves.push_back(v.log_tau);
    return v;
}

/// Linear -> ReLU -> BatchNorm, twice (or BN before ReLU with the switch).
template <typename S>
VarT<S> encode(const EncoderVarsT<S>& e, VarT<S> x, Mode mode, bool bn_before_relu = false) {
    auto block = [&](VarT<S> in, VarT<S> w, VarT<S> b, VarT<S> g, VarT<S> be, BatchNormRunningT<S>* bn) {
        VarT<S> lin = add_rowvec(matmul(in, w), b);
        if (bn_before_relu) return relu(batchnorm(lin, g, be, bn, mode));
        return batchnorm(relu(lin), g, be, bn, mode);
    };
    VarT<S> h1 = block(x, e.w1, e.b1, e.gamma1, e.beta1, e.bn1);
    return block(h1, e.w2, e.b2, e.gamma2, e.beta2, e.bn2);
}

/// Concat active streams (apmo|ap, m, a), optionally row-scaling the audio
/// stream by consistency ratings, then one linear classifier.
template <typename S>
VarT<S> fuse_and_classify(const ModelVarsT<S>& v, VarT<S> ap, VarT<S> m, VarT<S> a, const TensorT<S>* r) {
    std::vector<VarT<S>> streams;
    if (ap.tape != nullptr) streams.push_back(ap);
    if (m.tape != nullptr) streams.push_back(m);
    if (a.tape != nullptr) {
        if (r != nullptr) {
            for (size_t i = 0; i < r->size(); ++i)
                if ((*r)[i] < S(0) || (*r)[i] > S(1))
                    throw ConfigError("consistency rating outside [0,1] at row " + std::to_string(i));
            streams.push_back(scale_rows(a, *r));
        } else {
            streams.push_back(a);
        }
    }
    if (streams.empty()) throw ConfigError("fuse_and_classify: no feature streams");
    VarT<S> fused = streams.size() == 1 ? streams[0] : concat_cols(streams);
    return add_rowvec(matmul(fused, v.cls_w), v.cls_b);
}

/// One training/eval batch in tensor form.
template <typename S>
struct BatchT {
    TensorT<S> ap, m, au;        // (B x D_*); size 0 when the stream is off
    TensorT<S> t_vis, t_aud;     // narration features, training only
    std::vector<int> labels;
    TensorT<S> r;                // per-row consistency, size 0 when unused
};

template <typename S>
struct ForwardOutputT {
    VarT<S> ap, m, a;      // encoded modality features (null when stream off)
    VarT<S> t, t_hat;      // encoded narration features, train mode only
    VarT<S> logits;
};

template <typename S>
struct ForwardPass {
    ModelVarsT<S> vars;
    ForwardOutputT<S> out;
};

/// Runs the active encoders and the classifier. In train mode (with
/// alignment on) the shared text encoder also embeds both narrations;
/// in eval mode narration paths are skipped entirely and raw audio is fused
/// unweighted.
template <typename S>
ForwardPass<S> forward(TapeT<S>& tape, ModelParamsT<S>& params, const BatchT<S>& batch, Mode mode) {
    const ModelConfig& cfg = params.cfg;
    ForwardPass<S> fp;
    fp.vars = make_vars(tape, params);
    const bool conv = cfg.bn_before_relu;

    VarT<S> f_vis{}, f_m{}, f_au{};
    if (cfg.flags.fuse_early_ap_mo) {
        VarT<S> x_ap = tape.leaf(batch.ap);
        VarT<S> x_m = tape.leaf(batch.m);
        f_vis = encode(*fp.vars.apmo, concat_cols<S>({x_ap, x_m}), mode, conv);
    } else {
        if (cfg.flags.use_appearance) f_vis = encode(*fp.vars.ap, tape.leaf(batch.ap), mode, conv);
        if (cfg.flags.use_motion) f_m = encode(*fp.vars.m, tape.leaf(batch.m), mode, conv);
    }
    if (cfg.flags.use_audio) f_au = encode(*fp.vars.au, tape.leaf(batch.au), mode, conv);

    fp.out.ap = f_vis;
    fp.out.m = f_m;
    fp.out.a = f_au;

    const bool weight = mode == Mode::train && cfg.flags.use_consistency_weighting && cfg.flags.use_audio;
    if (weight && batch.r.size() == 0) throw ConfigError("forward: consistency weighting enabled but batch has no ratings");
    fp.out.logits = fuse_and_classify(fp.vars, f_vis, f_m, f_au, weight ? &batch.r : nullptr);

    if (mode == Mode::train && cfg.flags.use_alignment) {
        fp.out.t = encode(*fp.vars.text, tape.leaf(batch.t_vis), mode, conv);
        if (cfg.flags.use_audio && cfg.flags.align_audio_to == AlignTarget::audio_narration)
            fp.out.t_hat = encode(*fp.vars.text, tape.leaf(batch.t_aud), mode, conv);
    }
    return fp;
}

/// Gradients of every trainable, parallel to trainable_params order.
template <typename S>
std::vector<const TensorT<S>*> collect_grads(const ModelVarsT<S>& vars) {
    std::vector<const TensorT<S>*> out;
    out.reserve(vars.leaves.size());
    for (const auto& leaf : vars.leaves) out.push_back(&leaf.grad());
    return out;
}

}  // namespace mmdg
