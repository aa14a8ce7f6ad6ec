#include "mmdg/synth.hpp"

#include <cmath>
#include <string>

#include "mmdg/error.hpp"
#include "mmdg/rng.hpp"

namespace mmdg {

namespace {

constexpr double kTextNoise = 0.1;
// Audio-narration prototypes share this much direction with the visual-text
// prototype of the same class, so matched narrations score high cosine while
// cross-class pairs hover near zero.
constexpr double kTextOverlap = 0.7;

std::vector<double> unit_vector(Rng& rng, int dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (int i = 0; i < dim; ++i) {
            v[i] = rng.normal();
            norm += v[i] * v[i];
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-9);
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<float> sample_feature(Rng& rng, const std::vector<double>& prototype, const std::vector<double>& offset,
                                  double noise) {
    std::vector<float> out(prototype.size());
    for (size_t i = 0; i < prototype.size(); ++i)
        out[i] = static_cast<float>(prototype[i] + offset[i] + noise * rng.normal());
    return out;
}

std::vector<float> sample_text_feature(Rng& rng, const std::vector<double>& prototype, double noise) {
    std::vector<float> out(prototype.size());
    for (size_t i = 0; i < prototype.size(); ++i) out[i] = static_cast<float>(prototype[i] + noise * rng.normal());
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
    if (num_scenarios < 1 || num_locations < 1) throw ConfigError("synth: need at least one scenario and location");
    if (clips_per_domain < 1) throw ConfigError("synth: clips_per_domain must be >= 1");
    if (d_ap < 1 || d_m < 1 || d_au < 1 || d_t < 1) throw ConfigError("synth: all dims must be >= 1");
    if (sigma_ap < 0 || sigma_m < 0 || sigma_au < 0 || sigma_n < 0)
        throw ConfigError("synth: sigmas must be non-negative");
    if (p_bad < 0.0 || p_bad > 1.0) throw ConfigError("synth: p_bad must be in [0,1]");
}

std::pair<DatasetManifest, std::vector<ClipRecord>> generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(Rng::derive(cfg.seed, fnv1a64_str("synth")));

    const int C = cfg.num_classes;
    std::vector<std::vector<double>> proto_ap(C), proto_m(C), proto_au(C), proto_t(C), proto_that(C);
    for (int c = 0; c < C; ++c) {
        proto_ap[c] = unit_vector(rng, cfg.d_ap);
        proto_m[c] = unit_vector(rng, cfg.d_m);
        proto_au[c] = unit_vector(rng, cfg.d_au);
        proto_t[c] = unit_vector(rng, cfg.d_t);
        // audio-text prototype: correlated with the visual-text one
        auto fresh = unit_vector(rng, cfg.d_t);
        std::vector<double> mix(cfg.d_t);
        double norm = 0.0;
        for (int i = 0; i < cfg.d_t; ++i) {
            mix[i] = kTextOverlap * proto_t[c][i] + (1.0 - kTextOverlap) * fresh[i];
            norm += mix[i] * mix[i];
        }
        norm = std::sqrt(norm);
        for (auto& x : mix) x /= norm;
        proto_that[c] = std::move(mix);
    }

    DatasetManifest manifest;
    manifest.num_classes = C;
    manifest.dims = {cfg.d_ap, cfg.d_m, cfg.d_au, cfg.d_t};
    for (int c = 0; c < C; ++c) manifest.class_names.push_back("action_" + std::to_string(c));
    for (int s = 0; s < cfg.num_scenarios; ++s)
        for (int l = 0; l < cfg.num_locations; ++l)
            manifest.domains.emplace_back("S" + std::to_string(s), "L" + std::to_string(l));

    // one offset per (domain, modality), with norm exactly sigma_*
    const int D = static_cast<int>(manifest.domains.size());
    std::vector<std::vector<double>> off_ap(D), off_m(D), off_au(D);
    for (int d = 0; d < D; ++d) {
        off_ap[d] = unit_vector(rng, cfg.d_ap);
        off_m[d] = unit_vector(rng, cfg.d_m);
        off_au[d] = unit_vector(rng, cfg.d_au);
        for (auto& x : off_ap[d]) x *= cfg.sigma_ap;
        for (auto& x : off_m[d]) x *= cfg.sigma_m;
        for (auto& x : off_au[d]) x *= cfg.sigma_au;
    }

    std::vector<ClipRecord> records;
    records.reserve(static_cast<size_t>(D) * cfg.clips_per_domain);
    for (int d = 0; d < D; ++d) {
        const auto& [scen, loc] = manifest.domains[d];
        // balanced labels within the domain (counts differ by at most 1)
        std::vector<int> labels(cfg.clips_per_domain);
        for (int i = 0; i < cfg.clips_per_domain; ++i) labels[i] = i % C;
        rng.shuffle(labels);

        for (int i = 0; i < cfg.clips_per_domain; ++i) {
            const int c = labels[i];
            const bool bad = rng.uniform() < cfg.p_bad;
            int audio_class = c;
            if (bad && C > 1) audio_class = static_cast<int>((c + 1 + rng.below(C - 1)) % C);

            ClipRecord r;
            char idx[16];
            std::snprintf(idx, sizeof idx, "%05d", i);
            r.clip_id = scen + "_" + loc + "_" + idx;
            r.scenario = scen;
            r.location = loc;
            r.label = c;
            r.emb_appearance = sample_feature(rng, proto_ap[c], off_ap[d], cfg.sigma_n);
            r.emb_motion = sample_feature(rng, proto_m[c], off_m[d], cfg.sigma_n);
            r.emb_audio = sample_feature(rng, proto_au[audio_class], off_au[d], cfg.sigma_n);
            r.emb_vis_narration = sample_text_feature(rng, proto_t[c], kTextNoise);
            r.emb_audio_narration = sample_text_feature(rng, proto_that[audio_class], kTextNoise);
            r.consistency_truth = bad ? 0.0f : 1.0f;
            r.vis_text = "a person performs " + manifest.class_names[c];
            r.aud_text = "the sound of " + manifest.class_names[audio_class];
            records.push_back(std::move(r));
        }
    }
    manifest.num_records = static_cast<int>(records.size());
    return {std::move(manifest), std::move(records)};
}

}  // namespace mmdg
