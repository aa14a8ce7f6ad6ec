#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmdg/adam.hpp"
#include "mmdg/dataset.hpp"
#include "mmdg/losses.hpp"
#include "mmdg/model.hpp"
#include "mmdg/splits.hpp"

namespace mmdg {

struct TrainConfig {
    int batch_size = 128;
    int epochs = 50;
    double lr = 2e-4;
    std::vector<int> lr_decay_epochs{30, 40};
    double lr_decay_factor = 10.0;
    double lambda = 0.1;
    ModeFlags flags;
    uint64_t seed = 0;
    std::string checkpoint_dir;  // empty: keep checkpoints in memory only
    int embed_dim = 256;         // hidden width == encoder output width
    double val_fraction = 0.0;   // held-in validation share of the train set
    bool bn_before_relu = false;

    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double l_c = 0.0;
    double l_align = 0.0;
    double total = 0.0;
    std::optional<double> val_top1;
};

/// Everything needed to resume a run exactly: parameters (with BN running
/// stats), optimizer moments, the position in the epoch loop, the RNG state
/// and the metric history so far.
struct TrainState {
    ModelParams params;
    AdamState adam;
    int epoch = 0;  // next epoch to run
    uint64_t rng_state = 0;
    uint64_t seed = 0;
    uint64_t data_hash = 0;
    std::vector<EpochMetrics> history;
};

/// lr / factor^(number of decay epochs <= epoch). The divisor is accumulated
/// multiplicatively and applied in one division so the scheduled rates come
/// out bit-exact (iterated division would not).
double lr_at(int epoch, const TrainConfig& cfg);

struct TrainResult {
    TrainState state;
    std::string checkpoint_path;  // empty when checkpoint_dir unset
};

/// Full training loop: seeded shuffling, full batches (a trailing partial
/// batch below 2 samples is dropped), train-mode forward, total loss per the
/// mode flags, Adam with the decay schedule, temperature clamp, per-epoch
/// metrics, checkpoint at every epoch end. Deterministic per seed.
TrainResult train(const Dataset& ds, const SplitSpec& split, const TrainConfig& cfg,
                  const std::string& metrics_path = "", const TrainState* resume = nullptr, uint64_t data_hash = 0);

struct EvalResult {
    std::vector<std::string> clip_ids;
    std::vector<int> predictions;
    std::vector<int> labels;
    double top1 = 0.0;
};

/// Eval-mode predictions over the given clips; argmax ties break toward the
/// lowest class index. Never mutates parameters or BN running statistics.
EvalResult evaluate(ModelParams& params, const Dataset& ds, const std::vector<std::string>& test_ids);

void save_checkpoint(TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

/// Metrics log line exactly as written to the JSONL file.
std::string metrics_line(const EpochMetrics& m);

}  // namespace mmdg
