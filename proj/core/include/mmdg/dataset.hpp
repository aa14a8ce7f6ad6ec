#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mmdg {

struct ModalityDims {
    int appearance = 0;
    int motion = 0;
    int audio = 0;
    int text = 0;
};

/// One clip's precomputed per-modality embeddings plus metadata. Audio (and
/// with it the audio narration) may be absent; a consistency rating implies
/// both are present. `consistency` is whatever the rater produced;
/// `consistency_truth` is the generator's ground truth and never feeds
/// training.
struct ClipRecord {
    std::string clip_id;
    std::string scenario;
    std::string location;
    int label = 0;
    std::vector<float> emb_appearance;
    std::vector<float> emb_motion;
    std::optional<std::vector<float>> emb_audio;
    std::vector<float> emb_vis_narration;
    std::optional<std::vector<float>> emb_audio_narration;
    std::optional<float> consistency;
    std::optional<float> consistency_truth;
    std::string vis_text;  // empty = absent
    std::string aud_text;

    bool has_audio() const { return emb_audio.has_value() && emb_audio_narration.has_value(); }
};

struct DatasetManifest {
    int version = 1;
    int num_classes = 0;
    ModalityDims dims;
    std::vector<std::string> class_names;
    std::vector<std::pair<std::string, std::string>> domains;  // (scenario, location)
    int num_records = 0;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<ClipRecord> records;

    void build_index();
    const ClipRecord& at(const std::string& clip_id) const;
    size_t index_of(const std::string& clip_id) const;

  private:
    std::unordered_map<std::string, size_t> index_;
};

// On-disk layout inside a dataset directory:
//   manifest.json
//   clips.jsonl              one JSON object per clip (metadata + row indices)
//   appearance.bin motion.bin vis_narr.bin       one row per clip
//   audio.bin aud_narr.bin                       one row per audio-complete clip
// Each .bin: magic "MMDG", u32 version, u32 rows, u32 dim, then row-major
// little-endian float32. All integers little-endian.

void write_dataset(const std::vector<ClipRecord>& records, const DatasetManifest& manifest, const std::string& dir);
Dataset read_dataset(const std::string& dir);

/// Rewrites clips.jsonl only (after rating fills consistency fields).
void rewrite_clip_metadata(const Dataset& ds, const std::string& dir);

/// Content hash over every dataset file; recorded in checkpoints and reports.
uint64_t dataset_hash(const std::string& dir);

std::string domain_name(const std::string& scenario, const std::string& location);

}  // namespace mmdg
