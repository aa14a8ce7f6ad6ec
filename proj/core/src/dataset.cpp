#include "mmdg/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "mmdg/error.hpp"
#include "mmdg/rng.hpp"

namespace mmdg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'M', 'D', 'G'};
constexpr uint32_t kBlobVersion = 1;
constexpr int kManifestVersion = 1;

struct BlobWriter {
    std::ofstream out;
    uint32_t rows = 0;
    uint32_t dim = 0;

    BlobWriter(const fs::path& path, uint32_t d) : dim(d) {
        out.open(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out.write(kMagic, 4);
        write_u32(kBlobVersion);
        write_u32(0);  // row count patched on close
        write_u32(dim);
    }

    void write_u32(uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }

    uint32_t append(const std::vector<float>& row, const std::string& what) {
        if (row.size() != dim)
            throw IoError(what + ": row has " + std::to_string(row.size()) + " values, manifest says " +
                          std::to_string(dim));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        return rows++;
    }

    void close() {
        out.seekp(8);
        write_u32(rows);
        out.close();
    }
};

class BlobReader {
  public:
    BlobReader(const fs::path& path, uint32_t expected_dim) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path_);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path_ + ": bad magic bytes");
        const uint32_t version = read_u32(in);
        if (version != kBlobVersion)
            throw IoError(path_ + ": unsupported blob version " + std::to_string(version));
        rows_ = read_u32(in);
        dim_ = read_u32(in);
        if (dim_ != expected_dim)
            throw IoError(path_ + ": dim " + std::to_string(dim_) + " does not match manifest dim " +
                          std::to_string(expected_dim));
        data_.resize(static_cast<size_t>(rows_) * dim_);
        in.read(reinterpret_cast<char*>(data_.data()), static_cast<std::streamsize>(data_.size() * 4));
        if (static_cast<size_t>(in.gcount()) != data_.size() * 4) throw IoError(path_ + ": truncated data section");
    }

    std::vector<float> row(uint32_t r) const {
        if (r >= rows_) throw IoError(path_ + ": row index " + std::to_string(r) + " out of range");
        return {data_.begin() + static_cast<size_t>(r) * dim_, data_.begin() + static_cast<size_t>(r + 1) * dim_};
    }

    uint32_t rows() const { return rows_; }

  private:
    static uint32_t read_u32(std::ifstream& in) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw IoError("truncated header");
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
               (static_cast<uint32_t>(b[3]) << 24);
    }

    std::string path_;
    uint32_t rows_ = 0;
    uint32_t dim_ = 0;
    std::vector<float> data_;
};

json manifest_to_json(const DatasetManifest& m) {
    json domains = json::array();
    for (const auto& [s, l] : m.domains) domains.push_back({{"scenario", s}, {"location", l}});
    return json{{"version", m.version},
                {"num_classes", m.num_classes},
                {"dims",
                 {{"appearance", m.dims.appearance},
                  {"motion", m.dims.motion},
                  {"audio", m.dims.audio},
                  {"text", m.dims.text}}},
                {"class_names", m.class_names},
                {"domains", domains},
                {"num_records", m.num_records},
                {"files",
                 {{"appearance", "appearance.bin"},
                  {"motion", "motion.bin"},
                  {"audio", "audio.bin"},
                  {"vis_narr", "vis_narr.bin"},
                  {"aud_narr", "aud_narr.bin"}}}};
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
        throw IoError("manifest version " + std::to_string(m.version) + " unsupported (expected " +
                      std::to_string(kManifestVersion) + ")");
    m.num_classes = j.at("num_classes").get<int>();
    const auto& d = j.at("dims");
    m.dims.appearance = d.at("appearance").get<int>();
    m.dims.motion = d.at("motion").get<int>();
    m.dims.audio = d.at("audio").get<int>();
    m.dims.text = d.at("text").get<int>();
    if (m.dims.appearance < 1 || m.dims.motion < 1 || m.dims.audio < 1 || m.dims.text < 1)
        throw IoError("manifest dims must all be >= 1");
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& dom : j.at("domains"))
        m.domains.emplace_back(dom.at("scenario").get<std::string>(), dom.at("location").get<std::string>());
    m.num_records = j.at("num_records").get<int>();
    return m;
}

void validate_record(const ClipRecord& r, const DatasetManifest& m) {
    auto check_dim = [&](size_t got, int want, const char* what) {
        if (static_cast<int>(got) != want)
            throw IoError("clip " + r.clip_id + ": " + what + " has dim " + std::to_string(got) + ", manifest says " +
                          std::to_string(want));
    };
    check_dim(r.emb_appearance.size(), m.dims.appearance, "appearance embedding");
    check_dim(r.emb_motion.size(), m.dims.motion, "motion embedding");
    check_dim(r.emb_vis_narration.size(), m.dims.text, "visual narration embedding");
    if (r.emb_audio) check_dim(r.emb_audio->size(), m.dims.audio, "audio embedding");
    if (r.emb_audio_narration) check_dim(r.emb_audio_narration->size(), m.dims.text, "audio narration embedding");
    if (r.consistency && (!r.emb_audio || !r.emb_audio_narration))
        throw IoError("clip " + r.clip_id + ": consistency present without audio embeddings");
    if (r.consistency && (*r.consistency < 0.0f || *r.consistency > 1.0f))
        throw IoError("clip " + r.clip_id + ": consistency outside [0,1]");
    if (r.label < 0 || r.label >= m.num_classes)
        throw IoError("clip " + r.clip_id + ": label " + std::to_string(r.label) + " >= num_classes " +
                      std::to_string(m.num_classes));
    const auto dom = std::make_pair(r.scenario, r.location);
    if (std::find(m.domains.begin(), m.domains.end(), dom) == m.domains.end())
        throw IoError("clip " + r.clip_id + ": domain " + domain_name(r.scenario, r.location) +
                      " not listed in manifest");
}

}  // namespace

std::string domain_name(const std::string& scenario, const std::string& location) {
    return scenario + "-" + location;
}

void Dataset::build_index() {
    index_.clear();
    index_.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) index_[records[i].clip_id] = i;
}

const ClipRecord& Dataset::at(const std::string& clip_id) const { return records[index_of(clip_id)]; }

size_t Dataset::index_of(const std::string& clip_id) const {
    auto it = index_.find(clip_id);
    if (it == index_.end()) throw IoError("unknown clip id: " + clip_id);
    return it->second;
}

void write_dataset(const std::vector<ClipRecord>& records, const DatasetManifest& manifest, const std::string& dir) {
    if (static_cast<int>(records.size()) != manifest.num_records)
        throw IoError("manifest num_records " + std::to_string(manifest.num_records) + " but " +
                      std::to_string(records.size()) + " records given");
    for (const auto& r : records) validate_record(r, manifest);

    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create dataset directory " + dir + ": " + ec.message());

    BlobWriter ap(root / "appearance.bin", manifest.dims.appearance);
    BlobWriter mo(root / "motion.bin", manifest.dims.motion);
    BlobWriter au(root / "audio.bin", manifest.dims.audio);
    BlobWriter vn(root / "vis_narr.bin", manifest.dims.text);
    BlobWriter an(root / "aud_narr.bin", manifest.dims.text);

    std::ofstream clips(root / "clips.jsonl", std::ios::trunc);
    if (!clips) throw IoError("cannot open clips.jsonl for writing");

    for (const auto& r : records) {
        json line{{"clip_id", r.clip_id},
                  {"scenario", r.scenario},
                  {"location", r.location},
                  {"label", r.label}};
        line["row"] = ap.append(r.emb_appearance, r.clip_id);
        mo.append(r.emb_motion, r.clip_id);
        vn.append(r.emb_vis_narration, r.clip_id);
        if (r.emb_audio && r.emb_audio_narration) {
            line["audio_row"] = au.append(*r.emb_audio, r.clip_id);
            an.append(*r.emb_audio_narration, r.clip_id);
        }
        if (r.consistency) line["consistency"] = static_cast<double>(*r.consistency);
        if (r.consistency_truth) line["consistency_truth"] = static_cast<double>(*r.consistency_truth);
        if (!r.vis_text.empty()) line["vis_text"] = r.vis_text;
        if (!r.aud_text.empty()) line["aud_text"] = r.aud_text;
        clips << line.dump() << "\n";
    }
    clips.close();
    ap.close();
    mo.close();
    au.close();
    vn.close();
    an.close();

    std::ofstream mf(root / "manifest.json", std::ios::trunc);
    if (!mf) throw IoError("cannot open manifest.json for writing");
    mf << manifest_to_json(manifest).dump(2) << "\n";
}

Dataset read_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream mf(root / "manifest.json");
    if (!mf) throw IoError("missing manifest.json in " + dir);
    json mj;
    try {
        mf >> mj;
    } catch (const json::exception& e) {
        throw IoError("manifest.json: " + std::string(e.what()));
    }

    Dataset ds;
    ds.manifest = manifest_from_json(mj);

    BlobReader ap(root / "appearance.bin", ds.manifest.dims.appearance);
    BlobReader mo(root / "motion.bin", ds.manifest.dims.motion);
    BlobReader au(root / "audio.bin", ds.manifest.dims.audio);
    BlobReader vn(root / "vis_narr.bin", ds.manifest.dims.text);
    BlobReader an(root / "aud_narr.bin", ds.manifest.dims.text);

    std::ifstream clips(root / "clips.jsonl");
    if (!clips) throw IoError("missing clips.jsonl in " + dir);
    std::string line;
    int lineno = 0;
    while (std::getline(clips, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("clips.jsonl line " + std::to_string(lineno) + ": " + e.what());
        }
        ClipRecord r;
        r.clip_id = j.at("clip_id").get<std::string>();
        r.scenario = j.at("scenario").get<std::string>();
        r.location = j.at("location").get<std::string>();
        r.label = j.at("label").get<int>();
        const uint32_t row = j.at("row").get<uint32_t>();
        r.emb_appearance = ap.row(row);
        r.emb_motion = mo.row(row);
        r.emb_vis_narration = vn.row(row);
        if (j.contains("audio_row")) {
            const uint32_t arow = j.at("audio_row").get<uint32_t>();
            r.emb_audio = au.row(arow);
            r.emb_audio_narration = an.row(arow);
        }
        if (j.contains("consistency")) r.consistency = j.at("consistency").get<float>();
        if (j.contains("consistency_truth")) r.consistency_truth = j.at("consistency_truth").get<float>();
        if (j.contains("vis_text")) r.vis_text = j.at("vis_text").get<std::string>();
        if (j.contains("aud_text")) r.aud_text = j.at("aud_text").get<std::string>();
        validate_record(r, ds.manifest);
        ds.records.push_back(std::move(r));
    }
    if (static_cast<int>(ds.records.size()) != ds.manifest.num_records)
        throw IoError("clips.jsonl has " + std::to_string(ds.records.size()) + " records, manifest says " +
                      std::to_string(ds.manifest.num_records));
    ds.build_index();
    return ds;
}

void rewrite_clip_metadata(const Dataset& ds, const std::string& dir) {
    // Row indices must be preserved; regenerate them in record order exactly
    // as write_dataset does.
    const fs::path root(dir);
    const fs::path tmp = root / "clips.jsonl.tmp";
    {
        std::ofstream clips(tmp, std::ios::trunc);
        if (!clips) throw IoError("cannot open " + tmp.string());
        uint32_t row = 0, audio_row = 0;
        for (const auto& r : ds.records) {
            json line{{"clip_id", r.clip_id},
                      {"scenario", r.scenario},
                      {"location", r.location},
                      {"label", r.label},
                      {"row", row++}};
            if (r.emb_audio && r.emb_audio_narration) line["audio_row"] = audio_row++;
            if (r.consistency) line["consistency"] = static_cast<double>(*r.consistency);
            if (r.consistency_truth) line["consistency_truth"] = static_cast<double>(*r.consistency_truth);
            if (!r.vis_text.empty()) line["vis_text"] = r.vis_text;
            if (!r.aud_text.empty()) line["aud_text"] = r.aud_text;
            clips << line.dump() << "\n";
        }
    }
    fs::rename(tmp, root / "clips.jsonl");
}

uint64_t dataset_hash(const std::string& dir) {
    const fs::path root(dir);
    uint64_t h = 0xCBF29CE484222325ULL;
    for (const char* name :
         {"manifest.json", "clips.jsonl", "appearance.bin", "motion.bin", "audio.bin", "vis_narr.bin",
          "aud_narr.bin"}) {
        std::ifstream in(root / name, std::ios::binary);
        if (!in) throw IoError("dataset_hash: missing " + (root / name).string());
        char buf[1 << 16];
        while (in.read(buf, sizeof buf) || in.gcount() > 0) h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
        h = fnv1a64_str(name, h);
    }
    return h;
}

}  // namespace mmdg
