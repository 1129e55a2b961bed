#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advtex/grid.hpp"
#include "advtex/rng.hpp"

namespace advtex {

struct SourceImage {
    std::string path;  // absolute
    int width = 0;
    int height = 0;
    uint64_t content_hash = 0;
};

struct IngestReport {
    std::vector<SourceImage> images;   // lexicographic by filename
    std::vector<std::string> skipped;  // unreadable files, logged not fatal
};

// Enumerates decodable PNGs in `dir` (non-recursive), lexicographic order.
// Unreadable files are skipped with a warning entry; an empty directory (or
// one with no usable image) is an error.
IngestReport ingest_frames(const std::string& dir);

// One procedural perturbation. Rect fields are row, col, height, width.
struct EditSpec {
    std::string kind;     // hue_rotate | saturation_scale | noise_patch | channel_invert | external
    double amount = 0.0;  // degrees (hue_rotate), factor (saturation_scale), sigma (noise_patch)
    int rect_row = 0, rect_col = 0, rect_h = 0, rect_w = 0;
    int channel = 0;          // channel_invert target channel
    std::string command;      // external hook template with {in} and {out}

    std::string to_string() const;
    friend bool operator==(const EditSpec&, const EditSpec&) = default;
};

// Text forms: "hue_rotate:30", "saturation_scale:0.5",
// "noise_patch:row,col,h,w,sigma", "channel_invert:row,col,h,w,channel",
// "external:<command with {in} {out}>".
EditSpec parse_edit_spec(const std::string& text);

// Deterministic under (image, spec, rng state). The external hook round-trips
// through temporary PNG files and the user command.
ImageFrame apply_edit(const ImageFrame& image, const EditSpec& spec, SplitRng& rng);

struct LabelRecord {
    std::string path;  // as written in the labels file
    double score = 0.0;
    std::string annotator;
    std::string timestamp;
};

struct LabelSession {
    std::vector<LabelRecord> labels;      // one per labeled image, file order
    std::vector<std::string> unlabeled;   // image paths with no label row
};

// Reads a CSV labels file (header: path,score,annotator,timestamp), validates
// score ranges, rejects conflicting duplicates, and reports which of the
// ingested images remain unlabeled. Label paths match on filename.
LabelSession label_session(const std::vector<SourceImage>& images,
                           const std::string& labels_csv);

struct DatasetTriplet {
    std::string prompt_text;
    std::string image_path;  // relative to the export file
    double label = 0.0;
    std::string annotator;
    std::string edit_spec;

    friend bool operator==(const DatasetTriplet&, const DatasetTriplet&) = default;
};

// Writes one JSONL record per triplet plus summary.json with counts and a
// 10-bin label histogram (left-closed bins, last bin right-closed).
void export_triplets(const std::vector<DatasetTriplet>& triplets, const std::string& out_jsonl,
                     const std::string& summary_json);

std::vector<DatasetTriplet> import_triplets(const std::string& jsonl_path);

// bin = min(floor(label * 10), 9)
int label_histogram_bin(double label);

}  // namespace advtex
