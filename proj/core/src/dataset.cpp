#include "advtex/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "advtex/color.hpp"
#include "advtex/errors.hpp"
#include "advtex/hash.hpp"
#include "advtex/image_io.hpp"

namespace fs = std::filesystem;

namespace advtex {

IngestReport ingest_frames(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);

    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png") candidates.push_back(entry.path());
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    IngestReport report;
    for (const fs::path& p : candidates) {
        try {
            ImageFrame img = read_png(p.string());
            SourceImage src;
            src.path = fs::absolute(p).string();
            src.width = img.width();
            src.height = img.height();
            src.content_hash = hash_file(p.string());
            report.images.push_back(std::move(src));
        } catch (const Error& e) {
            report.skipped.push_back(p.string() + ": " + e.what());
        }
    }
    if (report.images.empty())
        throw IoError("no usable images in directory: " + dir);
    return report;
}

std::string EditSpec::to_string() const {
    std::ostringstream os;
    if (kind == "hue_rotate" || kind == "saturation_scale") {
        os << kind << ':' << amount;
    } else if (kind == "noise_patch") {
        os << kind << ':' << rect_row << ',' << rect_col << ',' << rect_h << ',' << rect_w << ','
           << amount;
    } else if (kind == "channel_invert") {
        os << kind << ':' << rect_row << ',' << rect_col << ',' << rect_h << ',' << rect_w << ','
           << channel;
    } else if (kind == "external") {
        os << kind << ':' << command;
    } else {
        os << kind;
    }
    return os.str();
}

namespace {

std::vector<std::string> split_fields(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double to_number(const std::string& s, const std::string& what) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') throw ParseError(what + " expects a number, got '" + s + "'");
    return v;
}

}  // namespace

EditSpec parse_edit_spec(const std::string& text) {
    EditSpec spec;
    auto colon = text.find(':');
    spec.kind = colon == std::string::npos ? text : text.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);

    if (spec.kind == "hue_rotate" || spec.kind == "saturation_scale") {
        spec.amount = to_number(rest, spec.kind);
    } else if (spec.kind == "noise_patch" || spec.kind == "channel_invert") {
        auto fields = split_fields(rest, ',');
        if (fields.size() != 5)
            throw ParseError(spec.kind + " expects row,col,h,w," +
                             (spec.kind == "noise_patch" ? std::string("sigma")
                                                         : std::string("channel")));
        spec.rect_row = static_cast<int>(to_number(fields[0], "rect row"));
        spec.rect_col = static_cast<int>(to_number(fields[1], "rect col"));
        spec.rect_h = static_cast<int>(to_number(fields[2], "rect height"));
        spec.rect_w = static_cast<int>(to_number(fields[3], "rect width"));
        if (spec.kind == "noise_patch")
            spec.amount = to_number(fields[4], "sigma");
        else
            spec.channel = static_cast<int>(to_number(fields[4], "channel"));
    } else if (spec.kind == "external") {
        if (rest.empty()) throw ParseError("external edit needs a command template");
        spec.command = rest;
    } else {
        throw ParseError("unknown edit kind: " + spec.kind);
    }
    return spec;
}

namespace {

void check_rect(const ImageFrame& img, const EditSpec& spec) {
    if (spec.rect_row < 0 || spec.rect_col < 0 || spec.rect_h <= 0 || spec.rect_w <= 0 ||
        spec.rect_row + spec.rect_h > img.height() || spec.rect_col + spec.rect_w > img.width())
        throw ValidationError("edit rect out of image bounds");
}

std::string substitute(const std::string& tmpl, const std::string& key, const std::string& value) {
    std::string out = tmpl;
    size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
        out.replace(pos, key.size(), value);
        pos += value.size();
    }
    return out;
}

ImageFrame run_external_edit(const ImageFrame& image, const EditSpec& spec) {
    if (spec.command.find("{in}") == std::string::npos ||
        spec.command.find("{out}") == std::string::npos)
        throw ValidationError("external edit command must reference {in} and {out}");
    const fs::path dir = fs::temp_directory_path();
    const uint64_t tag = fnv1a64(spec.command) ^ static_cast<uint64_t>(::getpid());
    const fs::path in_path = dir / ("advtex_edit_in_" + hex64(tag) + ".png");
    const fs::path out_path = dir / ("advtex_edit_out_" + hex64(tag) + ".png");
    write_png(image, in_path.string());

    std::string cmd = substitute(spec.command, "{in}", in_path.string());
    cmd = substitute(cmd, "{out}", out_path.string());
    const int rc = std::system(cmd.c_str());
    std::error_code ec;
    fs::remove(in_path, ec);
    if (rc != 0) {
        fs::remove(out_path, ec);
        throw IoError("external edit command failed with exit code " + std::to_string(rc));
    }
    ImageFrame edited = read_png(out_path.string());
    fs::remove(out_path, ec);
    return edited;
}

}  // namespace

ImageFrame apply_edit(const ImageFrame& image, const EditSpec& spec, SplitRng& rng) {
    if (spec.kind == "hue_rotate") {
        if (spec.amount == 0.0) return image;  // exact identity short-circuit
        ImageFrame out = image;
        for (int r = 0; r < out.height(); ++r)
            for (int c = 0; c < out.width(); ++c) {
                Hsv hsv = rgb_to_hsv(out.pixels.at(r, c, 0), out.pixels.at(r, c, 1),
                                     out.pixels.at(r, c, 2));
                double h = hsv.h + spec.amount;
                h -= 360.0 * std::floor(h / 360.0);
                auto rgb = hsv_to_rgb(h, hsv.s, hsv.v);
                for (int ch = 0; ch < 3; ++ch)
                    out.pixels.at(r, c, ch) = std::clamp(rgb[ch], 0.0, 1.0);
            }
        return out;
    }
    if (spec.kind == "saturation_scale") {
        if (spec.amount < 0.0) throw ValidationError("saturation factor must be >= 0");
        ImageFrame out = image;
        for (int r = 0; r < out.height(); ++r)
            for (int c = 0; c < out.width(); ++c) {
                Hsv hsv = rgb_to_hsv(out.pixels.at(r, c, 0), out.pixels.at(r, c, 1),
                                     out.pixels.at(r, c, 2));
                auto rgb = hsv_to_rgb(hsv.h, std::clamp(hsv.s * spec.amount, 0.0, 1.0), hsv.v);
                for (int ch = 0; ch < 3; ++ch)
                    out.pixels.at(r, c, ch) = std::clamp(rgb[ch], 0.0, 1.0);
            }
        return out;
    }
    if (spec.kind == "noise_patch") {
        check_rect(image, spec);
        if (spec.amount == 0.0) return image;
        ImageFrame out = image;
        for (int r = spec.rect_row; r < spec.rect_row + spec.rect_h; ++r)
            for (int c = spec.rect_col; c < spec.rect_col + spec.rect_w; ++c)
                for (int ch = 0; ch < 3; ++ch) {
                    double v = out.pixels.at(r, c, ch) + spec.amount * rng.next_normal();
                    out.pixels.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
                }
        return out;
    }
    if (spec.kind == "channel_invert") {
        check_rect(image, spec);
        if (spec.channel < 0 || spec.channel > 2)
            throw ValidationError("channel_invert channel must be 0..2");
        ImageFrame out = image;
        for (int r = spec.rect_row; r < spec.rect_row + spec.rect_h; ++r)
            for (int c = spec.rect_col; c < spec.rect_col + spec.rect_w; ++c)
                out.pixels.at(r, c, spec.channel) = 1.0 - out.pixels.at(r, c, spec.channel);
        return out;
    }
    if (spec.kind == "external") return run_external_edit(image, spec);
    throw ValidationError("unknown edit kind: " + spec.kind);
}

namespace {

std::vector<std::string> parse_csv_row(const std::string& line) {
    // Minimal CSV: fields separated by commas, double quotes guard commas.
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

LabelSession label_session(const std::vector<SourceImage>& images,
                           const std::string& labels_csv) {
    std::ifstream in(labels_csv);
    if (!in) throw IoError("cannot open labels file: " + labels_csv);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("labels file is empty: " + labels_csv);
    {
        auto header = parse_csv_row(line);
        if (header.size() < 4 || header[0] != "path" || header[1] != "score" ||
            header[2] != "annotator" || header[3] != "timestamp")
            throw ParseError("labels header must be path,score,annotator,timestamp");
    }

    std::map<std::string, LabelRecord> by_name;
    std::vector<std::string> conflicts;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = parse_csv_row(line);
        if (fields.size() < 4)
            throw ParseError(labels_csv + ":" + std::to_string(lineno) +
                             ": expected path,score,annotator,timestamp");
        LabelRecord rec;
        rec.path = fields[0];
        rec.score = to_number(fields[1], "score");
        rec.annotator = fields[2];
        rec.timestamp = fields[3];
        if (!(rec.score >= 0.0 && rec.score <= 1.0))
            throw ValidationError(labels_csv + ":" + std::to_string(lineno) +
                                  ": score must be in [0,1]");
        const std::string name = fs::path(rec.path).filename().string();
        auto it = by_name.find(name);
        if (it != by_name.end()) {
            if (it->second.score != rec.score)
                conflicts.push_back(name + " (" + std::to_string(it->second.score) + " vs " +
                                    std::to_string(rec.score) + ")");
            continue;  // identical duplicate rows collapse silently
        }
        by_name.emplace(name, std::move(rec));
    }
    if (!conflicts.empty()) {
        std::string msg = "conflicting labels:";
        for (const std::string& c : conflicts) msg += " " + c;
        throw ValidationError(msg);
    }

    LabelSession session;
    for (const SourceImage& img : images) {
        const std::string name = fs::path(img.path).filename().string();
        auto it = by_name.find(name);
        if (it == by_name.end())
            session.unlabeled.push_back(img.path);
        else
            session.labels.push_back(it->second);
    }
    return session;
}

int label_histogram_bin(double label) {
    const int bin = static_cast<int>(std::floor(label * 10.0));
    return std::clamp(bin, 0, 9);
}

void export_triplets(const std::vector<DatasetTriplet>& triplets, const std::string& out_jsonl,
                     const std::string& summary_json) {
    if (triplets.empty()) throw ValidationError("cannot export an empty labeled set");

    std::ofstream out(out_jsonl);
    if (!out) throw IoError("cannot write export file: " + out_jsonl);
    std::vector<int> histogram(10, 0);
    for (const DatasetTriplet& t : triplets) {
        if (!(t.label >= 0.0 && t.label <= 1.0))
            throw ValidationError("triplet label outside [0,1]: " + t.image_path);
        nlohmann::json rec = {
            {"prompt", t.prompt_text}, {"image", t.image_path},   {"label", t.label},
            {"edit_spec", t.edit_spec}, {"annotator", t.annotator},
        };
        out << rec.dump() << '\n';
        histogram[label_histogram_bin(t.label)] += 1;
    }
    if (!out) throw IoError("failed writing export file: " + out_jsonl);

    nlohmann::json summary = {
        {"count", triplets.size()},
        {"label_histogram", histogram},
    };
    std::ofstream sum(summary_json);
    if (!sum) throw IoError("cannot write summary file: " + summary_json);
    sum << summary.dump(2) << '\n';
}

std::vector<DatasetTriplet> import_triplets(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw IoError("cannot open export file: " + jsonl_path);
    std::vector<DatasetTriplet> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded())
            throw ParseError(jsonl_path + ":" + std::to_string(lineno) + ": malformed JSON line");
        DatasetTriplet t;
        t.prompt_text = rec.value("prompt", "");
        t.image_path = rec.value("image", "");
        t.label = rec.value("label", -1.0);
        t.edit_spec = rec.value("edit_spec", "");
        t.annotator = rec.value("annotator", "");
        if (!(t.label >= 0.0 && t.label <= 1.0))
            throw ValidationError(jsonl_path + ":" + std::to_string(lineno) +
                                  ": label outside [0,1]");
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace advtex
