// advtex: optimize billboard textures against a simulated driving policy,
// render rollouts, judge frames, build labeled datasets, evaluate judges.
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advtex/config.hpp"
#include "advtex/dataset.hpp"
#include "advtex/dynamics.hpp"
#include "advtex/errors.hpp"
#include "advtex/evaluation.hpp"
#include "advtex/hash.hpp"
#include "advtex/image_io.hpp"
#include "advtex/judge.hpp"
#include "advtex/loss.hpp"
#include "advtex/parallel.hpp"
#include "advtex/render.hpp"
#include "advtex/runio.hpp"
#include "advtex/vlm_judge.hpp"

namespace fs = std::filesystem;
using namespace advtex;

namespace {

// Collects every file a subcommand touched so --out can ship a manifest.
class ManifestCollector {
public:
    void input(const std::string& path) { add("input", path); }
    void output(const std::string& path) { add("output", path); }

    void write(const fs::path& out_dir) {
        const fs::path path = out_dir / "manifest.json";
        write_manifest(entries_, path.string());
    }

private:
    void add(const char* role, const std::string& path) {
        if (path.empty()) return;
        entries_.push_back({role, path, hex64(hash_file(path))});
    }

    std::vector<ManifestEntry> entries_;
};

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    int jobs = 1;
    bool dry_run = false;
};

void add_common(CLI::App* sub, CommonFlags& c, bool with_config = true) {
    if (with_config) sub->add_option("--config", c.config_path, "Config file (key = value sections)");
    sub->add_option("--out", c.out_dir, "Output directory; receives a manifest.json");
    sub->add_option("--seed", c.seed, "Override the run seed");
    sub->add_option("--jobs", c.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", c.dry_run, "Validate inputs without writing anything");
}

std::pair<SceneConfig, RunConfig> load_scene_run(const CommonFlags& c, const CLI::App* sub) {
    SceneConfig scene;
    RunConfig run;
    if (!c.config_path.empty()) {
        std::tie(scene, run) = load_config(c.config_path);
    } else {
        scene.validate();
        run.validate();
    }
    if (sub->count("--seed")) run.seed = c.seed;
    return {scene, run};
}

std::unique_ptr<JudgeBackend> make_judge(const JudgeSettings& settings) {
    if (settings.backend == "vlm") return make_vlm_judge(settings.vlm);
    return make_offline_judge(settings);
}

fs::path ensure_out_dir(const CommonFlags& c) {
    if (c.out_dir.empty()) throw ValidationError("--out directory is required");
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

Grid3 theta_from_checkpoint_or_reference(const std::string& checkpoint_path,
                                         const OptimizeEnv& env) {
    if (checkpoint_path.empty()) return env.theta_ref;
    Checkpoint ckpt = read_checkpoint(checkpoint_path);
    if (!ckpt.theta.same_shape(env.theta_ref))
        throw ValidationError("checkpoint texture shape does not match the scene texture");
    return std::move(ckpt.theta);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------- optimize

int cmd_optimize(const CommonFlags& c, const CLI::App* sub, const std::string& judge_flag,
                 int iterations_flag, const std::string& trajectory_path) {
    auto [scene, run] = load_scene_run(c, sub);
    if (sub->count("--judge")) run.judge.backend = judge_flag;
    if (sub->count("--iterations")) run.iterations = iterations_flag;
    run.validate();

    OptimizeEnv env = make_optimize_env(scene, run, c.jobs);
    std::unique_ptr<JudgeBackend> judge = make_judge(run.judge);

    if (c.dry_run) {
        std::printf("config ok: judge=%s iterations=%d seed=%" PRIu64 " texture=%dx%dx3\n",
                    judge->name().c_str(), run.iterations, run.seed, scene.texture_height,
                    scene.texture_width);
        return 0;
    }

    std::optional<fs::path> out;
    ManifestCollector manifest;
    if (!c.out_dir.empty()) {
        out = ensure_out_dir(c);
        manifest.input(c.config_path);
        manifest.input(scene.texture_png);
        manifest.input(scene.freeze_mask_png);
    }

    std::vector<std::string> checkpoint_files;
    CheckpointFn on_checkpoint;
    if (out) {
        on_checkpoint = [&](int iteration, const Grid3& theta) {
            char name[32];
            std::snprintf(name, sizeof(name), "checkpoint_%04d.bin", iteration);
            const fs::path path = *out / name;
            write_checkpoint(theta, env.freeze_mask, run.seed, iteration, path.string());
            checkpoint_files.push_back(path.string());
        };
    }

    OptimizeResult result = optimize(env, *judge, on_checkpoint);

    for (const LossReport& r : result.reports) {
        if (r.iteration % 10 == 0 || r.iteration == result.iterations_run)
            std::printf("iter %4d  J=%.6g  S=%.6g  cost=%.6g  subtlety=%.6g\n", r.iteration, r.J,
                        r.S, r.cost_sum, r.subtlety_penalty);
    }
    std::printf("finished after %d iterations%s; returned iterate %d\n", result.iterations_run,
                result.early_stopped ? " (early stop: realism floor)" : "",
                result.returned_iteration);

    if (out) {
        const fs::path metrics = *out / "metrics.csv";
        write_metrics_csv(result.reports, metrics.string());

        const fs::path texture_png = *out / "texture_final.png";
        Grid3 activated = texture_activation(result.theta);
        write_png(ImageFrame(std::move(activated)), texture_png.string());

        std::string trajectory_file;
        if (!trajectory_path.empty()) {
            RolloutResult rec = rollout(scene, result.theta, env.weights, false);
            trajectory_file = (fs::path(trajectory_path).is_absolute()
                                   ? fs::path(trajectory_path)
                                   : *out / trajectory_path)
                                  .string();
            write_trajectory_csv(rec.trajectory, rec.per_step_costs, trajectory_file);
        }

        manifest.output(metrics.string());
        manifest.output(texture_png.string());
        for (const std::string& f : checkpoint_files) {
            manifest.output(f);
            manifest.output(f + ".json");
        }
        if (!trajectory_file.empty()) manifest.output(trajectory_file);
        manifest.write(*out);
    } else if (!trajectory_path.empty()) {
        RolloutResult rec = rollout(scene, result.theta, env.weights, false);
        write_trajectory_csv(rec.trajectory, rec.per_step_costs, trajectory_path);
    }
    return 0;
}

// ------------------------------------------------------------ render-frames

int cmd_render_frames(const CommonFlags& c, const CLI::App* sub, const std::string& checkpoint,
                      const std::string& trajectory_path) {
    auto [scene, run] = load_scene_run(c, sub);
    OptimizeEnv env = make_optimize_env(scene, run, c.jobs);
    Grid3 theta = theta_from_checkpoint_or_reference(checkpoint, env);

    if (c.dry_run) {
        std::printf("config ok: %d frames of %dx%d\n", scene.horizon + 1, scene.image_width,
                    scene.image_height);
        return 0;
    }

    const fs::path out = ensure_out_dir(c);
    ManifestCollector manifest;
    manifest.input(c.config_path);
    manifest.input(checkpoint);
    manifest.input(scene.texture_png);
    manifest.input(scene.freeze_mask_png);

    RolloutResult rec = rollout(scene, theta, env.weights, false);
    for (size_t t = 0; t < rec.frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.png", t);
        const fs::path path = out / name;
        write_png(rec.frames[t], path.string());
        manifest.output(path.string());
    }

    if (!trajectory_path.empty()) {
        const fs::path path =
            fs::path(trajectory_path).is_absolute() ? fs::path(trajectory_path)
                                                    : out / trajectory_path;
        write_trajectory_csv(rec.trajectory, rec.per_step_costs, path.string());
        manifest.output(path.string());
    }
    manifest.write(out);
    std::printf("wrote %zu frames to %s\n", rec.frames.size(), out.string().c_str());
    return 0;
}

// -------------------------------------------------------------- judge-image

int cmd_judge_image(const CommonFlags& c, const CLI::App* sub, const std::string& backend,
                    const std::string& image_path, const std::string& reference_path) {
    auto [scene, run] = load_scene_run(c, sub);
    (void)scene;
    if (!backend.empty()) run.judge.backend = backend;
    run.judge.validate();

    const bool needs_reference = run.judge.backend == "hsv" || run.judge.backend == "rubric";
    if (needs_reference && reference_path.empty())
        throw ValidationError("--reference is required for backend '" + run.judge.backend + "'");

    std::unique_ptr<JudgeBackend> judge = make_judge(run.judge);
    ImageFrame image = read_png(image_path);
    std::optional<ImageFrame> reference;
    if (!reference_path.empty()) {
        reference.emplace(read_png(reference_path));
        if (!reference->pixels.same_shape(image.pixels))
            throw ValidationError("--image and --reference dimensions differ");
    }

    if (c.dry_run) {
        std::printf("config ok: backend=%s\n", judge->name().c_str());
        return 0;
    }

    JudgeContext ctx;
    ctx.reference = reference ? &*reference : nullptr;
    JudgeVerdict verdict = judge->judge_frame(image, ctx);
    std::printf("score: %.6f\n", verdict.score);
    if (!verdict.rationale.empty()) std::printf("rationale: %s\n", verdict.rationale.c_str());
    return 0;
}

// ------------------------------------------------------------ judge-rollout

int cmd_judge_rollout(const CommonFlags& c, const CLI::App* sub, const std::string& checkpoint,
                      const std::string& judge_flag, int stride_flag,
                      const std::string& trajectory_path) {
    auto [scene, run] = load_scene_run(c, sub);
    if (sub->count("--judge")) run.judge.backend = judge_flag;
    if (sub->count("--stride")) run.judge_stride = stride_flag;
    run.validate();

    OptimizeEnv env = make_optimize_env(scene, run, c.jobs);
    Grid3 theta = theta_from_checkpoint_or_reference(checkpoint, env);
    std::unique_ptr<JudgeBackend> judge = make_judge(run.judge);

    if (c.dry_run) {
        std::printf("config ok: judge=%s stride=%d\n", judge->name().c_str(), run.judge_stride);
        return 0;
    }

    RolloutResult rec = rollout(scene, theta, env.weights, false);
    std::vector<std::pair<int, double>> per_frame;
    const double aggregate = judge_rollout_scores(env, rec, *judge, &per_frame);

    std::printf("t,S_t\n");
    for (const auto& [t, s] : per_frame) std::printf("%d,%.17g\n", t, s);
    std::printf("S: %.17g\n", aggregate);

    if (!c.out_dir.empty()) {
        const fs::path out = ensure_out_dir(c);
        ManifestCollector manifest;
        manifest.input(c.config_path);
        manifest.input(checkpoint);

        const fs::path table = out / "per_frame_scores.csv";
        {
            std::ofstream f(table);
            if (!f) throw IoError("cannot write " + table.string());
            f << "t,S_t\n";
            char buf[64];
            for (const auto& [t, s] : per_frame) {
                std::snprintf(buf, sizeof(buf), "%d,%.17g\n", t, s);
                f << buf;
            }
        }
        manifest.output(table.string());

        std::string trajectory_file;
        if (!trajectory_path.empty()) {
            const fs::path path = fs::path(trajectory_path).is_absolute()
                                      ? fs::path(trajectory_path)
                                      : out / trajectory_path;
            write_trajectory_csv(rec.trajectory, rec.per_step_costs, path.string());
            manifest.output(path.string());
        }
        manifest.write(out);
    } else if (!trajectory_path.empty()) {
        write_trajectory_csv(rec.trajectory, rec.per_step_costs, trajectory_path);
    }
    return 0;
}

// ------------------------------------------------------------ dataset-ingest

int cmd_dataset_ingest(const CommonFlags& c, const std::string& dir) {
    IngestReport report = ingest_frames(dir);
    for (const std::string& skip : report.skipped)
        std::fprintf(stderr, "warning: skipped %s\n", skip.c_str());
    std::printf("ingested %zu images, skipped %zu\n", report.images.size(),
                report.skipped.size());

    if (c.dry_run || c.out_dir.empty()) return 0;

    const fs::path out = ensure_out_dir(c);
    ManifestCollector manifest;
    const fs::path sources = out / "sources.json";
    {
        std::ofstream f(sources);
        if (!f) throw IoError("cannot write " + sources.string());
        f << "[\n";
        for (size_t i = 0; i < report.images.size(); ++i) {
            const SourceImage& img = report.images[i];
            f << "  {\"path\": \"" << img.path << "\", \"width\": " << img.width
              << ", \"height\": " << img.height << ", \"fnv1a64\": \"" << hex64(img.content_hash)
              << "\"}" << (i + 1 < report.images.size() ? "," : "") << "\n";
        }
        f << "]\n";
    }
    for (const SourceImage& img : report.images) manifest.input(img.path);
    manifest.output(sources.string());
    manifest.write(out);
    return 0;
}

// -------------------------------------------------------------- dataset-edit

int cmd_dataset_edit(const CommonFlags& c, const std::string& dir,
                     const std::vector<std::string>& edit_texts) {
    std::vector<EditSpec> specs;
    specs.reserve(edit_texts.size());
    for (const std::string& text : edit_texts) specs.push_back(parse_edit_spec(text));
    if (specs.empty()) throw ValidationError("at least one --edit is required");

    IngestReport report = ingest_frames(dir);
    for (const std::string& skip : report.skipped)
        std::fprintf(stderr, "warning: skipped %s\n", skip.c_str());

    if (c.dry_run) {
        std::printf("config ok: %zu edits over %zu images\n", specs.size(),
                    report.images.size());
        return 0;
    }

    const fs::path out = ensure_out_dir(c);
    ManifestCollector manifest;
    manifest.input(c.config_path);

    std::vector<std::string> written(report.images.size());
    parallel_for(report.images.size(), c.jobs, [&](size_t i) {
        const SourceImage& src = report.images[i];
        const std::string filename = fs::path(src.path).filename().string();
        SplitRng rng = SplitRng(c.seed).split(filename);
        ImageFrame image = read_png(src.path);
        for (const EditSpec& spec : specs) image = apply_edit(image, spec, rng);
        const fs::path dst = out / filename;
        write_png(image, dst.string());
        written[i] = dst.string();
    });

    const fs::path edits_json = out / "edits.json";
    {
        std::ofstream f(edits_json);
        if (!f) throw IoError("cannot write " + edits_json.string());
        f << "{\n  \"seed\": " << c.seed << ",\n  \"edits\": [";
        for (size_t i = 0; i < specs.size(); ++i)
            f << (i ? ", " : "") << "\"" << specs[i].to_string() << "\"";
        f << "]\n}\n";
    }

    for (const SourceImage& img : report.images) manifest.input(img.path);
    for (const std::string& path : written) manifest.output(path);
    manifest.output(edits_json.string());
    manifest.write(out);
    std::printf("edited %zu images into %s\n", written.size(), out.string().c_str());
    return 0;
}

// ------------------------------------------------------------ dataset-export

int cmd_dataset_export(const CommonFlags& c, const std::string& dir, const std::string& labels_csv,
                       const std::string& prompt_path, const std::string& edits_json) {
    IngestReport report = ingest_frames(dir);
    LabelSession session = label_session(report.images, labels_csv);
    if (!session.unlabeled.empty()) {
        std::string detail = "unlabeled images present:";
        for (const std::string& p : session.unlabeled) detail += " " + p;
        throw ValidationError(detail);
    }

    const std::string prompt_text = read_text_file(prompt_path);
    std::string edit_spec;
    if (!edits_json.empty()) {
        // dataset-edit records one chain applied to every image.
        const std::string text = read_text_file(edits_json);
        const auto begin = text.find('[');
        const auto end = text.find(']');
        if (begin == std::string::npos || end == std::string::npos || end < begin)
            throw ParseError("malformed edits file: " + edits_json);
        std::string inner = text.substr(begin + 1, end - begin - 1);
        std::string chain;
        size_t pos = 0;
        while ((pos = inner.find('"', pos)) != std::string::npos) {
            const size_t close = inner.find('"', pos + 1);
            if (close == std::string::npos) break;
            if (!chain.empty()) chain += "; ";
            chain += inner.substr(pos + 1, close - pos - 1);
            pos = close + 1;
        }
        edit_spec = chain;
    }

    if (c.dry_run) {
        std::printf("config ok: %zu labeled images\n", session.labels.size());
        return 0;
    }

    const fs::path out = ensure_out_dir(c);

    std::vector<DatasetTriplet> triplets;
    triplets.reserve(session.labels.size());
    for (const LabelRecord& rec : session.labels) {
        const std::string filename = fs::path(rec.path).filename().string();
        const fs::path image_abs = fs::path(dir) / filename;
        if (!fs::exists(image_abs))
            throw ValidationError("labeled image missing at export time: " + image_abs.string());
        DatasetTriplet t;
        t.prompt_text = prompt_text;
        t.image_path = fs::relative(image_abs, out).string();
        t.label = rec.score;
        t.annotator = rec.annotator;
        t.edit_spec = edit_spec;
        triplets.push_back(std::move(t));
    }

    const fs::path jsonl = out / "triplets.jsonl";
    const fs::path summary = out / "summary.json";
    export_triplets(triplets, jsonl.string(), summary.string());

    ManifestCollector manifest;
    manifest.input(labels_csv);
    manifest.input(prompt_path);
    if (!edits_json.empty()) manifest.input(edits_json);
    for (const SourceImage& img : report.images) manifest.input(img.path);
    manifest.output(jsonl.string());
    manifest.output(summary.string());
    manifest.write(out);
    std::printf("exported %zu triplets to %s\n", triplets.size(), jsonl.string().c_str());
    return 0;
}

// ---------------------------------------------------------------- eval-judge

int cmd_eval_judge(const CommonFlags& c, const CLI::App* sub, const std::string& backend,
                   const std::string& images_dir, const std::string& labels_csv,
                   const std::string& reference_path, int repeats_flag) {
    auto [scene, run] = load_scene_run(c, sub);
    (void)scene;
    if (!backend.empty()) run.judge.backend = backend;
    run.judge.validate();

    const bool needs_reference = run.judge.backend == "hsv" || run.judge.backend == "rubric";
    if (needs_reference && reference_path.empty())
        throw ValidationError("--reference is required for backend '" + run.judge.backend + "'");

    IngestReport report = ingest_frames(images_dir);
    LabelSession session = label_session(report.images, labels_csv);
    if (session.labels.empty()) throw ValidationError("no labeled images to evaluate");
    for (const std::string& p : session.unlabeled)
        std::fprintf(stderr, "warning: unlabeled image excluded: %s\n", p.c_str());

    std::optional<ImageFrame> reference;
    if (!reference_path.empty()) reference.emplace(read_png(reference_path));

    std::vector<LabeledImage> items;
    items.reserve(session.labels.size());
    for (const LabelRecord& rec : session.labels) {
        const std::string filename = fs::path(rec.path).filename().string();
        LabeledImage item;
        item.path = (fs::path(images_dir) / filename).string();
        item.image = read_png(item.path);
        item.label = rec.score;
        item.reference = reference ? &*reference : nullptr;
        items.push_back(std::move(item));
    }

    std::unique_ptr<JudgeBackend> judge = make_judge(run.judge);
    const int repeats =
        sub->count("--repeats") ? repeats_flag : (run.judge.backend == "vlm" ? 3 : 1);

    if (c.dry_run) {
        std::printf("config ok: backend=%s images=%zu repeats=%d\n", judge->name().c_str(),
                    items.size(), repeats);
        return 0;
    }

    JudgeEvalReport eval = evaluate_judge(*judge, items, repeats, c.jobs);

    std::printf("%-40s %8s %12s %14s\n", "image", "label", "mean_score", "repeat_var");
    for (size_t i = 0; i < items.size(); ++i) {
        const std::string name = fs::path(items[i].path).filename().string();
        std::printf("%-40s %8.4f %12.6f %14.3e\n", name.c_str(), items[i].label,
                    eval.mean_scores[i], eval.repeat_variance[i]);
    }
    std::printf("mae: %.6f\n", eval.mae);
    if (eval.rank_defined)
        std::printf("spearman_rho: %.6f\n", eval.rank_correlation);
    else
        std::printf("spearman_rho: undefined (no variation)\n");
    std::printf("max_repeat_variance: %.6e\n", eval.max_repeat_variance);
    std::printf("n: %d  failures: %d\n", eval.n, eval.failures);

    if (!c.out_dir.empty()) {
        const fs::path out = ensure_out_dir(c);
        ManifestCollector manifest;
        manifest.input(labels_csv);
        manifest.input(reference_path);
        for (const LabeledImage& item : items) manifest.input(item.path);

        const fs::path report_json = out / "report.json";
        {
            std::ofstream f(report_json);
            if (!f) throw IoError("cannot write " + report_json.string());
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "{\n  \"mae\": %.17g,\n  \"spearman_rho\": %.17g,\n"
                          "  \"rank_defined\": %s,\n  \"max_repeat_variance\": %.17g,\n"
                          "  \"n\": %d,\n  \"failures\": %d\n}\n",
                          eval.mae, eval.rank_correlation, eval.rank_defined ? "true" : "false",
                          eval.max_repeat_variance, eval.n, eval.failures);
            f << buf;
        }

        const fs::path detail = out / "per_image.csv";
        {
            std::ofstream f(detail);
            if (!f) throw IoError("cannot write " + detail.string());
            f << "path,label,mean_score,repeat_variance\n";
            char buf[512];
            for (size_t i = 0; i < items.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n",
                              items[i].path.c_str(), items[i].label, eval.mean_scores[i],
                              eval.repeat_variance[i]);
                f << buf;
            }
        }
        manifest.output(report_json.string());
        manifest.output(detail.string());
        manifest.write(out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Realism-regularized adversarial texture toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    // optimize
    CommonFlags opt_c;
    std::string opt_judge;
    int opt_iterations = 0;
    std::string opt_trajectory;
    CLI::App* opt = app.add_subcommand("optimize", "Optimize the billboard texture");
    add_common(opt, opt_c);
    opt->add_option("--judge", opt_judge, "Judge backend: hsv | rubric | const | vlm | none");
    opt->add_option("--iterations", opt_iterations, "Override iteration count")
        ->check(CLI::PositiveNumber);
    opt->add_option("--dump-trajectory", opt_trajectory, "Write the final rollout as CSV");

    // render-frames
    CommonFlags rf_c;
    std::string rf_checkpoint, rf_trajectory;
    CLI::App* rf = app.add_subcommand("render-frames", "Render a rollout as numbered PNGs");
    add_common(rf, rf_c);
    rf->add_option("--checkpoint", rf_checkpoint, "Render this checkpoint's texture");
    rf->add_option("--dump-trajectory", rf_trajectory, "Write the rollout as CSV");

    // judge-image
    CommonFlags ji_c;
    std::string ji_backend, ji_image, ji_reference;
    CLI::App* ji = app.add_subcommand("judge-image", "Score one image");
    add_common(ji, ji_c);
    ji->add_option("--backend", ji_backend, "Judge backend")->required();
    ji->add_option("--image", ji_image, "Image to score")->required();
    ji->add_option("--reference", ji_reference, "Reference image (hsv/rubric backends)");

    // judge-rollout
    CommonFlags jr_c;
    std::string jr_checkpoint, jr_judge, jr_trajectory;
    int jr_stride = 0;
    CLI::App* jr = app.add_subcommand("judge-rollout", "Judge a rollout at the frame stride");
    add_common(jr, jr_c);
    jr->add_option("--checkpoint", jr_checkpoint, "Roll out this checkpoint's texture");
    jr->add_option("--judge", jr_judge, "Judge backend");
    jr->add_option("--stride", jr_stride, "Frame stride")->check(CLI::PositiveNumber);
    jr->add_option("--dump-trajectory", jr_trajectory, "Write the rollout as CSV");

    // dataset-ingest
    CommonFlags di_c;
    std::string di_dir;
    CLI::App* di = app.add_subcommand("dataset-ingest", "Enumerate and validate source images");
    add_common(di, di_c, false);
    di->add_option("--dir", di_dir, "Directory of PNG frames")->required();

    // dataset-edit
    CommonFlags de_c;
    std::string de_dir;
    std::vector<std::string> de_edits;
    CLI::App* de = app.add_subcommand("dataset-edit", "Apply texture edits to every image");
    add_common(de, de_c, false);
    de->add_option("--dir", de_dir, "Directory of PNG frames")->required();
    de->add_option("--edit", de_edits,
                   "Edit spec, repeatable: hue_rotate:D | saturation_scale:F | "
                   "noise_patch:r,c,h,w,sigma | channel_invert:r,c,h,w,ch | external:CMD");

    // dataset-export
    CommonFlags dx_c;
    std::string dx_dir, dx_labels, dx_prompt, dx_edits;
    CLI::App* dx = app.add_subcommand("dataset-export", "Export labeled triplets as JSONL");
    add_common(dx, dx_c, false);
    dx->add_option("--dir", dx_dir, "Directory of edited PNG frames")->required();
    dx->add_option("--labels", dx_labels, "Labels CSV (path,score,annotator,timestamp)")
        ->required();
    dx->add_option("--prompt", dx_prompt, "Prompt template file")->required();
    dx->add_option("--edits", dx_edits, "edits.json from dataset-edit");

    // eval-judge
    CommonFlags ej_c;
    std::string ej_backend, ej_images, ej_labels, ej_reference;
    int ej_repeats = 0;
    CLI::App* ej = app.add_subcommand("eval-judge", "Score a judge against labeled images");
    add_common(ej, ej_c);
    ej->add_option("--backend", ej_backend, "Judge backend")->required();
    ej->add_option("--images", ej_images, "Directory of labeled PNG images")->required();
    ej->add_option("--labels", ej_labels, "Labels CSV")->required();
    ej->add_option("--reference", ej_reference, "Reference image (hsv/rubric backends)");
    ej->add_option("--repeats", ej_repeats, "Scoring repeats per image")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (opt->parsed())
            return cmd_optimize(opt_c, opt, opt_judge, opt_iterations, opt_trajectory);
        if (rf->parsed()) return cmd_render_frames(rf_c, rf, rf_checkpoint, rf_trajectory);
        if (ji->parsed()) return cmd_judge_image(ji_c, ji, ji_backend, ji_image, ji_reference);
        if (jr->parsed())
            return cmd_judge_rollout(jr_c, jr, jr_checkpoint, jr_judge, jr_stride, jr_trajectory);
        if (di->parsed()) return cmd_dataset_ingest(di_c, di_dir);
        if (de->parsed()) return cmd_dataset_edit(de_c, de_dir, de_edits);
        if (dx->parsed()) return cmd_dataset_export(dx_c, dx_dir, dx_labels, dx_prompt, dx_edits);
        if (ej->parsed())
            return cmd_eval_judge(ej_c, ej, ej_backend, ej_images, ej_labels, ej_reference,
                                  ej_repeats);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.category().c_str(), e.what());
        return (e.category() == "validation" || e.category() == "parse") ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: runtime: %s\n", e.what());
        return 2;
    }
    return 0;
}
