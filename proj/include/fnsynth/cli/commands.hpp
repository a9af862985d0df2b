#pragma once

// Batch commands behind the fnsynth executable. Each returns a process exit
// code (0 ok, 1 some file failed) and writes machine output to files only.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fnsynth/core/random.hpp"
#include "fnsynth/core/resample.hpp"
#include "fnsynth/diffusion/plugin.hpp"
#include "fnsynth/diffusion/sampler.hpp"
#include "fnsynth/diffusion/schedule.hpp"
#include "fnsynth/eval/dice.hpp"
#include "fnsynth/eval/stats.hpp"
#include "fnsynth/io/nifti.hpp"
#include "fnsynth/labels/label_prep.hpp"
#include "fnsynth/pathology/synthesis.hpp"

namespace fnsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Tool-wide settings, loadable from one JSON file. Missing keys keep defaults.
struct Config {
    pathology::SynthesisConfig synthesis;
    diffusion::ScheduleConfig schedule;
    labels::ClassMap class_map = labels::ClassMap::standard();
    Dims target_dims{160, 160, 160};
    std::int64_t crop_margin = 2;
    std::size_t min_component_size = 20;
    int cleanup_connectivity = 6;

    json to_json() const {
        return {{"synthesis", pathology::to_json(synthesis)},
                {"schedule", schedule.to_json()},
                {"class_map", class_map.to_json()},
                {"prepare",
                 {{"target_dims", target_dims},
                  {"crop_margin", crop_margin},
                  {"min_component_size", min_component_size},
                  {"cleanup_connectivity", cleanup_connectivity}}}};
    }

    static Config from_json(const json& j) {
        Config c;
        try {
            if (j.contains("synthesis")) c.synthesis = pathology::synthesis_config_from_json(j.at("synthesis"));
            if (j.contains("schedule")) c.schedule = diffusion::ScheduleConfig::from_json(j.at("schedule"));
            if (j.contains("class_map")) c.class_map = labels::ClassMap::from_json(j.at("class_map"));
            if (j.contains("prepare")) {
                const auto& p = j.at("prepare");
                c.target_dims = p.value("target_dims", c.target_dims);
                c.crop_margin = p.value("crop_margin", c.crop_margin);
                c.min_component_size = p.value("min_component_size", c.min_component_size);
                c.cleanup_connectivity = p.value("cleanup_connectivity", c.cleanup_connectivity);
            }
        } catch (const json::exception& e) {
            throw FormatError(std::string("config: ") + e.what());
        }
        for (auto d : c.target_dims)
            if (d < 1) throw ArgumentError("config: target_dims must be positive");
        if (c.crop_margin < 0) throw ArgumentError("config: crop_margin must be >= 0");
        if (c.cleanup_connectivity != 6 && c.cleanup_connectivity != 26)
            throw ArgumentError("config: cleanup_connectivity must be 6 or 26");
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config " + path);
        try {
            return from_json(json::parse(in));
        } catch (const json::parse_error& e) {
            throw FormatError("config " + path + ": " + e.what());
        }
    }
};

/// Serialised stderr logging shared by worker threads.
class Log {
public:
    static void info(const std::string& msg) { write("info", msg); }
    static void error(const std::string& msg) { write("error", msg); }
    static void set_quiet(bool q) { quiet() = q; }

private:
    static bool& quiet() {
        static bool q = false;
        return q;
    }
    static void write(const char* level, const std::string& msg) {
        static std::mutex m;
        if (quiet() && std::string(level) == "info") return;
        std::lock_guard lock(m);
        std::cerr << "fnsynth: " << level << ": " << msg << '\n';
    }
};

// ---------------------------------------------------------------- helpers

inline bool is_nifti(const fs::path& p) {
    const auto name = p.filename().string();
    return name.ends_with(".nii") || name.ends_with(".nii.gz");
}

inline std::string nifti_stem(const fs::path& p) {
    auto name = p.filename().string();
    for (const char* ext : {".nii.gz", ".nii"})
        if (name.ends_with(ext)) return name.substr(0, name.size() - std::strlen(ext));
    return name;
}

/// NIfTI files in `dir` whose stem ends with `suffix`, sorted by name.
inline std::vector<fs::path> list_volumes(const fs::path& dir, const std::string& suffix = "") {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_nifti(e.path()) && nifti_stem(e.path()).ends_with(suffix)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string strip_suffix(const std::string& s, const std::string& suffix) {
    return s.ends_with(suffix) ? s.substr(0, s.size() - suffix.size()) : s;
}

/// Finds `<dir>/<stem>.nii.gz` or `.nii`.
inline std::optional<fs::path> find_volume(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".nii.gz", ".nii"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Runs job(i) for i in [0, n) on up to `jobs` threads. Jobs must write only
/// to their own slot; ordering of side effects never affects outputs.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& job) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) job(i);
        });
}

struct SubjectResult {
    json entry = json::object();
    bool ok = true;
};

/// Wraps one subject's work: exceptions become a failed manifest entry.
inline void run_subject(SubjectResult& r, const std::string& id, const std::function<void(json&)>& work) {
    r.entry["subject"] = id;
    try {
        work(r.entry);
        r.entry["status"] = "ok";
        Log::info(id + ": ok");
    } catch (const std::exception& e) {
        r.ok = false;
        r.entry["status"] = "failed";
        r.entry["error"] = e.what();
        Log::error(id + ": " + e.what());
    }
}

inline json manifest_header(const std::string& command, const Config& cfg) {
    return {{"tool", "fnsynth"}, {"version", kToolVersion}, {"command", command}, {"config", cfg.to_json()}};
}

inline int finish(json manifest, const std::vector<SubjectResult>& results, const fs::path& out_dir) {
    json subjects = json::array();
    bool ok = true;
    for (const auto& r : results) {
        subjects.push_back(r.entry);
        ok = ok && r.ok;
    }
    manifest["subjects"] = subjects;
    write_json(out_dir / "manifest.json", manifest);
    return ok ? 0 : 1;
}

inline void require_inputs(const std::vector<fs::path>& files, const fs::path& dir, const std::string& what) {
    if (files.empty()) throw IoError("no " + what + " found in " + dir.string());
}

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
    fs::path in_dir, out_dir;
    Config config;
    int jobs = 1;
};

/// Per subject `<id>_dseg.nii[.gz]` (plus optional `<id>_T2w.nii[.gz]`):
/// cleanup, crop to foreground, resize to the target grid (cleaning again, since
/// nearest resizing can leave slivers), normalize the image to [-1, 1], remap
/// to the 4 training classes. Writes `<id>_dseg` (cleaned,
/// full vocabulary), `<id>_classes`, `<id>_T2w` and `<id>_crop.json`. Inputs
/// already on the target grid are not cropped or resized.
inline int cmd_prepare(const PrepareOptions& o) {
    const auto files = list_volumes(o.in_dir, "_dseg");
    require_inputs(files, o.in_dir, "*_dseg label volumes");
    fs::create_directories(o.out_dir);
    const Config& cfg = o.config;
    std::vector<SubjectResult> results(files.size());
    parallel_for(files.size(), o.jobs, [&](std::size_t i) {
        const std::string id = strip_suffix(nifti_stem(files[i]), "_dseg");
        run_subject(results[i], id, [&](json& e) {
            const LabelVolume raw = io::read_label_volume(files[i].string());
            std::optional<IntensityVolume> image;
            if (auto img = find_volume(o.in_dir, id + "_T2w")) {
                image = io::read_intensity_volume(img->string());
                e["image"] = img->filename().string();
            }
            e["labels"] = files[i].filename().string();
            const LabelVolume clean = labels::clean_small_components(raw, cfg.min_component_size, cfg.cleanup_connectivity);

            LabelVolume lab;
            std::optional<IntensityVolume> img;
            CropRecord record;
            if (raw.dims() == cfg.target_dims) {
                lab = clean;
                img = image;
                record.original_dims = record.cropped_dims = record.target_dims = raw.dims();
                record.original_spacing = raw.geometry().spacing;
                record.original_affine = raw.geometry().affine;
            } else {
                auto cropped = crop_to_foreground(clean, cfg.crop_margin, image ? &*image : nullptr);
                record = cropped.record;
                record.target_dims = cfg.target_dims;
                lab = labels::clean_small_components(resize(cropped.labels, cfg.target_dims, Interpolation::Nearest),
                                                     cfg.min_component_size, cfg.cleanup_connectivity);
                if (cropped.image) img = resize(*cropped.image, cfg.target_dims, Interpolation::Trilinear);
            }
            const std::string base = (o.out_dir / id).string();
            if (img) {
                auto [norm, range] = normalize_intensity(*img);
                record.intensity = range;
                io::write_volume(norm, base + "_T2w.nii.gz");
            }
            io::write_volume(lab, base + "_dseg.nii.gz");
            io::write_volume(labels::remap_classes(lab, cfg.class_map), base + "_classes.nii.gz");
            write_json(base + "_crop.json", record.to_json());
            e["outputs"] = {id + "_dseg.nii.gz", id + "_classes.nii.gz", id + "_crop.json"};
            if (img) e["outputs"].push_back(id + "_T2w.nii.gz");
        });
    });
    json m = manifest_header("prepare", cfg);
    m["input_dir"] = o.in_dir.string();
    return finish(std::move(m), results, o.out_dir);
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
    fs::path in_dir, out_dir;
    int count = 6;
    std::uint64_t seed = 0;
    pathology::PlanOverrides overrides;
    Config config;
    int jobs = 1;
};

/// For every prepared `<id>_dseg` volume, samples `count` plans with seeds
/// derive_seed(derive_seed(seed, id), k) and applies them. Writes
/// `<id>_syn<k>_dseg`, `<id>_syn<k>_classes`, `<id>_syn<k>_plan.json` and,
/// when the subject has one, a copy of its crop record.
inline int cmd_generate(const GenerateOptions& o) {
    if (o.count < 0) throw ArgumentError("--count must be >= 0");
    const auto files = list_volumes(o.in_dir, "_dseg");
    require_inputs(files, o.in_dir, "*_dseg label volumes");
    fs::create_directories(o.out_dir);
    const Config& cfg = o.config;
    std::vector<SubjectResult> results(files.size());
    parallel_for(files.size(), o.jobs, [&](std::size_t i) {
        const std::string id = strip_suffix(nifti_stem(files[i]), "_dseg");
        const std::uint64_t subject_seed = derive_seed(o.seed, id);
        run_subject(results[i], id, [&](json& e) {
            e["seed"] = subject_seed;
            e["labels"] = files[i].filename().string();
            const LabelVolume lab = io::read_label_volume(files[i].string());
            const fs::path record = o.in_dir / (id + "_crop.json");
            json variants = json::array();
            bool all_pass = true;
            for (int k = 0; k < o.count; ++k) {
                const std::uint64_t s = derive_seed(subject_seed, static_cast<std::uint64_t>(k));
                const auto plan = pathology::sample_plan(s, o.overrides);
                auto [out, report] = pathology::apply_plan(lab, plan, cfg.synthesis);
                const std::string name = id + "_syn" + std::to_string(k);
                const std::string base = (o.out_dir / name).string();
                io::write_volume(out, base + "_dseg.nii.gz");
                io::write_volume(labels::remap_classes(out, cfg.class_map), base + "_classes.nii.gz");
                const json pj = {{"plan", plan.to_json()}, {"report", report.to_json()}};
                write_json(base + "_plan.json", pj);
                if (fs::exists(record)) fs::copy_file(record, base + "_crop.json", fs::copy_options::overwrite_existing);
                all_pass = all_pass && report.all_checks_pass();
                variants.push_back({{"name", name},
                                    {"seed", s},
                                    {"pathologies", pj["plan"]["pathologies"]},
                                    {"checks_pass", report.all_checks_pass()},
                                    {"plan_file", name + "_plan.json"}});
            }
            e["variants"] = variants;
            if (!all_pass) throw Error("constraint check failed for at least one variant");
        });
    });
    json m = manifest_header("generate", cfg);
    m["input_dir"] = o.in_dir.string();
    m["seed"] = o.seed;
    m["count"] = o.count;
    return finish(std::move(m), results, o.out_dir);
}

// ---------------------------------------------------------------- sample

struct SampleOptions {
    fs::path in_dir, out_dir;
    /// "zero", "oracle" (needs `<id>_T2w` next to the labels) or a plugin executable path.
    std::string denoiser = "zero";
    std::vector<std::string> plugin_args;
    diffusion::VarianceMode variance = diffusion::VarianceMode::Stochastic;
    std::uint64_t seed = 0;
    Config config;
    int jobs = 1;
};

/// Runs the sampler on every `<id>_classes` volume. Writes `<id>_synth_T2w`
/// in normalized space and, when `<id>_crop.json` exists, `<id>_synth_T2w_native`
/// denormalized and reverted to the original grid.
inline int cmd_sample(const SampleOptions& o) {
    const auto files = list_volumes(o.in_dir, "_classes");
    require_inputs(files, o.in_dir, "*_classes label volumes");
    const bool builtin = o.denoiser == "zero" || o.denoiser == "oracle";
    if (!builtin && ::access(o.denoiser.c_str(), X_OK) != 0)
        throw PluginError("denoiser plugin '" + o.denoiser + "' not found or not executable");
    fs::create_directories(o.out_dir);
    const Config& cfg = o.config;
    const auto sched = cfg.schedule.build();
    std::vector<SubjectResult> results(files.size());
    parallel_for(files.size(), o.jobs, [&](std::size_t i) {
        const std::string id = strip_suffix(nifti_stem(files[i]), "_classes");
        const std::uint64_t seed = derive_seed(o.seed, id);
        run_subject(results[i], id, [&](json& e) {
            e["seed"] = seed;
            e["labels"] = files[i].filename().string();
            const LabelVolume lab = io::read_label_volume(files[i].string());
            const auto cond = diffusion::one_hot_condition(lab);
            std::unique_ptr<diffusion::Denoiser> den;
            if (o.denoiser == "zero") {
                den = std::make_unique<diffusion::ZeroDenoiser>();
            } else if (o.denoiser == "oracle") {
                auto target = find_volume(o.in_dir, id + "_T2w");
                if (!target) throw IoError("oracle denoiser needs " + id + "_T2w next to the labels");
                den = std::make_unique<diffusion::OracleDenoiser>(io::read_intensity_volume(target->string()), sched);
            } else {
                den = std::make_unique<diffusion::PluginDenoiser>(o.denoiser, o.plugin_args);
            }
            Rng rng(seed);
            const IntensityVolume x = diffusion::ddpm_sample(*den, cond, sched, rng, o.variance);
            const std::string base = (o.out_dir / id).string();
            io::write_volume(x, base + "_synth_T2w.nii.gz");
            e["outputs"] = {id + "_synth_T2w.nii.gz"};
            const fs::path rec = o.in_dir / (id + "_crop.json");
            if (fs::exists(rec)) {
                const auto record = CropRecord::from_json(read_json(rec));
                IntensityVolume native = record.intensity ? denormalize_intensity(x, *record.intensity) : x;
                io::write_volume(revert_geometry(native, record), base + "_synth_T2w_native.nii.gz");
                e["outputs"].push_back(id + "_synth_T2w_native.nii.gz");
            }
        });
    });
    json m = manifest_header("sample", cfg);
    m["input_dir"] = o.in_dir.string();
    m["seed"] = o.seed;
    m["denoiser"] = builtin ? o.denoiser : "plugin:" + fs::path(o.denoiser).filename().string();
    m["variance"] = o.variance == diffusion::VarianceMode::Stochastic ? "stochastic" : "zero";
    return finish(std::move(m), results, o.out_dir);
}

// ---------------------------------------------------------------- revert

struct RevertOptions {
    fs::path in_dir, out_dir;
    int jobs = 1;
};

/// Undoes prepare for every volume that has a crop record `<p>_crop.json`
/// where `<p>_` prefixes the volume name. Volumes with a label sidecar are
/// reverted as labels; others as intensities (denormalized when the record
/// holds an intensity range).
inline int cmd_revert(const RevertOptions& o) {
    auto files = list_volumes(o.in_dir);
    std::vector<std::string> prefixes;
    for (const auto& e : fs::directory_iterator(o.in_dir)) {
        const auto name = e.path().filename().string();
        if (name.ends_with("_crop.json")) prefixes.push_back(strip_suffix(name, "_crop.json"));
    }
    auto record_for = [&](const std::string& stem) -> std::optional<std::string> {
        std::optional<std::string> best;
        for (const auto& p : prefixes)
            if (stem.starts_with(p + "_") && (!best || p.size() > best->size())) best = p;
        return best;
    };
    std::erase_if(files, [&](const fs::path& f) { return !record_for(nifti_stem(f)); });
    require_inputs(files, o.in_dir, "volumes with crop records");
    fs::create_directories(o.out_dir);
    std::vector<SubjectResult> results(files.size());
    parallel_for(files.size(), o.jobs, [&](std::size_t i) {
        const std::string stem = nifti_stem(files[i]);
        run_subject(results[i], stem, [&](json& e) {
            const std::string rec_name = *record_for(stem) + "_crop.json";
            const auto record = CropRecord::from_json(read_json(o.in_dir / rec_name));
            e["record"] = rec_name;
            const std::string out = (o.out_dir / (stem + ".nii.gz")).string();
            if (fs::exists(io::sidecar_path(files[i].string()))) {
                io::write_volume(revert_geometry(io::read_label_volume(files[i].string()), record), out);
                e["kind"] = "label";
            } else {
                IntensityVolume img = io::read_intensity_volume(files[i].string());
                if (record.intensity) img = denormalize_intensity(img, *record.intensity);
                io::write_volume(revert_geometry(img, record), out);
                e["kind"] = "intensity";
            }
            e["outputs"] = {stem + ".nii.gz"};
        });
    });
    json m = {{"tool", "fnsynth"}, {"version", kToolVersion}, {"command", "revert"}, {"input_dir", o.in_dir.string()}};
    return finish(std::move(m), results, o.out_dir);
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    fs::path pred_dir, truth_dir, out_dir;
    /// Codes to score; empty = every non-background code of the first truth vocabulary.
    std::vector<label_t> labels;
    int jobs = 1;
};

/// Per-label Dice for every truth volume with a same-named prediction.
/// Writes dice.json, dice.txt and dice.csv.
inline int cmd_eval(const EvalOptions& o) {
    const auto truths = list_volumes(o.truth_dir);
    require_inputs(truths, o.truth_dir, "truth volumes");
    for (const auto& t : truths)
        if (!fs::exists(o.pred_dir / t.filename())) throw IoError("no prediction for " + t.filename().string());
    for (const auto& p : list_volumes(o.pred_dir))
        if (!fs::exists(o.truth_dir / p.filename())) throw IoError("no truth for prediction " + p.filename().string());

    std::vector<label_t> codes = o.labels;
    std::vector<std::string> names;
    {
        const auto first = io::read_label_volume(truths.front().string());
        const auto& v = first.vocabulary();
        if (codes.empty())
            for (const auto& [c, info] : v.entries())
                if (c != v.background_code()) codes.push_back(c);
        for (auto c : codes) names.push_back(v.contains(c) ? v.info(c).to_string() : std::to_string(c));
    }
    if (codes.empty()) throw ArgumentError("eval: no labels to score");

    std::vector<std::vector<double>> scores(truths.size());
    std::vector<std::string> subjects(truths.size());
    std::vector<std::string> errors(truths.size());
    parallel_for(truths.size(), o.jobs, [&](std::size_t i) {
        subjects[i] = nifti_stem(truths[i]);
        try {
            const auto truth = io::read_label_volume(truths[i].string());
            const auto pred = io::read_label_volume((o.pred_dir / truths[i].filename()).string());
            scores[i] = eval::per_label_dice(pred, truth, codes);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            Log::error(subjects[i] + ": " + e.what());
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) return 1;
    const auto report = eval::summarize(scores, names, subjects);
    fs::create_directories(o.out_dir);
    write_json(o.out_dir / "dice.json", report.to_json());
    std::ofstream(o.out_dir / "dice.txt") << report.to_text();
    std::ofstream(o.out_dir / "dice.csv") << report.to_csv();
    Log::info("mean of per-label medians: " + std::to_string(report.summary));
    return 0;
}

// ---------------------------------------------------------------- raters

/// Rater means (and Welch tests) for a rater table; writes `out` as JSON.
inline int cmd_raters(const fs::path& table, const fs::path& out) {
    const auto t = eval::load_rater_table(table.string());
    const auto report = eval::rater_report(t);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_json(out, report);
    for (const auto& r : report["raters"])
        Log::info(r["rater"].get<std::string>() + " " + r["arm"].get<std::string>() + ": " +
                  std::to_string(r["mean"].get<double>()));
    return 0;
}

} // namespace fnsynth::cli
