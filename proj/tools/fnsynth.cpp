// fnsynth: label preparation, pathology synthesis, conditional sampling and evaluation.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fnsynth/cli/commands.hpp"

using namespace fnsynth;

namespace {

cli::Config load_config(const std::string& path) { return path.empty() ? cli::Config{} : cli::Config::load(path); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fetal brain label preparation, pathology synthesis and evaluation"};
    app.set_version_flag("--version", cli::kToolVersion);
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 1;
    std::uint64_t seed = 0;
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only log errors");

    auto add_jobs = [&](CLI::App* sub) { sub->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber); };
    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile); };

    std::string in_dir, out_dir, pred_dir, truth_dir, table, out_file;

    auto* prepare = app.add_subcommand("prepare", "Clean, crop, resize and normalize *_dseg volumes (+ *_T2w images)");
    prepare->add_option("input", in_dir, "Input directory")->required()->check(CLI::ExistingDirectory);
    prepare->add_option("output", out_dir, "Output directory")->required();
    add_jobs(prepare);
    add_config(prepare);

    int count = 6;
    std::vector<std::string> override_pathology;
    std::optional<double> severity;
    auto* generate = app.add_subcommand("generate", "Sample pathology plans and apply them to prepared labels");
    generate->add_option("input", in_dir, "Prepared label directory")->required()->check(CLI::ExistingDirectory);
    generate->add_option("output", out_dir, "Output directory")->required();
    generate->add_option("--count,-n", count, "Variants per subject")->check(CLI::NonNegativeNumber);
    generate->add_option("--seed", seed, "Master seed");
    generate->add_option("--override-pathology", override_pathology, "Force this pathology set (vm, ch, pch, mc)")
        ->delimiter(',');
    generate->add_option("--severity", severity, "Force every severity")->check(CLI::Range(0.0, 1.0));
    add_jobs(generate);
    add_config(generate);

    std::string denoiser = "zero";
    std::vector<std::string> plugin_args;
    bool zero_variance = false;
    std::optional<int> timesteps;
    auto* sample = app.add_subcommand("sample", "Run the conditional sampler on prepared 4-class labels");
    sample->add_option("input", in_dir, "Directory with *_classes volumes")->required()->check(CLI::ExistingDirectory);
    sample->add_option("output", out_dir, "Output directory")->required();
    sample->add_option("--denoiser", denoiser, "zero | oracle | path to a plugin executable");
    sample->add_option("--plugin-arg", plugin_args, "Extra argument passed to the plugin");
    sample->add_flag("--zero-variance", zero_variance, "Deterministic updates (sigma_t = 0)");
    sample->add_option("--timesteps,-T", timesteps, "Override the schedule length")->check(CLI::PositiveNumber);
    sample->add_option("--seed", seed, "Master seed");
    add_jobs(sample);
    add_config(sample);

    auto* revert = app.add_subcommand("revert", "Map prepared or generated volumes back to the original grid");
    revert->add_option("input", in_dir, "Directory with volumes and *_crop.json records")->required()->check(CLI::ExistingDirectory);
    revert->add_option("output", out_dir, "Output directory")->required();
    add_jobs(revert);

    std::vector<int> eval_labels;
    auto* eval = app.add_subcommand("eval", "Per-label Dice, per-label medians and their mean");
    eval->add_option("predictions", pred_dir, "Prediction directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("truth", truth_dir, "Reference directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("output", out_dir, "Report directory")->required();
    eval->add_option("--labels", eval_labels, "Label codes to score")->delimiter(',')->check(CLI::Range(0, 65535));
    add_jobs(eval);

    auto* raters = app.add_subcommand("raters", "Rater score means and Welch t-tests");
    raters->add_option("table", table, "CSV: rater,arm,s0..s3 or case,arm,rater,score")->required()->check(CLI::ExistingFile);
    raters->add_option("output", out_file, "Report JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    cli::Log::set_quiet(quiet);

    try {
        if (*prepare) return cli::cmd_prepare({in_dir, out_dir, load_config(config_path), jobs});
        if (*generate) {
            cli::GenerateOptions o{in_dir, out_dir, count, seed, {}, load_config(config_path), jobs};
            if (!override_pathology.empty()) {
                std::vector<pathology::Pathology> ps;
                for (const auto& p : override_pathology) ps.push_back(pathology::parse_pathology(p));
                pathology::make_plan(ps);
                o.overrides.pathologies = ps;
            }
            o.overrides.severity = severity;
            return cli::cmd_generate(o);
        }
        if (*sample) {
            cli::SampleOptions o;
            o.in_dir = in_dir;
            o.out_dir = out_dir;
            o.denoiser = denoiser;
            o.plugin_args = plugin_args;
            o.variance = zero_variance ? diffusion::VarianceMode::Zero : diffusion::VarianceMode::Stochastic;
            o.seed = seed;
            o.config = load_config(config_path);
            if (timesteps) o.config.schedule.timesteps = *timesteps;
            o.jobs = jobs;
            return cli::cmd_sample(o);
        }
        if (*revert) return cli::cmd_revert({in_dir, out_dir, jobs});
        if (*eval) {
            std::vector<label_t> codes(eval_labels.begin(), eval_labels.end());
            return cli::cmd_eval({pred_dir, truth_dir, out_dir, codes, jobs});
        }
        if (*raters) return cli::cmd_raters(table, out_file);
    } catch (const ArgumentError& e) {
        cli::Log::error(e.what());
        return 2;
    } catch (const std::exception& e) {
        cli::Log::error(e.what());
        return 1;
    }
    return 2;
}
