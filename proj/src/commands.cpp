#include "auv/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "auv/dataset.hpp"
#include "auv/errors.hpp"
#include "auv/version.hpp"

namespace auv::cli {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (!(quantile > 0.0 && quantile <= 1.0))
        throw ParameterError("--quantile must lie in (0, 1]");
    if (!(epsilon > 0.0))
        throw ParameterError("--epsilon must be > 0");
    if (!(floor > 0.0))
        throw ParameterError("--floor must be > 0");
}

ComputeResult compute_auv(const RunConfig& config) {
    config.validate();
    const auto entries = scan_dataset(config.input, config.classes_file);
    const ScaleOptions options{config.epsilon, config.center, SvdRoute::automatic};
    const auto scales = compute_sample_scales(entries, config.classes, options, config.workers);

    ComputeResult result;
    auto& h = result.file.header;
    h.tool_version = tool_version;
    h.epsilon = config.epsilon;
    h.floor = config.floor;
    h.center = config.center;
    h.classes = config.classes;
    h.input = config.input.filename().string();
    for (const auto& s : scales) {
        if (!s.ok()) {
            result.failures.push_back(s.sample_id + ": " + s.error);
            continue;
        }
        AUVRecord r;
        r.sample_id = s.sample_id;
        r.per_class_scale = s.per_class;
        r.sample_scale = sample_scale(s.per_class);
        result.file.records.push_back(std::move(r));
    }
    if (result.file.records.empty())
        throw InputError("every sample failed; first error: " + result.failures.front());

    std::optional<LogRange> frozen;
    if (config.stats_in)
        frozen = read_stats(*config.stats_in);
    h.range = normalize_records(result.file.records, config.floor, frozen);
    h.frozen_range = frozen.has_value();
    return result;
}

FilterManifest filter_records(const RunConfig& config, const RecordsFile& file) {
    config.validate();
    if (file.records.empty())
        throw FormatError("records file holds no samples");
    if (is_per_class(config.strategy))
        return filter_per_class(file.records, config.quantile, config.classes, config.strategy,
                                config.union_mode, file.header.floor);
    return filter_global(file.records, config.quantile, config.strategy);
}

bool DemoReport::pass(double min_recall, double min_precision) const noexcept {
    return vacuous || (recall >= min_recall && precision >= min_precision);
}

DemoReport run_demo(const DemoOptions& options) {
    const auto& spec = options.spec;
    spec.validate();
    fs::path dir;
    bool temporary = false;
    if (options.work_dir) {
        dir = *options.work_dir;
    } else {
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        dir = fs::temp_directory_path() /
              ("auv-demo-" + std::to_string(spec.seed) + "-" + std::to_string(stamp));
        temporary = true;
    }

    DemoReport report;
    try {
        const auto dataset = synth::make_dataset(spec, dir, options.workers);
        RunConfig config;
        config.input = dir;
        config.workers = options.workers;
        const auto computed = compute_auv(config);

        report.samples = spec.n_samples;
        report.injected = spec.noisy_count();
        report.vacuous = report.injected == 0;
        report.quantile = static_cast<double>(spec.n_samples - report.injected) /
                          static_cast<double>(spec.n_samples);
        const auto manifest = filter_global(computed.file.records, report.quantile);
        report.threshold = manifest.thresholds.at(global_key);

        for (const auto& e : manifest.entries) {
            if (e.retained)
                continue;
            ++report.dropped;
            if (dataset.is_noisy.at(e.sample_id))
                ++report.true_positives;
        }
        report.precision = report.dropped == 0
                               ? 1.0
                               : static_cast<double>(report.true_positives) /
                                     static_cast<double>(report.dropped);
        report.recall = report.injected == 0
                            ? 1.0
                            : static_cast<double>(report.true_positives) /
                                  static_cast<double>(report.injected);
    } catch (...) {
        if (temporary)
            fs::remove_all(dir);
        throw;
    }
    if (temporary)
        fs::remove_all(dir);
    return report;
}

CheckGradReport run_check_grad(const CheckGradOptions& options) {
    CheckGradReport report;
    auto record = [&](const duo::GradCheckResult& r) {
        report.results.push_back(r);
        report.max_rel = std::max(report.max_rel, r.max_rel());
    };
    if (options.batch_dir) {
        const auto files = duo::read_batch_dir(*options.batch_dir);
        record(duo::check_gradients(files, options.config, options.check));
        if (options.report_out) {
            const auto loss = duo::duo_total_loss(files.batch, files.epsilon_raw, files.scales,
                                                  options.config, options.check.workers);
            std::ofstream out(*options.report_out, std::ios::trunc);
            if (!out)
                throw IoError("cannot write " + options.report_out->string());
            out << duo::report_json(loss) << "\n";
        }
    } else {
        for (std::size_t b = 0; b < options.batches; ++b) {
            const auto files =
                duo::random_batch(options.seed + b, options.dims, options.config.gamma);
            record(duo::check_gradients(files, options.config, options.check));
        }
    }
    report.pass = !report.results.empty() && report.max_rel < options.check.tolerance;
    return report;
}

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_codes::input;
    }
}

fs::path default_stats_path(const fs::path& output) {
    return fs::path(output.string() + ".stats.json");
}

std::vector<double> auvs_from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::string first;
    std::getline(in, first);
    std::string schema;
    try {
        schema = nlohmann::json::parse(first).value("schema", "");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    std::vector<double> auvs;
    if (schema == records_schema) {
        for (const auto& r : read_records(path).records)
            auvs.push_back(r.auv);
    } else if (schema == manifest_schema) {
        for (const auto& e : read_manifest(path).entries)
            auvs.push_back(e.auv);
    } else {
        throw FormatError(path.string() + ": neither an AUV records file nor a manifest");
    }
    return auvs;
}

}  // namespace

int cmd_compute_auv(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto result = compute_auv(config);
        for (const auto& f : result.failures)
            err << "skipped " << f << "\n";
        write_records(config.output, result.file);
        const auto& h = result.file.header;
        write_stats(config.stats_out.value_or(default_stats_path(config.output)), h.range,
                    config.floor);
        out << "computed " << result.file.records.size() << " AUV records ("
            << result.failures.size() << " skipped) -> " << config.output.string() << "\n";
        return exit_codes::ok;
    });
}

int cmd_filter(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto file = read_records(config.input);
        const auto manifest = filter_records(config, file);
        nlohmann::ordered_json extra;
        extra["epsilon"] = file.header.epsilon;
        extra["floor"] = file.header.floor;
        extra["records"] = config.input.filename().string();
        write_manifest(config.output, manifest, extra.dump());
        out << "retained " << manifest.retained_count() << " / " << manifest.entries.size()
            << " (p̃=" << config.quantile << ")\n";
        return exit_codes::ok;
    });
}

int cmd_curves(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto entries = scan_dataset(config.input, config.classes_file);
        std::vector<SingularSpectrum> spectra;
        std::vector<std::string> labels;
        for (const auto& e : entries) {
            const auto volume = load_feature_volume(e.path, e.class_ids);
            for (int c : volume.class_ids()) {
                if (!config.classes.empty() &&
                    std::find(config.classes.begin(), config.classes.end(), c) ==
                        config.classes.end())
                    continue;
                spectra.push_back(singular_values(class_matrix(volume, c, config.center)));
                labels.push_back(e.sample_id + ":" + std::to_string(c));
            }
        }
        export_spectrum_curves(spectra, config.output, labels);
        out << "wrote " << spectra.size() << " spectra -> " << config.output.string() << "\n";
        return exit_codes::ok;
    });
}

int cmd_histogram(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto auvs = auvs_from_file(config.input);
        export_histogram(auvs, config.bins, config.output);
        out << "binned " << auvs.size() << " AUVs into " << config.bins << " bins -> "
            << config.output.string() << "\n";
        return exit_codes::ok;
    });
}

int cmd_check_grad(const CheckGradOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto report = run_check_grad(options);
        out << std::setprecision(3) << std::scientific;
        for (std::size_t k = 0; k < report.results.size(); ++k) {
            const auto& r = report.results[k];
            out << "batch " << k << ": probs " << r.max_rel_probs << "  noise_head "
                << r.max_rel_noise_head << "  epsilon " << r.max_rel_epsilon
                << (r.degenerate_noise ? "  (degenerate noise)" : "") << "\n";
        }
        out << (report.pass ? "PASS" : "FAIL") << " max relative error " << report.max_rel
            << " (tolerance " << options.check.tolerance << ")\n";
        out << std::defaultfloat;
        return report.pass ? exit_codes::ok : exit_codes::acceptance;
    });
}

int cmd_demo(const DemoOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto r = run_demo(options);
        out << "samples " << r.samples << ", injected noisy " << r.injected << ", dropped "
            << r.dropped << " at p̃=" << r.quantile << " (threshold " << r.threshold
            << ")\n";
        if (r.vacuous)
            out << "no injected noisy samples: recall is vacuous\n";
        else
            out << "precision " << r.precision << "  recall " << r.recall << "\n";
        const bool ok = r.pass(options.min_recall, options.min_precision);
        out << (ok ? "PASS" : "FAIL") << "\n";
        return ok ? exit_codes::ok : exit_codes::acceptance;
    });
}

int cmd_synth(const synth::SynthSpec& spec, const fs::path& dir, int workers,
              std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto ds = synth::make_dataset(spec, dir, workers);
        const auto noisy = std::count_if(ds.is_noisy.begin(), ds.is_noisy.end(),
                                         [](const auto& kv) { return kv.second; });
        out << "wrote " << ds.sample_ids.size() << " samples (" << noisy << " noisy) -> "
            << dir.string() << "\n";
        return exit_codes::ok;
    });
}

namespace {

void add_spec_options(CLI::App* cmd, synth::SynthSpec& spec, std::vector<std::size_t>& shape) {
    cmd->add_option("--samples", spec.n_samples, "number of samples");
    cmd->add_option("--shape", shape, "C D H W")->expected(4);
    cmd->add_option("--clean-rank", spec.clean_rank, "rank of clean samples");
    cmd->add_option("--noisy-rank", spec.noisy_rank, "rank of injected noisy samples");
    cmd->add_option("--frac-noisy", spec.frac_noisy, "fraction of noisy samples");
    cmd->add_option("--noise-sigma", spec.noise_sigma, "isotropic noise sd");
    cmd->add_option("--seed", spec.seed, "dataset seed");
}

void apply_shape(synth::SynthSpec& spec, const std::vector<std::size_t>& shape) {
    if (shape.size() == 4)
        spec.shape = {shape[0], shape[1], shape[2], shape[3]};
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Aleatoric uncertainty values from frozen feature volumes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    RunConfig config;
    std::string strategy = "global_raw";
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--workers", config.workers, "worker threads")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--classes", config.classes, "class subset");
        cmd->add_option("--classes-file", config.classes_file, "sample_id -> class ids JSON");
        cmd->add_option("--epsilon", config.epsilon, "energy smoothing");
        cmd->add_option("--floor", config.floor, "lower clamp before log");
        cmd->add_flag("!--no-center", config.center, "skip row centering");
    };

    auto* compute = app.add_subcommand("compute-auv", "AUV records for a tensor directory");
    compute->add_option("input", config.input, "tensor directory")->required();
    compute->add_option("-o,--output", config.output, "records JSONL")->required();
    compute->add_option("--stats", config.stats_in, "reuse frozen (min, max) log stats");
    compute->add_option("--stats-out", config.stats_out, "where to write the batch stats");
    add_common(compute);

    auto* filter = app.add_subcommand("filter", "quantile filtering of AUV records");
    filter->add_option("records", config.input, "records JSONL")->required();
    filter->add_option("-o,--output", config.output, "manifest JSONL")->required();
    filter->add_option("--quantile", config.quantile, "retained quantile p");
    filter->add_option("--strategy", strategy,
                       "global_raw|global_normalized|per_class_raw|per_class_normalized");
    filter->add_flag("--union", config.union_mode, "per-class: keep if any class passes");
    add_common(filter);

    auto* curves = app.add_subcommand("curves", "singular value decay / cumulative energy CSV");
    curves->add_option("input", config.input, "tensor file or directory")->required();
    curves->add_option("-o,--output", config.output, "CSV path")->required();
    add_common(curves);

    auto* histogram = app.add_subcommand("histogram", "AUV histogram CSV");
    histogram->add_option("input", config.input, "records or manifest JSONL")->required();
    histogram->add_option("-o,--output", config.output, "CSV path")->required();
    histogram->add_option("--bins", config.bins, "number of bins")->check(CLI::PositiveNumber);

    CheckGradOptions grad;
    std::vector<std::size_t> grad_dims;
    auto* check = app.add_subcommand("check-grad", "finite-difference check of the DUO loss");
    check->add_option("--seed", grad.seed, "first batch seed");
    check->add_option("--batches", grad.batches, "number of random batches");
    check->add_option("--dims", grad_dims, "N C D H W")->expected(5);
    check->add_option("--alpha", grad.config.alpha, "scale re-weighting strength");
    check->add_option("--beta", grad.config.beta, "Dice weight");
    check->add_option("--gamma", grad.config.gamma, "label correction cap");
    check->add_option("--step", grad.check.step, "central difference step");
    check->add_option("--tolerance", grad.check.tolerance, "max relative error");
    check->add_option("--batch-dir", grad.batch_dir, "check a batch exchange directory");
    check->add_option("--report", grad.report_out, "write the LossReport JSON here");
    check->add_flag("--mutate-sign", grad.check.flip_sign,
                    "negative control: flip the probability gradient");

    DemoOptions demo;
    std::vector<std::size_t> demo_shape;
    auto* demo_cmd = app.add_subcommand("demo", "synthetic noisy-sample recovery");
    add_spec_options(demo_cmd, demo.spec, demo_shape);
    demo_cmd->add_option("--workers", demo.workers, "worker threads")
        ->check(CLI::PositiveNumber);
    demo_cmd->add_option("--work-dir", demo.work_dir, "keep the generated dataset here");

    synth::SynthSpec spec;
    std::vector<std::size_t> synth_shape;
    fs::path synth_dir;
    int synth_workers = 1;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
    add_spec_options(synth_cmd, spec, synth_shape);
    synth_cmd->add_option("-o,--output", synth_dir, "dataset directory")->required();
    synth_cmd->add_option("--workers", synth_workers, "worker threads")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_codes::ok : exit_codes::input;
    }

    if (*filter) {
        try {
            config.strategy = parse_strategy(strategy);
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return exit_codes::input;
        }
    }

    if (*compute)
        return cmd_compute_auv(config, out, err);
    if (*filter)
        return cmd_filter(config, out, err);
    if (*curves)
        return cmd_curves(config, out, err);
    if (*histogram)
        return cmd_histogram(config, out, err);
    if (*check) {
        if (grad_dims.size() == 5)
            std::copy(grad_dims.begin(), grad_dims.end(), grad.dims.begin());
        return cmd_check_grad(grad, out, err);
    }
    if (*demo_cmd) {
        apply_shape(demo.spec, demo_shape);
        return cmd_demo(demo, out, err);
    }
    apply_shape(spec, synth_shape);
    return cmd_synth(spec, synth_dir, synth_workers, out, err);
}

}  // namespace auv::cli
