// Command-line front end for the piecewise-smooth image prior library.
//
// Subcommands cover the four image tasks (denoise, denoise-pg, enhance,
// inpaint) plus edge-map export, noise synthesis, PSNR measurement, and
// config-file driven runs. Every flag has a config key (the flag name without
// the leading dashes), so `--write-config` followed by `run-config` rounds a
// run trip exactly.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fgip/fgip.hpp"

namespace {

int run(std::vector<std::string> args, int depth);

// Mutable state all subcommand callbacks write into. Estimation knobs start
// at the library defaults so help text and behavior stay in sync.
struct Options {
    Options() {
        fgip::HyperParams d;
        p = d.p;
        beta = d.beta;
        beta_delta = d.beta_delta;
        beta_n = d.beta_n;
        iters = d.iterations;
    }

    std::string input, input2, out, mask_path;
    std::string out_row, out_col, out_combined;
    std::string metrics_json, reference, write_config, config_path;

    double sigma_z = 0.0;
    double sigma_z_inv = 0.0;
    bool augmented = false;
    int iters = 5;
    double p = 0.3, beta = 30.0, beta_delta = 3.0, beta_n = 1.0;
    std::string variant = "lukaj";

    double alpha = 0.0;  // Poisson gain (denoise-pg, add-noise)
    double sigma = 0.0;  // noise level (add-noise)
    std::uint64_t seed = 1;

    std::string phi = "gamma";
    double lambda = 0.5, gamma = 0.5;
    double phi_alpha = 1.0, phi_beta = 2.0;

    int threads = 0;  // 0 = pick automatically
};

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

// Ordered key/value lines making up a config file.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

void save_config(const std::string& path, const ConfigEntries& entries) {
    std::ofstream out(path);
    if (!out) throw fgip::IoError("cannot write config file '" + path + "'");
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
    if (!out) throw fgip::IoError("failed while writing config file '" + path + "'");
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
// Underscores in keys are treated as dashes so either spelling works.
ConfigEntries load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fgip::IoError("cannot open config file '" + path + "'");
    ConfigEntries entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError(path + ":" + std::to_string(lineno),
                                       "expected 'key = value'");
        std::string key = trimmed(line.substr(0, eq));
        std::string value = trimmed(line.substr(eq + 1));
        if (key.empty())
            throw CLI::ValidationError(path + ":" + std::to_string(lineno), "empty key");
        std::replace(key.begin(), key.end(), '_', '-');
        entries.emplace_back(std::move(key), std::move(value));
    }
    return entries;
}

fgip::ImageGrid field_to_image(const fgip::Field2D& f) {
    fgip::ImageGrid img(f.height, f.width, 1, 0.0);
    img.samples = f.samples;
    return img;
}

// Mask images follow the convention: any nonzero sample marks a missing pixel.
fgip::Mask mask_from_image(const fgip::ImageGrid& img) {
    fgip::Mask mask(img.height, img.width);
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            for (int c = 0; c < img.channels; ++c)
                if (img.at(i, j, c) > 0.0) {
                    mask.at(i, j) = 1;
                    break;
                }
    return mask;
}

// sigma-z-inv is an alias (some sources quote inverse noise levels); when both
// spellings appear, the inverse form wins.
fgip::HyperParams make_params(const Options& o, const CLI::App* sub) {
    fgip::HyperParams params;
    if (sub->count("--sigma-z-inv") > 0)
        params.sigma_z = o.sigma_z_inv != 0.0 ? 1.0 / o.sigma_z_inv : 0.0;
    else
        params.sigma_z = o.sigma_z;
    params.p = o.p;
    params.beta = o.beta;
    params.beta_delta = o.beta_delta;
    params.iterations = o.iters;
    params.message_variant = fgip::parse_message_variant(o.variant);
    params.beta_n = o.beta_n;
    return params;
}

void require_sigma_z(const CLI::App* sub) {
    if (sub->count("--sigma-z") == 0 && sub->count("--sigma-z-inv") == 0)
        throw CLI::RequiredError("--sigma-z (or --sigma-z-inv)");
}

// Flags shared by every estimation subcommand.
void add_estimation_flags(CLI::App* sub, Options& o) {
    sub->add_option("input", o.input, "input image (PNG, PGM, or PPM)")->required();
    sub->add_option("--sigma-z", o.sigma_z, "observation noise standard deviation, [0,1] units");
    sub->add_option("--sigma-z-inv", o.sigma_z_inv, "inverse noise level; sets sigma-z = 1/value");
    sub->add_option("--iters", o.iters, "outer cycles per pass")->capture_default_str();
    sub->add_option("--p", o.p, "sparsity exponent in (0,2]")->capture_default_str();
    sub->add_option("--beta", o.beta, "level-step prior weight")->capture_default_str();
    sub->add_option("--beta-delta", o.beta_delta, "scale-increment prior weight")
        ->capture_default_str();
    sub->add_option("--variant", o.variant, "scale-message variant")
        ->check(CLI::IsMember({"lukaj", "mlsp"}))
        ->capture_default_str();
    sub->add_option("--beta-n", o.beta_n, "exponential prior weight (mlsp variant)")
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads (0 = automatic)")
        ->capture_default_str();
    sub->add_option("--write-config", o.write_config,
                    "write the effective settings as a run-config file");
}

// Canonical config lines for the shared estimation flags. sigma-z is always
// written as a plain standard deviation, never through the inverse alias.
void append_estimation_entries(ConfigEntries& entries, const Options& o,
                               const fgip::HyperParams& params) {
    entries.emplace_back("input", o.input);
    entries.emplace_back("sigma-z", format_double(params.sigma_z));
    entries.emplace_back("iters", std::to_string(o.iters));
    entries.emplace_back("p", format_double(o.p));
    entries.emplace_back("beta", format_double(o.beta));
    entries.emplace_back("beta-delta", format_double(o.beta_delta));
    entries.emplace_back("variant", o.variant);
    entries.emplace_back("beta-n", format_double(o.beta_n));
    entries.emplace_back("threads", std::to_string(o.threads));
}

void append_metrics_entries(ConfigEntries& entries, const Options& o) {
    if (!o.metrics_json.empty()) entries.emplace_back("metrics-json", o.metrics_json);
    if (!o.reference.empty()) entries.emplace_back("reference", o.reference);
}

void write_metrics(const Options& o, const fgip::ImageGrid& noisy, const fgip::ImageGrid& output,
                   const fgip::TaskRunInfo& info, double wall_ms) {
    const fgip::ImageGrid ref = fgip::load_image(o.reference);
    nlohmann::json j;
    j["psnr_in"] = fgip::psnr(noisy, ref);
    j["psnr_out"] = fgip::psnr(output, ref);
    j["iterations"] = info.cycles;
    j["cg_iterations_total"] = info.cg_iterations;
    j["wall_ms"] = wall_ms;
    std::ofstream out(o.metrics_json);
    if (!out) throw fgip::IoError("cannot write metrics file '" + o.metrics_json + "'");
    out << j.dump(2) << '\n';
}

void run_denoise_task(const Options& o, const CLI::App* sub, bool poissonian) {
    require_sigma_z(sub);
    fgip::set_workers(o.threads);
    const fgip::HyperParams params = make_params(o, sub);

    if (!o.write_config.empty()) {
        ConfigEntries entries;
        entries.emplace_back("task", poissonian ? "denoise-pg" : "denoise");
        append_estimation_entries(entries, o, params);
        if (poissonian) entries.emplace_back("alpha", format_double(o.alpha));
        entries.emplace_back("augmented", o.augmented ? "true" : "false");
        entries.emplace_back("out", o.out);
        append_metrics_entries(entries, o);
        save_config(o.write_config, entries);
    }

    const fgip::ImageGrid img = fgip::load_image(o.input);
    const auto t0 = std::chrono::steady_clock::now();
    const fgip::TaskRunInfo info =
        poissonian ? fgip::denoise_poisson_gaussian_with_info(img, o.alpha, params, o.augmented)
                   : fgip::denoise_with_info(img, params, o.augmented);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    fgip::save_image(info.output, o.out);
    if (!o.metrics_json.empty()) write_metrics(o, img, info.output, info, wall_ms);
}

int build_and_parse(std::vector<std::string> args, int depth, Options& o, int& nested_code);

// run-config: replay a key=value file as a fresh command line. Flags given on
// the real command line are appended after the file-derived ones, so with the
// take-last option policy they override the file.
int run(std::vector<std::string> args, int depth) {
    Options o;
    int nested_code = 0;
    try {
        return build_and_parse(std::move(args), depth, o, nested_code) == 0 ? nested_code : 1;
    } catch (const fgip::ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fgip::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fgip::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

int build_and_parse(std::vector<std::string> args, int depth, Options& o, int& nested_code) {
    CLI::App app{"Piecewise-smooth image prior: denoising, enhancement, inpainting"};
    app.name("fgip");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    // --- denoise -----------------------------------------------------------
    CLI::App* denoise = app.add_subcommand("denoise", "remove Gaussian noise");
    add_estimation_flags(denoise, o);
    denoise->add_flag("--augmented", o.augmented, "run the detail-restoring second pass");
    denoise->add_option("--out", o.out, "output image path")->required();
    auto* den_metrics = denoise->add_option("--metrics-json", o.metrics_json,
                                            "write run metrics as JSON to this path");
    auto* den_ref = denoise->add_option("--reference", o.reference,
                                        "clean reference image for the metrics");
    den_metrics->needs(den_ref);
    denoise->callback([&o, denoise] { run_denoise_task(o, denoise, /*poissonian=*/false); });

    // --- denoise-pg --------------------------------------------------------
    CLI::App* denoise_pg =
        app.add_subcommand("denoise-pg", "remove scaled-Poisson plus Gaussian noise");
    add_estimation_flags(denoise_pg, o);
    denoise_pg->add_option("--alpha", o.alpha, "Poisson gain (counts per unit intensity)")
        ->required();
    denoise_pg->add_flag("--augmented", o.augmented, "run the detail-restoring second pass");
    denoise_pg->add_option("--out", o.out, "output image path")->required();
    auto* pg_metrics = denoise_pg->add_option("--metrics-json", o.metrics_json,
                                              "write run metrics as JSON to this path");
    auto* pg_ref = denoise_pg->add_option("--reference", o.reference,
                                          "clean reference image for the metrics");
    pg_metrics->needs(pg_ref);
    denoise_pg->callback([&o, denoise_pg] { run_denoise_task(o, denoise_pg, /*poissonian=*/true); });

    // --- enhance ------------------------------------------------------------
    CLI::App* enhance = app.add_subcommand("enhance", "amplify edges through a remapping curve");
    add_estimation_flags(enhance, o);
    enhance->add_option("--phi", o.phi, "remapping curve family")
        ->check(CLI::IsMember({"gamma", "tanh"}))
        ->capture_default_str();
    enhance->add_option("--lambda", o.lambda, "gamma curve knee location in (0,1]")
        ->capture_default_str();
    enhance->add_option("--gamma", o.gamma, "gamma curve exponent in (0,1]")
        ->capture_default_str();
    enhance->add_option("--phi-alpha", o.phi_alpha, "tanh curve argument scale")
        ->capture_default_str();
    enhance->add_option("--phi-beta", o.phi_beta, "tanh curve amplitude (> 1)")
        ->capture_default_str();
    enhance->add_option("--out", o.out, "output image path")->required();
    enhance->callback([&o, enhance] {
        require_sigma_z(enhance);
        fgip::set_workers(o.threads);
        const fgip::HyperParams params = make_params(o, enhance);
        if (!o.write_config.empty()) {
            ConfigEntries entries;
            entries.emplace_back("task", "enhance");
            append_estimation_entries(entries, o, params);
            entries.emplace_back("phi", o.phi);
            entries.emplace_back("lambda", format_double(o.lambda));
            entries.emplace_back("gamma", format_double(o.gamma));
            entries.emplace_back("phi-alpha", format_double(o.phi_alpha));
            entries.emplace_back("phi-beta", format_double(o.phi_beta));
            entries.emplace_back("out", o.out);
            save_config(o.write_config, entries);
        }
        const fgip::PhiSpec curve = o.phi == "tanh"
                                        ? fgip::PhiSpec::tanh_form(o.phi_alpha, o.phi_beta)
                                        : fgip::PhiSpec::gamma_form(o.lambda, o.gamma);
        const fgip::ImageGrid img = fgip::load_image(o.input);
        fgip::save_image(fgip::contrast_enhance(img, params, curve), o.out);
    });

    // --- inpaint -------------------------------------------------------------
    CLI::App* inpaint = app.add_subcommand("inpaint", "fill masked pixels from the surround");
    add_estimation_flags(inpaint, o);
    inpaint->add_option("--mask", o.mask_path, "mask image; nonzero pixels are missing")
        ->required();
    inpaint->add_option("--out", o.out, "output image path")->required();
    inpaint->callback([&o, inpaint] {
        require_sigma_z(inpaint);
        fgip::set_workers(o.threads);
        const fgip::HyperParams params = make_params(o, inpaint);
        if (!o.write_config.empty()) {
            ConfigEntries entries;
            entries.emplace_back("task", "inpaint");
            append_estimation_entries(entries, o, params);
            entries.emplace_back("mask", o.mask_path);
            entries.emplace_back("out", o.out);
            save_config(o.write_config, entries);
        }
        const fgip::ImageGrid img = fgip::load_image(o.input);
        const fgip::Mask mask = mask_from_image(fgip::load_image(o.mask_path));
        fgip::save_image(fgip::inpaint(img, mask, params), o.out);
    });

    // --- edges ---------------------------------------------------------------
    CLI::App* edges = app.add_subcommand("edges", "export recovered level-step magnitude maps");
    add_estimation_flags(edges, o);
    edges->add_option("--out-row", o.out_row, "horizontal step map output path");
    edges->add_option("--out-col", o.out_col, "vertical step map output path");
    edges->add_option("--out-combined", o.out_combined, "combined step map output path");
    edges->callback([&o, edges] {
        require_sigma_z(edges);
        if (o.out_row.empty() && o.out_col.empty() && o.out_combined.empty())
            throw CLI::ValidationError(
                "edges: at least one of --out-row, --out-col, --out-combined is required");
        fgip::set_workers(o.threads);
        const fgip::HyperParams params = make_params(o, edges);
        if (!o.write_config.empty()) {
            ConfigEntries entries;
            entries.emplace_back("task", "edges");
            append_estimation_entries(entries, o, params);
            if (!o.out_row.empty()) entries.emplace_back("out-row", o.out_row);
            if (!o.out_col.empty()) entries.emplace_back("out-col", o.out_col);
            if (!o.out_combined.empty()) entries.emplace_back("out-combined", o.out_combined);
            save_config(o.write_config, entries);
        }
        const fgip::ImageGrid img = fgip::load_image(o.input);
        const fgip::ObservationField obs(img, params.sigma_z * params.sigma_z);
        const fgip::BasicResult result = fgip::estimate_basic(obs, params);
        const fgip::EdgeMaps maps = fgip::edge_maps(result.u_row, result.u_col);
        if (!o.out_row.empty())
            fgip::save_image(field_to_image(fgip::normalized_to_unit_max(maps.row)), o.out_row);
        if (!o.out_col.empty())
            fgip::save_image(field_to_image(fgip::normalized_to_unit_max(maps.col)), o.out_col);
        if (!o.out_combined.empty())
            fgip::save_image(field_to_image(fgip::normalized_to_unit_max(maps.combined)),
                             o.out_combined);
    });

    // --- add-noise -------------------------------------------------------------
    CLI::App* add_noise = app.add_subcommand("add-noise", "synthesize noisy test images");
    add_noise->add_option("input", o.input, "input image")->required();
    add_noise->add_option("--sigma", o.sigma, "Gaussian noise standard deviation")->required();
    auto* an_alpha = add_noise->add_option(
        "--alpha", o.alpha, "Poisson gain; when set, draws scaled-Poisson plus Gaussian noise");
    add_noise->add_option("--seed", o.seed, "random seed")->capture_default_str();
    add_noise->add_option("--out", o.out, "output image path")->required();
    add_noise->add_option("--write-config", o.write_config,
                          "write the effective settings as a run-config file");
    add_noise->callback([&o, an_alpha] {
        if (!o.write_config.empty()) {
            ConfigEntries entries;
            entries.emplace_back("task", "add-noise");
            entries.emplace_back("input", o.input);
            entries.emplace_back("sigma", format_double(o.sigma));
            if (an_alpha->count() > 0) entries.emplace_back("alpha", format_double(o.alpha));
            entries.emplace_back("seed", std::to_string(o.seed));
            entries.emplace_back("out", o.out);
            save_config(o.write_config, entries);
        }
        const fgip::ImageGrid img = fgip::load_image(o.input);
        const fgip::ImageGrid noisy =
            an_alpha->count() > 0 ? fgip::add_noise_poisson_gaussian(img, o.alpha, o.sigma, o.seed)
                                  : fgip::add_noise_gaussian(img, o.sigma, o.seed);
        fgip::save_image(noisy, o.out);
    });

    // --- psnr --------------------------------------------------------------------
    CLI::App* psnr_cmd = app.add_subcommand("psnr", "print the PSNR between two images in dB");
    psnr_cmd->add_option("input", o.input, "first image")->required();
    psnr_cmd->add_option("input2", o.input2, "second image")->required();
    psnr_cmd->add_option("--write-config", o.write_config,
                         "write the effective settings as a run-config file");
    psnr_cmd->callback([&o] {
        if (!o.write_config.empty()) {
            ConfigEntries entries;
            entries.emplace_back("task", "psnr");
            entries.emplace_back("input", o.input);
            entries.emplace_back("input2", o.input2);
            save_config(o.write_config, entries);
        }
        const double value = fgip::psnr(fgip::load_image(o.input), fgip::load_image(o.input2));
        if (std::isinf(value))
            std::printf("inf\n");
        else
            std::printf("%.1f\n", value);
    });

    // --- run-config ----------------------------------------------------------------
    CLI::App* run_config = app.add_subcommand("run-config", "run a task described by a config file");
    run_config->add_option("--config", o.config_path, "key = value file; '#' starts a comment")
        ->required();
    run_config->allow_extras();
    run_config->callback([&o, run_config, depth, &nested_code] {
        if (depth > 0) throw CLI::ValidationError("run-config: config files cannot nest");
        const ConfigEntries entries = load_config(o.config_path);
        std::string task, input, input2;
        std::vector<std::string> synth;
        for (const auto& [key, value] : entries) {
            if (key == "task")
                task = value;
            else if (key == "input")
                input = value;
            else if (key == "input2")
                input2 = value;
            else if (key == "augmented")
                synth.push_back("--augmented=" + value);
            else {
                synth.push_back("--" + key);
                synth.push_back(value);
            }
        }
        if (task.empty())
            throw CLI::ValidationError("config file must name a task (task = <subcommand>)");
        if (task == "run-config")
            throw CLI::ValidationError("config files cannot invoke run-config");
        std::vector<std::string> full{task};
        if (!input.empty()) full.push_back(input);
        if (!input2.empty()) full.push_back(input2);
        full.insert(full.end(), synth.begin(), synth.end());
        const std::vector<std::string> extras = run_config->remaining();
        full.insert(full.end(), extras.begin(), extras.end());
        nested_code = run(std::move(full), depth + 1);
    });

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(std::move(args), 0);
}
