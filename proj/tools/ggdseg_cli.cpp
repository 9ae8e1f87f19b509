// Command-line front end: phantom | degrade | solve | segment | metrics | run.

#include "ggdseg/config.hpp"
#include "ggdseg/experiment.hpp"
#include "ggdseg/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace ggdseg;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> metric;
    std::optional<int> levels;
    std::string in;
};

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.out = *c.out;
    if (c.metric) cfg.hyper.metric = metric_mode_from_string(*c.metric);
    if (c.levels) cfg.levels = *c.levels;
    cfg.validate();
    return cfg;
}

fs::path input_dir(const Common& c, const RunConfig& cfg) { return c.in.empty() ? fs::path(cfg.out) : fs::path(c.in); }

Vec read_checked(const fs::path& stem, const Grid& expect) {
    Grid g;
    Vec v = io::read_raw(stem, &g);
    if (!(g == expect)) throw std::runtime_error(stem.string() + ": grid does not match the configured phantom size");
    return v;
}

void cmd_phantom(const RunConfig& cfg) {
    io::ensure_writable_dir(cfg.out);
    const Phantom ph = make_phantom(cfg.phantom, cfg.seed);
    write_map(cfg.out, "x_true", ph.x, ph.grid, cfg.png);
    write_map(cfg.out, "p_true", ph.p, ph.grid, cfg.png);
    write_map(cfg.out, "beta_true", ph.beta, ph.grid, cfg.png);
    write_map(cfg.out, "mask", io::from_labels(ph.mask), ph.grid, cfg.png);
}

void cmd_degrade(const RunConfig& cfg, const fs::path& in) {
    const Grid g = cfg.phantom.grid;
    const Vec x = read_checked(in / "x_true", g);
    const ConvOperator conv(make_psf(cfg.psf), g);
    io::ensure_writable_dir(cfg.out);
    write_map(cfg.out, "y", degrade(x, conv, cfg.hyper.noise_std, cfg.seed), g, cfg.png);
}

void cmd_solve(const RunConfig& cfg, const fs::path& in) {
    const Grid g = cfg.phantom.grid;
    Vec y = read_checked(in / "y", g);
    auto conv = std::make_shared<const ConvOperator>(make_psf(cfg.psf), g);
    const State init = init_state(y, *conv, cfg.hyper, cfg.seed);
    const Problem prob(std::move(y), conv, cfg.hyper, cfg.seed ^ static_cast<std::uint64_t>(Stream::norm), cfg.solver);
    const SolveResult res = solve(prob, init, cfg.stop);
    io::ensure_writable_dir(cfg.out);
    write_map(cfg.out, "x_init", init.x, g, cfg.png);
    write_map(cfg.out, "x_hat", res.state.x, g, cfg.png);
    write_map(cfg.out, "p_hat", res.state.p, g, cfg.png);
    write_map(cfg.out, "beta_hat", res.state.beta, g, cfg.png);
    write_trace(fs::path(cfg.out) / "trace.csv", res.trace, cfg.timing);
    for (const auto& e : res.trace.events) std::cerr << e << "\n";
}

void cmd_segment(const RunConfig& cfg, const fs::path& in) {
    const Grid g = cfg.phantom.grid;
    const Vec p = read_checked(in / "p_hat", g);
    const Segmentation s = segment(p, cfg.levels);
    io::ensure_writable_dir(cfg.out);
    write_map(cfg.out, "labels", io::from_labels(s.labels), g, cfg.png);
    nlohmann::ordered_json j;
    j["levels"] = cfg.levels;
    j["thresholds"] = s.otsu.thresholds;
    write_json(fs::path(cfg.out) / "thresholds.json", j);
}

void cmd_metrics(const RunConfig& cfg, const fs::path& in) {
    const Grid g = cfg.phantom.grid;
    const Vec x = read_checked(in / "x_true", g);
    const Vec y = read_checked(in / "y", g);
    const Vec xh = read_checked(in / "x_hat", g);
    const auto mask = io::to_labels(read_checked(in / "mask", g));
    const auto labels = io::to_labels(read_checked(in / "labels", g));
    nlohmann::ordered_json m;
    m["psnr_y"] = psnr_peak(x, y);
    m["psnr_x_hat"] = psnr_peak(x, xh);
    m["psnr_gain_db"] = psnr_peak(x, xh) - psnr_peak(x, y);
    m["psnr_range_y"] = psnr_range(x, y);
    m["psnr_range_x_hat"] = psnr_range(x, xh);
    m["ssim_y"] = ssim(x, y, g);
    m["ssim_x_hat"] = ssim(x, xh, g);
    m["overall_accuracy"] = overall_accuracy(mask, labels);
    io::ensure_writable_dir(cfg.out);
    write_json(fs::path(cfg.out) / "metrics.json", m);
    std::cout << m.dump(2) << "\n";
}

void cmd_run(const RunConfig& cfg) {
    const ExperimentResult r = run_experiment(cfg);
    for (const auto& e : r.solve.trace.events) std::cerr << e << "\n";
    std::cout << r.metrics.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint deblurring and generalized-Gaussian parameter segmentation"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* sub, bool with_in) {
        sub->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", c.seed, "master seed");
        sub->add_option("--out", c.out, "output directory");
        sub->add_option("--metric", c.metric, "x-step metric")->check(CLI::IsMember({"lipschitz", "fourier"}));
        sub->add_option("--levels", c.levels, "quantisation levels")->check(CLI::Range(2, kOtsuMaxLevels));
        if (with_in) sub->add_option("--in", c.in, "directory holding the stage inputs (default: --out)");
    };
    auto* phantom = app.add_subcommand("phantom", "synthesize a GGD phantom");
    auto* deg = app.add_subcommand("degrade", "blur and add noise to x_true");
    auto* slv = app.add_subcommand("solve", "estimate x, p, beta from y");
    auto* seg = app.add_subcommand("segment", "Otsu-quantize p_hat into labels");
    auto* met = app.add_subcommand("metrics", "PSNR, SSIM and OA of a finished run");
    auto* run = app.add_subcommand("run", "phantom -> degrade -> solve -> segment -> metrics");
    add_common(phantom, false);
    add_common(deg, true);
    add_common(slv, true);
    add_common(seg, true);
    add_common(met, true);
    add_common(run, false);
    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve(c);
        const fs::path in = input_dir(c, cfg);
        if (phantom->parsed()) cmd_phantom(cfg);
        else if (deg->parsed()) cmd_degrade(cfg, in);
        else if (slv->parsed()) cmd_solve(cfg, in);
        else if (seg->parsed()) cmd_segment(cfg, in);
        else if (met->parsed()) cmd_metrics(cfg, in);
        else if (run->parsed()) cmd_run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
