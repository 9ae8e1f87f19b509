#include "ggdseg/experiment.hpp"

#include "ggdseg/io.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace ggdseg {

namespace fs = std::filesystem;

Psf make_psf(const PsfSpec& spec) {
    if (spec.file.empty()) return gaussian_psf(spec.side, spec.std_dev);
    Psf psf = io::load_psf(spec.file);
    const double total = std::accumulate(psf.values.begin(), psf.values.end(), 0.0);
    if (total != 0.0) {
        for (double& v : psf.values) v /= total;
    }
    return psf;
}

Segmentation segment(std::span<const double> p_hat, int levels) {
    Segmentation s;
    s.otsu = otsu(p_hat, levels);
    s.labels = quantize(p_hat, s.otsu.thresholds);
    return s;
}

nlohmann::ordered_json compute_metrics(const Phantom& ph, std::span<const double> y, std::span<const double> x_init,
                                       const SolveResult& res, const Segmentation& seg, bool timing) {
    const Vec& xh = res.state.x;
    nlohmann::ordered_json m;
    m["psnr_y"] = psnr_peak(ph.x, y);
    m["psnr_x_init"] = psnr_peak(ph.x, x_init);
    m["psnr_x_hat"] = psnr_peak(ph.x, xh);
    m["psnr_gain_db"] = psnr_peak(ph.x, xh) - psnr_peak(ph.x, y);
    m["psnr_range_y"] = psnr_range(ph.x, y);
    m["psnr_range_x_hat"] = psnr_range(ph.x, xh);
    m["ssim_y"] = ssim(ph.x, y, ph.grid);
    m["ssim_x_hat"] = ssim(ph.x, xh, ph.grid);
    m["overall_accuracy"] = overall_accuracy(ph.mask, seg.labels);
    m["levels"] = seg.otsu.thresholds.size() + 1;
    m["thresholds"] = seg.otsu.thresholds;

    const auto& rows = res.trace.rows;
    int failures = 0;
    for (const auto& r : rows) failures += r.decrease_ok ? 0 : 1;
    m["iterations"] = rows.empty() ? 0 : rows.back().iter;
    m["initial_objective"] = rows.empty() ? 0.0 : rows.front().objective;
    m["final_objective"] = rows.empty() ? 0.0 : rows.back().objective;
    m["decrease_failures"] = failures;
    m["final_metric"] = to_string(res.final_metric);
    m["events"] = res.trace.events;
    if (timing && !rows.empty()) m["seconds"] = rows.back().seconds;
    return m;
}

ExperimentResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    ExperimentResult r;
    r.phantom = make_phantom(cfg.phantom, cfg.seed);
    auto conv = std::make_shared<const ConvOperator>(make_psf(cfg.psf), cfg.phantom.grid);
    r.y = degrade(r.phantom.x, *conv, cfg.hyper.noise_std, cfg.seed);
    r.init = init_state(r.y, *conv, cfg.hyper, cfg.seed);
    const Problem prob(r.y, conv, cfg.hyper, cfg.seed ^ static_cast<std::uint64_t>(Stream::norm), cfg.solver);
    r.solve = solve(prob, r.init, cfg.stop);
    r.seg = segment(r.solve.state.p, cfg.levels);
    r.metrics = compute_metrics(r.phantom, r.y, r.init.x, r.solve, r.seg, cfg.timing);
    return r;
}

void write_map(const fs::path& dir, const std::string& stem, std::span<const double> v, Grid grid, bool png) {
    io::write_raw(dir / stem, v, grid);
    if (png) io::write_png(dir / (stem + ".png"), v, grid);
}

void write_trace(const fs::path& path, const Trace& trace, bool timing) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    trace.write_csv(f, timing);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

ExperimentResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const fs::path out(cfg.out);
    io::ensure_writable_dir(out);
    ExperimentResult r = run_pipeline(cfg);
    const Grid g = cfg.phantom.grid;
    write_map(out, "x_true", r.phantom.x, g, cfg.png);
    write_map(out, "p_true", r.phantom.p, g, cfg.png);
    write_map(out, "beta_true", r.phantom.beta, g, cfg.png);
    write_map(out, "mask", io::from_labels(r.phantom.mask), g, cfg.png);
    write_map(out, "y", r.y, g, cfg.png);
    write_map(out, "x_init", r.init.x, g, cfg.png);
    write_map(out, "x_hat", r.solve.state.x, g, cfg.png);
    write_map(out, "p_hat", r.solve.state.p, g, cfg.png);
    write_map(out, "beta_hat", r.solve.state.beta, g, cfg.png);
    write_map(out, "labels", io::from_labels(r.seg.labels), g, cfg.png);
    write_trace(out / "trace.csv", r.solve.trace, cfg.timing);
    write_json(out / "metrics.json", r.metrics);
    std::ofstream(out / "config.ini") << dump_config(cfg);
    return r;
}

}  // namespace ggdseg
