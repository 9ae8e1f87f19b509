#pragma once

#include "ggdseg/config.hpp"
#include "ggdseg/pipeline.hpp"
#include "ggdseg/solver.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>

namespace ggdseg {

Psf make_psf(const PsfSpec& spec);

struct Segmentation {
    OtsuResult otsu;
    std::vector<int> labels;
};

Segmentation segment(std::span<const double> p_hat, int levels);

struct ExperimentResult {
    Phantom phantom;
    Vec y;
    State init;
    SolveResult solve;
    Segmentation seg;
    nlohmann::ordered_json metrics;
};

// Image-quality and segmentation scores of a finished run.
nlohmann::ordered_json compute_metrics(const Phantom& ph, std::span<const double> y, std::span<const double> x_init,
                                       const SolveResult& res, const Segmentation& seg, bool timing);

// phantom -> degrade -> Wiener init -> solve -> segment -> metrics.
ExperimentResult run_pipeline(const RunConfig& cfg);

// run_pipeline plus all artifacts under cfg.out.
ExperimentResult run_experiment(const RunConfig& cfg);

// Writers shared by the CLI stages.
void write_map(const std::filesystem::path& dir, const std::string& stem, std::span<const double> v, Grid grid,
               bool png);
void write_trace(const std::filesystem::path& path, const Trace& trace, bool timing);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace ggdseg
