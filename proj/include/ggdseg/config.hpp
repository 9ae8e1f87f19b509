#pragma once

#include "ggdseg/model.hpp"
#include "ggdseg/pipeline.hpp"
#include "ggdseg/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace ggdseg {

struct PsfSpec {
    int side = 7;
    double std_dev = 1.0;
    // Optional text matrix; overrides side/std when set.
    std::string file;
};

// Everything one experiment needs. Read from an INI file with sections
// [model], [solver], [phantom], [psf], [run]; unknown keys are rejected.
struct RunConfig {
    Hyperparams hyper;
    StoppingCriteria stop;
    SolverOptions solver;
    PhantomSpec phantom;
    PsfSpec psf;
    std::uint64_t seed = 1;
    int levels = 2;
    std::string out = "out";
    // Record wall time in the trace and metrics (breaks byte-identical reruns).
    bool timing = false;
    bool png = true;

    // Throws std::invalid_argument on the first inconsistent field.
    void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
// INI text that parses back to `cfg`.
std::string dump_config(const RunConfig& cfg);

}  // namespace ggdseg
