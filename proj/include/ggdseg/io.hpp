#pragma once

#include "ggdseg/linops.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ggdseg::io {

namespace fs = std::filesystem;

// Creates `dir` if missing; throws std::runtime_error if it cannot be
// created or written to.
void ensure_writable_dir(const fs::path& dir);

// Raw little-endian float64, row-major, with a JSON header next to it:
// <stem>.f64 and <stem>.json = {"height", "width", "dtype", "order", "endianness"}.
void write_raw(const fs::path& stem, std::span<const double> data, Grid grid);
Vec read_raw(const fs::path& stem, Grid* grid = nullptr);

// 16-bit grayscale PNG, min-max scaled; the scale goes to <path>.scale.json.
void write_png(const fs::path& path, std::span<const double> data, Grid grid);

// Plain-text matrix: rows of whitespace-separated reals, blank lines and
// lines starting with '#' ignored. Odd side lengths required.
Psf load_psf(const fs::path& path);

std::vector<int> to_labels(std::span<const double> v);
Vec from_labels(std::span<const int> v);

}  // namespace ggdseg::io
