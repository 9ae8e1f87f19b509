#include "ggdseg/io.hpp"

#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace ggdseg::io {

namespace {

fs::path with_ext(fs::path stem, const char* ext) { return stem.replace_extension(ext); }

}  // namespace

void ensure_writable_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw std::runtime_error("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw std::runtime_error("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

void write_raw(const fs::path& stem, std::span<const double> data, Grid grid) {
    static_assert(std::endian::native == std::endian::little, "raw writer assumes a little-endian host");
    if (data.size() != grid.size()) throw std::invalid_argument("write_raw: size does not match grid");
    {
        std::ofstream f(with_ext(stem, ".f64"), std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + with_ext(stem, ".f64").string());
        f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
        if (!f) throw std::runtime_error("short write to " + with_ext(stem, ".f64").string());
    }
    nlohmann::ordered_json h;
    h["height"] = grid.height;
    h["width"] = grid.width;
    h["dtype"] = "float64";
    h["order"] = "row-major";
    h["endianness"] = "little";
    std::ofstream f(with_ext(stem, ".json"));
    if (!f) throw std::runtime_error("cannot write " + with_ext(stem, ".json").string());
    f << h.dump(2) << "\n";
}

Vec read_raw(const fs::path& stem, Grid* grid) {
    std::ifstream hf(with_ext(stem, ".json"));
    if (!hf) throw std::runtime_error("cannot read " + with_ext(stem, ".json").string());
    const auto h = nlohmann::json::parse(hf);
    if (h.at("dtype") != "float64" || h.at("order") != "row-major" || h.at("endianness") != "little") {
        throw std::runtime_error("unsupported raw layout in " + with_ext(stem, ".json").string());
    }
    Grid g{h.at("height").get<std::size_t>(), h.at("width").get<std::size_t>()};
    Vec out(g.size());
    std::ifstream f(with_ext(stem, ".f64"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + with_ext(stem, ".f64").string());
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size() * sizeof(double)));
    if (f.gcount() != static_cast<std::streamsize>(out.size() * sizeof(double))) {
        throw std::runtime_error("truncated raw file " + with_ext(stem, ".f64").string());
    }
    if (grid) *grid = g;
    return out;
}

void write_png(const fs::path& path, std::span<const double> data, Grid grid) {
    if (data.size() != grid.size()) throw std::invalid_argument("write_png: size does not match grid");
    const auto [mn_it, mx_it] = std::minmax_element(data.begin(), data.end());
    const double mn = data.empty() ? 0.0 : *mn_it;
    const double mx = data.empty() ? 0.0 : *mx_it;
    const double span = mx > mn ? mx - mn : 1.0;

    std::vector<unsigned char> rows(grid.size() * 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = std::clamp((data[i] - mn) / span, 0.0, 1.0);
        const auto v = static_cast<unsigned>(std::lround(t * 65535.0));
        rows[2 * i] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
        rows[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
    }

    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(grid.width), static_cast<png_uint_32>(grid.height), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < grid.height; ++r) png_write_row(png, rows.data() + r * grid.width * 2);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    nlohmann::ordered_json s;
    s["min"] = mn;
    s["max"] = mx;
    s["bit_depth"] = 16;
    std::ofstream f(fs::path(path.string() + ".scale.json"));
    f << s.dump(2) << "\n";
}

Psf load_psf(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read PSF file " + path.string());
    Psf psf;
    std::string line;
    while (std::getline(f, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream is(line);
        std::vector<double> row;
        double v;
        while (is >> v) row.push_back(v);
        if (!is.eof()) throw std::runtime_error("PSF file " + path.string() + ": non-numeric entry");
        if (psf.rows == 0) psf.cols = row.size();
        if (row.size() != psf.cols) throw std::runtime_error("PSF file " + path.string() + ": ragged rows");
        psf.values.insert(psf.values.end(), row.begin(), row.end());
        ++psf.rows;
    }
    if (psf.rows == 0 || psf.rows % 2 == 0 || psf.cols % 2 == 0) {
        throw std::runtime_error("PSF file " + path.string() + ": side lengths must be odd");
    }
    return psf;
}

std::vector<int> to_labels(std::span<const double> v) {
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<int>(std::lround(v[i]));
    return out;
}

Vec from_labels(std::span<const int> v) { return Vec(v.begin(), v.end()); }

}  // namespace ggdseg::io
