#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lsrf/coord.hpp"
#include "lsrf/error.hpp"

namespace lsrf {

/// Real-valued 2-D lattice data over [0,n1) x [0,n2), row-major.
/// An optional mask marks observed cells (all observed when absent).
struct FieldGrid {
    Coord bounds;
    std::vector<double> values;
    std::optional<std::vector<std::uint8_t>> mask;

    FieldGrid() = default;
    FieldGrid(Coord b, double fill = 0.0)
        : bounds(b),
          values(static_cast<std::size_t>(b.t1) * static_cast<std::size_t>(b.t2), fill) {}

    double& at(const Coord& c) { return values[index(c)]; }
    double at(const Coord& c) const { return values[index(c)]; }
    double& at(int t1, int t2) { return at(Coord{t1, t2}); }
    double at(int t1, int t2) const { return at(Coord{t1, t2}); }

    std::size_t index(const Coord& c) const {
        return static_cast<std::size_t>(c.t1) * bounds.t2 + c.t2;
    }

    std::size_t size() const { return values.size(); }

    bool observed(const Coord& c) const {
        return !mask || (*mask)[index(c)] != 0;
    }

    /// Sample standard deviation over every cell (denominator n).
    double sample_sd() const {
        if (values.empty()) return 0.0;
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        return std::sqrt(ss / static_cast<double>(values.size()));
    }
};

/// Plain-text field format: one header line "n1 n2", then n1 rows of n2
/// space-separated reals.
inline void write_field_text(const FieldGrid& f, std::ostream& out) {
    out << f.bounds.t1 << " " << f.bounds.t2 << "\n";
    char buf[32];
    for (int r = 0; r < f.bounds.t1; ++r) {
        for (int c = 0; c < f.bounds.t2; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", f.at(r, c));
            out << (c ? " " : "") << buf;
        }
        out << "\n";
    }
}

inline void write_field_text(const FieldGrid& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_field_text(f, out);
}

inline FieldGrid read_field_text(std::istream& in) {
    int n1 = 0, n2 = 0;
    if (!(in >> n1 >> n2) || n1 <= 0 || n2 <= 0) {
        throw IoError("field file: bad header (expected 'n1 n2')");
    }
    FieldGrid f(Coord{n1, n2});
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (!(in >> f.values[i])) {
            throw IoError("field file: truncated at value " + std::to_string(i));
        }
    }
    return f;
}

inline FieldGrid read_field_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open field file: " + path);
    return read_field_text(in);
}

}  // namespace lsrf
