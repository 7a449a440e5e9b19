#ifndef ORBITSHIFT_TESTS_HELPERS_HPP
#define ORBITSHIFT_TESTS_HELPERS_HPP

#include <functional>
#include <string>
#include <vector>

#include "orbitshift/oracle.hpp"

namespace testutil {

using orbitshift::Cycle;
using orbitshift::FieldSystem;
using orbitshift::Mat;
using orbitshift::Perturbation;
using orbitshift::Vec;

inline double rel_err(const Vec& got, const Vec& want) {
    const double scale = std::max(want.norm(), 1e-300);
    return (got - want).norm() / scale;
}

inline double rel_err(const Mat& got, const Mat& want) {
    const double scale = std::max(want.norm(), 1e-300);
    return (got - want).norm() / scale;
}

// Richardson-extrapolated central difference of order j in the scalar k.
inline Vec fd_in_k(const std::function<Vec(double)>& f, int j, double k) {
    auto stencil = [&](double h) -> Vec {
        switch (j) {
            case 1: return (f(h) - f(-h)) / (2 * h);
            case 2: return (f(h) - 2 * f(0) + f(-h)) / (h * h);
            default: return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h * h * h);
        }
    };
    const Vec coarse = stencil(k);
    const Vec fine = stencil(k / 2);
    return (4.0 * fine - coarse) / 3.0;
}

// The island X-cycle of the default model toroidal system (cached).
inline const Cycle& model_xcycle() {
    static const Cycle cyc = [] {
        const FieldSystem tok = orbitshift::make_system("model-toroidal");
        Vec a(2), b(2);
        a << 3.0, 0.3;
        b << 3.0, 0.95;
        const auto seeds = orbitshift::line_scan(tok, 2, a, b, 121);
        for (const Vec& s : seeds) {
            Cycle c = orbitshift::find_cycle(tok, s, 2);
            if (c.cls == orbitshift::CycleClass::XCycle) return c;
        }
        throw std::runtime_error("X-cycle not found");
    }();
    return cyc;
}

inline Perturbation model_pert() {
    return orbitshift::make_perturbation(orbitshift::make_system("model-toroidal"),
                                         "flux-harmonic", {{"m", 1}, {"n", 1}, {"amp", 3e-3}});
}

// Minimal CSV reader for the CLI outputs written by this project.
struct CsvFile {
    std::string manifest;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvFile parse_csv(const std::string& text) {
    CsvFile out;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        if (line.rfind("# manifest=", 0) == 0) {
            out.manifest = line.substr(11);
            continue;
        }
        std::vector<std::string> cells;
        size_t c = 0;
        while (true) {
            size_t comma = line.find(',', c);
            cells.push_back(line.substr(c, comma == std::string::npos ? comma : comma - c));
            if (comma == std::string::npos) break;
            c = comma + 1;
        }
        if (line_no++ == 0) {
            out.header = cells;
        } else {
            std::vector<double> row;
            for (const auto& cell : cells) row.push_back(std::stod(cell));
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace testutil

#endif
