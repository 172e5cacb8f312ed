#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "t2fit/errors.hpp"

namespace t2fit {

// An I-deep stack of 2-D frames sharing one echo-time axis.
struct ImageSeries {
    int rows = 0;
    int cols = 0;
    std::vector<double> times;               // I echo times, ms
    std::vector<std::vector<double>> frames; // I frames, row-major, rows*cols each

    std::size_t n_echoes() const { return times.size(); }
    std::size_t n_pixels() const { return static_cast<std::size_t>(rows) * cols; }

    double at(std::size_t frame, int r, int c) const {
        return frames[frame][static_cast<std::size_t>(r) * cols + c];
    }

    void validate() const;
};

enum class MapKind { t2, m0, diff, residual };

// A 2-D grid of per-voxel scalars with an inclusion mask. Masked-out
// entries carry NaN and are excluded from statistics.
struct ParameterMap {
    int rows = 0;
    int cols = 0;
    MapKind kind = MapKind::t2;
    std::vector<double> values; // row-major, NaN where masked out
    std::vector<std::uint8_t> mask;

    static ParameterMap empty(int rows, int cols, MapKind kind) {
        ParameterMap m;
        m.rows = rows;
        m.cols = cols;
        m.kind = kind;
        m.values.assign(static_cast<std::size_t>(rows) * cols,
                        std::numeric_limits<double>::quiet_NaN());
        m.mask.assign(static_cast<std::size_t>(rows) * cols, 0);
        return m;
    }

    std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
    double& at(int r, int c) { return values[idx(r, c)]; }
    double at(int r, int c) const { return values[idx(r, c)]; }
    bool in_mask(int r, int c) const { return mask[idx(r, c)] != 0; }

    void set(int r, int c, double v) {
        values[idx(r, c)] = v;
        mask[idx(r, c)] = 1;
    }

    std::size_t mask_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

const char* map_kind_name(MapKind k);
MapKind map_kind_from_name(const std::string& s);

} // namespace t2fit
