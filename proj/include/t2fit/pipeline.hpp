#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "t2fit/image.hpp"
#include "t2fit/lsq.hpp"
#include "t2fit/trainer.hpp"

namespace t2fit {

// Per-voxel fit status over a map.
enum class VoxelStatus : std::uint8_t {
    ok = 0,
    masked_out = 1,
    degenerate = 2,   // too few usable echoes / all-zero signal
    non_decaying = 3, // log slope >= 0
    diverged = 4,     // non-finite loss or unconverged without a usable result
};

struct StatusMap {
    int rows = 0;
    int cols = 0;
    std::vector<VoxelStatus> status;

    static StatusMap empty(int rows, int cols) {
        return {rows, cols,
                std::vector<VoxelStatus>(static_cast<std::size_t>(rows) * cols,
                                         VoxelStatus::masked_out)};
    }
    VoxelStatus at(int r, int c) const { return status[static_cast<std::size_t>(r) * cols + c]; }
};

// Per-voxel trained networks for the masked-in voxels, sharing one
// t_max input scaling.
struct TrainedField {
    int rows = 0;
    int cols = 0;
    double t_max = 0.0;
    int width = 8;
    std::vector<double> times; // training echo times, ms
    struct Entry {
        int row = 0;
        int col = 0;
        double scale = 1.0; // signal scale divided out before training
        MlpParams params;
    };
    std::vector<Entry> entries; // sorted by (row, col)

    std::optional<std::size_t> find(int r, int c) const;
};

struct MapSet {
    ParameterMap t2;
    ParameterMap m0;
    StatusMap status;
    int n_failed = 0;
};

struct PinnMapResult {
    MapSet maps;
    TrainedField field;
    ParameterMap data_loss; // converged per-voxel data loss, kind residual
};

// Voxel included iff first-echo intensity >= threshold_frac * max first-echo
// intensity. An all-zero first frame yields an empty mask (warning, not an
// error); callers can check mask_count().
ParameterMap build_mask(const ImageSeries& series, double threshold_frac);

// Voxel-wise log-linear fit (+ optional Gauss-Newton refinement). Voxels
// whose fit throws are masked out with a status code.
MapSet map_lsq(const ImageSeries& series, const ParameterMap& mask, const LsqOptions& opts,
               int threads = 1);

// Voxel-wise PINN fit. Per-voxel seeds derive from (cfg.seed, row, col),
// so results are bit-identical for any thread count and visiting order.
PinnMapResult map_pinn(const ImageSeries& series, const ParameterMap& mask,
                       const CollocationGrid& grid, const LossWeights& w, const TrainConfig& cfg,
                       int threads = 1);

// Entrywise a - b on the intersected mask.
ParameterMap diff_map(const ParameterMap& a, const ParameterMap& b);

// Evaluates every trained voxel network at the requested times; masked-out
// voxels are 0. Values are the raw rescaled network outputs; at t = 0 a
// voxel reproduces its m0_hat exactly.
ImageSeries generate_frames(const TrainedField& field, const std::vector<double>& times);

} // namespace t2fit
