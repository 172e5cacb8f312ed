#pragma once

#include <string>
#include <vector>

#include "t2fit/image.hpp"
#include "t2fit/signal.hpp"

namespace t2fit {

// One disk-shaped region of uniform tissue parameters.
struct DiskRegion {
    double center_row = 0.0;
    double center_col = 0.0;
    double radius = 0.0; // pixels
    TissueParams params;
};

struct PhantomLayout {
    int rows = 0;
    int cols = 0;
    std::vector<DiskRegion> regions;

    // Rejects empty dims, out-of-bounds disks and overlapping disks.
    void validate() const;
};

// A rasterized phantom: every pixel carries the TissueParams of its region,
// background pixels have m0 = 0.
class Phantom {
public:
    explicit Phantom(const PhantomLayout& layout);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    const TissueParams& pixel(int r, int c) const {
        return pixels_[static_cast<std::size_t>(r) * cols_ + c];
    }

    // -1 for background, else index into layout.regions.
    int region_of(int r, int c) const {
        return region_[static_cast<std::size_t>(r) * cols_ + c];
    }

    // Ground-truth maps over the non-background pixels.
    ParameterMap truth_t2() const;
    ParameterMap truth_m0() const;

    // Synthesizes one frame per echo time via the signal model, with a
    // per-pixel noise stream derived deterministically from (seed, row, col).
    ImageSeries make_series(const std::vector<double>& times, const NoiseSpec& noise = {}) const;

private:
    int rows_;
    int cols_;
    std::vector<TissueParams> pixels_;
    std::vector<int> region_;
};

// The default layout used by the CLI when no phantom config is given:
// 14 disks on a grid with distinct T2 values including 5.592 ms.
PhantomLayout default_phantom_layout(int rows = 64, int cols = 64);

// The default echo times (ms) used by the CLI when --times is not given.
// Roughly geometric spacing: early echoes resolve the shortest T2 in the
// default phantom (5.592 ms), late echoes the longest (200 ms). A uniform
// grid starting at 10 ms carries almost no information about T2 ~ 5 ms.
std::vector<double> default_echo_times();

// Derives an independent per-pixel RNG seed from a base seed and pixel
// coordinates (splitmix64 over the packed triple).
std::uint64_t per_pixel_seed(std::uint64_t base, int row, int col);

} // namespace t2fit
