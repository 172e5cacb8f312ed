#include "t2fit/phantom.hpp"

#include <cmath>

namespace t2fit {

void ImageSeries::validate() const {
    if (rows <= 0 || cols <= 0) throw ValidationError("ImageSeries: empty dims");
    if (times.size() != frames.size())
        throw ValidationError("ImageSeries: times/frames length mismatch");
    if (times.size() < 2) throw ValidationError("ImageSeries: need at least 2 echoes");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && !(times[i] > times[i - 1]))
            throw ValidationError("ImageSeries: echo times must be strictly increasing");
        if (frames[i].size() != n_pixels())
            throw ValidationError("ImageSeries: frame size does not match dims");
        for (double v : frames[i])
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError("ImageSeries: intensities must be finite and >= 0");
    }
}

const char* map_kind_name(MapKind k) {
    switch (k) {
    case MapKind::t2: return "t2";
    case MapKind::m0: return "m0";
    case MapKind::diff: return "diff";
    case MapKind::residual: return "residual";
    }
    return "t2";
}

MapKind map_kind_from_name(const std::string& s) {
    if (s == "t2") return MapKind::t2;
    if (s == "m0") return MapKind::m0;
    if (s == "diff") return MapKind::diff;
    if (s == "residual") return MapKind::residual;
    throw ValidationError("unknown map kind: " + s);
}

void PhantomLayout::validate() const {
    if (rows <= 0 || cols <= 0) throw ValidationError("phantom: dims must be positive");
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& r = regions[i];
        if (!(r.radius > 0.0)) throw ValidationError("phantom: region radius must be > 0");
        r.params.validate();
        if (r.center_row - r.radius < -0.5 || r.center_row + r.radius > rows - 0.5 ||
            r.center_col - r.radius < -0.5 || r.center_col + r.radius > cols - 0.5)
            throw ValidationError("phantom: region " + std::to_string(i) + " extends outside dims");
        for (std::size_t j = 0; j < i; ++j) {
            const auto& o = regions[j];
            const double d = std::hypot(r.center_row - o.center_row, r.center_col - o.center_col);
            if (d < r.radius + o.radius)
                throw ValidationError("phantom: regions " + std::to_string(j) + " and " +
                                      std::to_string(i) + " overlap");
        }
    }
}

Phantom::Phantom(const PhantomLayout& layout) : rows_(layout.rows), cols_(layout.cols) {
    layout.validate();
    const std::size_t n = static_cast<std::size_t>(rows_) * cols_;
    pixels_.assign(n, TissueParams{0.0, 1.0});
    region_.assign(n, -1);
    for (std::size_t k = 0; k < layout.regions.size(); ++k) {
        const auto& reg = layout.regions[k];
        for (int r = 0; r < rows_; ++r) {
            for (int c = 0; c < cols_; ++c) {
                const double d = std::hypot(r - reg.center_row, c - reg.center_col);
                if (d <= reg.radius) {
                    const std::size_t i = static_cast<std::size_t>(r) * cols_ + c;
                    pixels_[i] = reg.params;
                    region_[i] = static_cast<int>(k);
                }
            }
        }
    }
}

ParameterMap Phantom::truth_t2() const {
    ParameterMap m = ParameterMap::empty(rows_, cols_, MapKind::t2);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c)
            if (region_of(r, c) >= 0) m.set(r, c, pixel(r, c).t2);
    return m;
}

ParameterMap Phantom::truth_m0() const {
    ParameterMap m = ParameterMap::empty(rows_, cols_, MapKind::m0);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c)
            if (region_of(r, c) >= 0) m.set(r, c, pixel(r, c).m0);
    return m;
}

ImageSeries Phantom::make_series(const std::vector<double>& times, const NoiseSpec& noise) const {
    ImageSeries s;
    s.rows = rows_;
    s.cols = cols_;
    s.times = times;
    s.frames.assign(times.size(), std::vector<double>(s.n_pixels(), 0.0));
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            const TissueParams& p = pixel(r, c);
            if (p.m0 == 0.0) continue; // background stays zero
            NoiseSpec px = noise;
            px.seed = per_pixel_seed(noise.seed, r, c);
            EchoSeries es = synthesize_series(p, times, px);
            for (std::size_t i = 0; i < times.size(); ++i)
                s.frames[i][static_cast<std::size_t>(r) * cols_ + c] = es.signals[i];
        }
    }
    return s;
}

std::uint64_t per_pixel_seed(std::uint64_t base, int row, int col) {
    // splitmix64 over the packed (base, row, col) triple
    std::uint64_t x = base ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(row)) << 32 |
                              static_cast<std::uint32_t>(col));
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

PhantomLayout default_phantom_layout(int rows, int cols) {
    // 14 tubes arranged on a 4x4 grid (two corners free), T2 values spread
    // from long to short; tube 14 carries the short 5.592 ms value.
    PhantomLayout l;
    l.rows = rows;
    l.cols = cols;
    const double t2s[14] = {200.0, 150.0, 120.0, 100.0, 80.0, 60.0, 50.0,
                            40.0,  30.0,  25.0,  20.0,  15.0, 10.0, 5.592};
    const double cell_r = rows / 4.0;
    const double cell_c = cols / 4.0;
    const double radius = std::min(cell_r, cell_c) * 0.28;
    int k = 0;
    for (int gr = 0; gr < 4 && k < 14; ++gr) {
        for (int gc = 0; gc < 4 && k < 14; ++gc) {
            DiskRegion d;
            d.center_row = (gr + 0.5) * cell_r;
            d.center_col = (gc + 0.5) * cell_c;
            d.radius = radius;
            d.params = TissueParams{1.0, t2s[k]};
            l.regions.push_back(d);
            ++k;
        }
    }
    return l;
}

std::vector<double> default_echo_times() {
    return {2.0, 4.0, 8.0, 14.0, 24.0, 40.0, 70.0, 120.0, 200.0};
}

} // namespace t2fit
