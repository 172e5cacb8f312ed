#include "t2fit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "t2fit/phantom.hpp"

namespace t2fit {

std::optional<std::size_t> TrainedField::find(int r, int c) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(r, c),
                               [](const Entry& e, const std::pair<int, int>& key) {
                                   return std::make_pair(e.row, e.col) < key;
                               });
    if (it == entries.end() || it->row != r || it->col != c) return std::nullopt;
    return static_cast<std::size_t>(it - entries.begin());
}

ParameterMap build_mask(const ImageSeries& series, double threshold_frac) {
    series.validate();
    if (threshold_frac < 0.0 || threshold_frac >= 1.0)
        throw ValidationError("build_mask: threshold_frac must lie in [0,1)");
    ParameterMap mask = ParameterMap::empty(series.rows, series.cols, MapKind::residual);
    const auto& first = series.frames[0];
    const double peak = *std::max_element(first.begin(), first.end());
    if (peak <= 0.0) return mask; // all-zero first frame: empty mask
    const double cut = threshold_frac * peak;
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i] > 0.0 && first[i] >= cut) {
            mask.mask[i] = 1;
            mask.values[i] = 1.0;
        }
    }
    return mask;
}

namespace {

EchoSeries voxel_series(const ImageSeries& s, int r, int c) {
    EchoSeries es;
    es.times = s.times;
    es.signals.reserve(s.times.size());
    for (std::size_t i = 0; i < s.times.size(); ++i) es.signals.push_back(s.at(i, r, c));
    return es;
}

std::vector<std::pair<int, int>> masked_voxels(const ParameterMap& mask) {
    std::vector<std::pair<int, int>> v;
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c)
            if (mask.in_mask(r, c)) v.emplace_back(r, c);
    return v;
}

// Runs fn(voxel_index) over the list with an atomic work counter; results
// must go to disjoint slots so any thread count yields identical output.
template <class Fn>
void parallel_for_voxels(std::size_t n, int threads, Fn&& fn) {
    const int nt = std::max(1, threads);
    if (nt == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

MapSet map_lsq(const ImageSeries& series, const ParameterMap& mask, const LsqOptions& opts,
               int threads) {
    series.validate();
    opts.validate();
    if (mask.rows != series.rows || mask.cols != series.cols)
        throw ValidationError("map_lsq: mask dims do not match series");
    if (mask.mask_count() == 0) throw ValidationError("map_lsq: empty mask");

    MapSet out;
    out.t2 = ParameterMap::empty(series.rows, series.cols, MapKind::t2);
    out.m0 = ParameterMap::empty(series.rows, series.cols, MapKind::m0);
    out.status = StatusMap::empty(series.rows, series.cols);

    const auto voxels = masked_voxels(mask);
    std::atomic<int> failed{0};
    parallel_for_voxels(voxels.size(), threads, [&](std::size_t i) {
        const auto [r, c] = voxels[i];
        const std::size_t idx = out.t2.idx(r, c);
        try {
            const FitResult fr = fit_lsq(voxel_series(series, r, c), opts);
            out.t2.values[idx] = fr.t2_hat;
            out.t2.mask[idx] = 1;
            out.m0.values[idx] = fr.m0_hat;
            out.m0.mask[idx] = 1;
            out.status.status[idx] = VoxelStatus::ok;
        } catch (const NumericalError&) {
            out.status.status[idx] = VoxelStatus::non_decaying;
            failed.fetch_add(1);
        } catch (const ValidationError&) {
            out.status.status[idx] = VoxelStatus::degenerate;
            failed.fetch_add(1);
        }
    });
    out.n_failed = failed.load();
    return out;
}

PinnMapResult map_pinn(const ImageSeries& series, const ParameterMap& mask,
                       const CollocationGrid& grid, const LossWeights& w, const TrainConfig& cfg,
                       int threads) {
    series.validate();
    w.validate();
    cfg.validate();
    if (mask.rows != series.rows || mask.cols != series.cols)
        throw ValidationError("map_pinn: mask dims do not match series");
    if (mask.mask_count() == 0) throw ValidationError("map_pinn: empty mask");

    PinnMapResult out;
    out.maps.t2 = ParameterMap::empty(series.rows, series.cols, MapKind::t2);
    out.maps.m0 = ParameterMap::empty(series.rows, series.cols, MapKind::m0);
    out.maps.status = StatusMap::empty(series.rows, series.cols);
    out.data_loss = ParameterMap::empty(series.rows, series.cols, MapKind::residual);
    out.field.rows = series.rows;
    out.field.cols = series.cols;
    out.field.t_max = series.times.back();
    out.field.width = cfg.width;
    out.field.times = series.times;

    const auto voxels = masked_voxels(mask);
    // one result slot per voxel, filled concurrently, assembled after the join
    std::vector<std::optional<PinnFit>> fits(voxels.size());
    std::atomic<int> failed{0};
    parallel_for_voxels(voxels.size(), threads, [&](std::size_t i) {
        const auto [r, c] = voxels[i];
        TrainConfig vcfg = cfg;
        vcfg.seed = per_pixel_seed(cfg.seed, r, c);
        try {
            fits[i] = fit_voxel_full(voxel_series(series, r, c), grid, w, vcfg);
        } catch (const std::exception&) {
            failed.fetch_add(1);
        }
    });

    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const auto [r, c] = voxels[i];
        const std::size_t idx = out.maps.t2.idx(r, c);
        if (!fits[i]) {
            out.maps.status.status[idx] = VoxelStatus::degenerate;
            continue;
        }
        const PinnFit& f = *fits[i];
        if (!f.result.status.empty()) {
            out.maps.status.status[idx] = VoxelStatus::diverged;
            failed.fetch_add(1);
            continue;
        }
        out.maps.t2.values[idx] = f.result.t2_hat;
        out.maps.t2.mask[idx] = 1;
        out.maps.m0.values[idx] = f.result.m0_hat;
        out.maps.m0.mask[idx] = 1;
        out.data_loss.values[idx] = f.result.loss_data * f.scale; // back to signal units
        out.data_loss.mask[idx] = 1;
        out.maps.status.status[idx] = VoxelStatus::ok;
        out.field.entries.push_back({r, c, f.scale, f.params});
    }
    out.maps.n_failed = failed.load();
    return out;
}

ParameterMap diff_map(const ParameterMap& a, const ParameterMap& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw ValidationError("diff_map: dimension mismatch");
    ParameterMap d = ParameterMap::empty(a.rows, a.cols, MapKind::diff);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a.mask[i] && b.mask[i]) {
            d.values[i] = a.values[i] - b.values[i];
            d.mask[i] = 1;
        }
    }
    return d;
}

ImageSeries generate_frames(const TrainedField& field, const std::vector<double>& times) {
    for (double t : times)
        if (!std::isfinite(t) || t < 0.0)
            throw ValidationError("generate_frames: times must be finite and >= 0");
    ImageSeries s;
    s.rows = field.rows;
    s.cols = field.cols;
    s.times = times;
    s.frames.assign(times.size(),
                    std::vector<double>(static_cast<std::size_t>(field.rows) * field.cols, 0.0));
    for (const auto& e : field.entries) {
        const std::size_t idx = static_cast<std::size_t>(e.row) * field.cols + e.col;
        for (std::size_t i = 0; i < times.size(); ++i)
            s.frames[i][idx] = forward(e.params, times[i]).value * e.scale;
    }
    return s;
}

} // namespace t2fit
