#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "t2fit/phantom.hpp"
#include "t2fit/pipeline.hpp"

using namespace t2fit;

namespace {

std::vector<double> echoes_10_90() {
    std::vector<double> t;
    for (int i = 10; i <= 90; i += 10) t.push_back(i);
    return t;
}

// small 4-tube phantom keeps the PINN tests fast
PhantomLayout small_layout() {
    PhantomLayout l;
    l.rows = 20;
    l.cols = 20;
    l.regions.push_back({5.0, 5.0, 2.5, {1.0, 60.0}});
    l.regions.push_back({5.0, 14.0, 2.5, {0.9, 30.0}});
    l.regions.push_back({14.0, 5.0, 2.5, {1.1, 15.0}});
    l.regions.push_back({14.0, 14.0, 2.5, {1.0, 5.592}});
    return l;
}

} // namespace

TEST_CASE("build_mask thresholding") {
    const Phantom ph(small_layout());
    const auto series = ph.make_series(echoes_10_90());
    const auto mask = build_mask(series, 0.0);
    // zero background: mask equals the union of the tube regions
    for (int r = 0; r < series.rows; ++r)
        for (int c = 0; c < series.cols; ++c)
            CHECK(mask.in_mask(r, c) == (ph.region_of(r, c) >= 0));

    ImageSeries uniform;
    uniform.rows = 4;
    uniform.cols = 4;
    uniform.times = {10.0, 20.0};
    uniform.frames = {std::vector<double>(16, 2.0), std::vector<double>(16, 1.0)};
    CHECK(build_mask(uniform, 0.5).mask_count() == 16);

    ImageSeries dark = uniform;
    dark.frames[0].assign(16, 0.0);
    dark.frames[1].assign(16, 0.0);
    CHECK(build_mask(dark, 0.1).mask_count() == 0);
}

TEST_CASE("map_lsq recovers the noiseless phantom exactly") {
    const Phantom ph(small_layout());
    const auto series = ph.make_series(echoes_10_90());
    const auto mask = build_mask(series, 0.0);
    const MapSet maps = map_lsq(series, mask, {});
    CHECK(maps.n_failed == 0);
    const auto truth = ph.truth_t2();
    for (int r = 0; r < series.rows; ++r) {
        for (int c = 0; c < series.cols; ++c) {
            if (!mask.in_mask(r, c)) {
                CHECK(std::isnan(maps.t2.at(r, c)));
                continue;
            }
            CHECK(std::abs(maps.t2.at(r, c) - truth.at(r, c)) / truth.at(r, c) < 1e-6);
            CHECK(maps.t2.at(r, c) > 0.0);
        }
    }
}

TEST_CASE("map_lsq on a single-voxel mask") {
    const Phantom ph(small_layout());
    const auto series = ph.make_series(echoes_10_90());
    ParameterMap mask = ParameterMap::empty(series.rows, series.cols, MapKind::residual);
    mask.set(5, 5, 1.0);
    const MapSet maps = map_lsq(series, mask, {});
    CHECK(maps.t2.mask_count() == 1);
    CHECK(std::isfinite(maps.t2.at(5, 5)));
}

TEST_CASE("map_lsq records per-voxel failures without aborting") {
    ImageSeries s;
    s.rows = 1;
    s.cols = 2;
    s.times = {10.0, 20.0, 30.0};
    s.frames = {{1.0, 1.0}, {0.6, 1.0}, {0.36, 1.0}}; // voxel 1 does not decay
    ParameterMap mask = ParameterMap::empty(1, 2, MapKind::residual);
    mask.set(0, 0, 1.0);
    mask.set(0, 1, 1.0);
    const MapSet maps = map_lsq(s, mask, {});
    CHECK(maps.n_failed == 1);
    CHECK(maps.status.at(0, 1) == VoxelStatus::non_decaying);
    CHECK(std::isfinite(maps.t2.at(0, 0)));
    CHECK(std::isnan(maps.t2.at(0, 1)));
}

TEST_CASE("map_pinn recovers the noiseless phantom and is thread-invariant") {
    const Phantom ph(small_layout());
    const auto series = ph.make_series(echoes_10_90());
    const auto mask = build_mask(series, 0.0);
    const auto grid = CollocationGrid::uniform(301, 90.0);
    TrainConfig cfg;
    cfg.seed = 42;
    cfg.max_iters = 3000;

    const PinnMapResult one = map_pinn(series, mask, grid, {0.01, 1.0}, cfg, 1);
    const PinnMapResult four = map_pinn(series, mask, grid, {0.01, 1.0}, cfg, 4);
    // bitwise equality: == on doubles would reject the NaN sentinels of
    // masked-out voxels even when the buffers are identical
    auto bits_equal = [](const std::vector<double>& a, const std::vector<double>& b) {
        return a.size() == b.size() &&
               std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    };
    CHECK(bits_equal(one.maps.t2.values, four.maps.t2.values));
    CHECK(bits_equal(one.maps.m0.values, four.maps.m0.values));

    const auto truth = ph.truth_t2();
    for (int r = 0; r < series.rows; ++r) {
        for (int c = 0; c < series.cols; ++c) {
            if (!mask.in_mask(r, c)) continue;
            const double tol = truth.at(r, c) < 10.0 ? 0.05 : 0.02;
            CHECK(std::abs(one.maps.t2.at(r, c) - truth.at(r, c)) / truth.at(r, c) < tol);
        }
    }
}

TEST_CASE("diff_map basics") {
    ParameterMap a = ParameterMap::empty(2, 2, MapKind::t2);
    a.set(0, 0, 5.0);
    a.set(0, 1, 7.0);
    ParameterMap b = ParameterMap::empty(2, 2, MapKind::t2);
    b.set(0, 0, 2.0);
    b.set(1, 0, 3.0);

    const ParameterMap d = diff_map(a, b);
    CHECK(d.kind == MapKind::diff);
    CHECK(d.mask_count() == 1);
    CHECK(d.at(0, 0) == 3.0);

    const ParameterMap self = diff_map(a, a);
    for (std::size_t i = 0; i < self.values.size(); ++i)
        if (self.mask[i]) CHECK(self.values[i] == 0.0);

    ParameterMap disjoint = ParameterMap::empty(2, 2, MapKind::t2);
    disjoint.set(1, 1, 9.0);
    CHECK(diff_map(a, disjoint).mask_count() == 0);

    ParameterMap wrong = ParameterMap::empty(3, 2, MapKind::t2);
    CHECK_THROWS_AS(diff_map(a, wrong), ValidationError);
}

TEST_CASE("lsq and pinn maps agree on the noiseless phantom") {
    const Phantom ph(small_layout());
    const auto series = ph.make_series(echoes_10_90());
    const auto mask = build_mask(series, 0.0);
    const auto grid = CollocationGrid::uniform(301, 90.0);
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.max_iters = 3000;
    const MapSet lsq = map_lsq(series, mask, {});
    const PinnMapResult pinn = map_pinn(series, mask, grid, {0.01, 1.0}, cfg, 4);
    const ParameterMap d = diff_map(lsq.t2, pinn.maps.t2);
    for (int r = 0; r < d.rows; ++r)
        for (int c = 0; c < d.cols; ++c)
            if (d.in_mask(r, c))
                CHECK(std::abs(d.at(r, c)) < 0.05 * lsq.t2.at(r, c));
}

TEST_CASE("generate_frames reproduces the data and the m0 map") {
    const Phantom ph(small_layout());
    const auto series = ph.make_series(echoes_10_90());
    const auto mask = build_mask(series, 0.0);
    const auto grid = CollocationGrid::uniform(301, 90.0);
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.max_iters = 3000;
    const PinnMapResult pinn = map_pinn(series, mask, grid, {0.01, 1.0}, cfg, 4);

    // at the training times, per-voxel MAE is bounded by the converged data loss
    const ImageSeries regen = generate_frames(pinn.field, series.times);
    for (const auto& e : pinn.field.entries) {
        double mae = 0.0;
        for (std::size_t i = 0; i < series.times.size(); ++i)
            mae += std::abs(regen.at(i, e.row, e.col) - series.at(i, e.row, e.col));
        mae /= static_cast<double>(series.times.size());
        const double budget = pinn.data_loss.at(e.row, e.col);
        CHECK(mae <= budget * (1.0 + 1e-9) + 1e-12);
    }

    // t = 0 reproduces m0_hat exactly; masked-out voxels are zero
    const ImageSeries at0 = generate_frames(pinn.field, {0.0});
    for (int r = 0; r < series.rows; ++r) {
        for (int c = 0; c < series.cols; ++c) {
            if (pinn.maps.t2.in_mask(r, c))
                CHECK(at0.at(0, r, c) == pinn.maps.m0.at(r, c));
            else
                CHECK(at0.at(0, r, c) == 0.0);
        }
    }

    // unseen times interleave between neighboring measured frames, up to
    // the fit's own misfit scale (the pure relative bound is meaningless
    // deep in the tail where the signal is ~1e-4 of the peak)
    const ImageSeries mid = generate_frames(pinn.field, {25.0, 45.0});
    for (const auto& e : pinn.field.entries) {
        const double slack = 3.0 * pinn.data_loss.at(e.row, e.col) + 1e-9;
        const double hi1 = series.at(1, e.row, e.col); // t=20
        const double lo1 = series.at(2, e.row, e.col); // t=30
        CHECK(mid.at(0, e.row, e.col) < hi1 * 1.02 + slack);
        CHECK(mid.at(0, e.row, e.col) > lo1 * 0.98 - slack);
        const double hi2 = series.at(3, e.row, e.col); // t=40
        const double lo2 = series.at(4, e.row, e.col); // t=50
        CHECK(mid.at(1, e.row, e.col) < hi2 * 1.02 + slack);
        CHECK(mid.at(1, e.row, e.col) > lo2 * 0.98 - slack);
    }
}
