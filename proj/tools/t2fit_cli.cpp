// t2fit: T2 parameter mapping from multi-echo series.
//
// Exit codes: 0 success, 2 validation/config error, 3 I/O or format error,
// 4 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "t2fit/io.hpp"

using namespace t2fit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bare config filenames that do not exist locally are searched in
// $T2FIT_CONFIG_DIR.
fs::path resolve_config(const std::string& name) {
    fs::path p(name);
    if (fs::exists(p)) return p;
    if (const char* dir = std::getenv("T2FIT_CONFIG_DIR")) {
        const fs::path alt = fs::path(dir) / p.filename();
        if (fs::exists(alt)) return alt;
    }
    return p; // let the reader produce the error message
}

ImageSeries load_series(const fs::path& path) {
    if (path.extension() == ".csv") return read_series_csv(path);
    return read_series(path);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json map_stats(const ParameterMap& map, const ParameterMap& reference) {
    // groups masked voxels by distinct reference value (per-region stats on
    // phantom truth maps); reference == map gives global stats only
    std::map<double, std::vector<double>> by_region;
    double max_abs = 0.0;
    std::vector<double> all;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (!map.mask[i] || !reference.mask[i]) continue;
        const double ref = reference.values[i];
        const double rel = ref != 0.0 ? std::abs(map.values[i] - ref) / std::abs(ref)
                                      : std::abs(map.values[i]);
        by_region[ref].push_back(rel);
        all.push_back(rel);
        max_abs = std::max(max_abs, std::abs(map.values[i] - ref));
    }
    json regions = json::array();
    for (auto& [ref, errs] : by_region) {
        regions.push_back({{"reference_value", ref},
                           {"voxels", errs.size()},
                           {"median_rel_error", median(errs)}});
    }
    return {{"voxels", all.size()},
            {"max_abs_diff", max_abs},
            {"median_rel_error", all.empty() ? 0.0 : median(all)},
            {"regions", regions}};
}

int run(int argc, char** argv) {
    CLI::App app{"T2 parameter mapping from multi-echo MR image series"};
    app.require_subcommand(1);

    // simulate ------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "synthesize a phantom series with known truth");
    std::string sim_config, sim_out = "phantom", sim_noise = "gaussian";
    std::vector<double> sim_times;
    double sim_sigma = 0.0;
    std::uint64_t sim_seed = 0;
    sim->add_option("--config", sim_config, "phantom layout JSON (default: built-in 14-tube 64x64)");
    sim->add_option("--times", sim_times, "echo times in ms (default 2 4 8 14 24 40 70 120 200)");
    sim->add_option("--noise", sim_noise, "none | gaussian | rician")
        ->check(CLI::IsMember({"none", "gaussian", "rician"}));
    sim->add_option("--sigma", sim_sigma, "noise sigma as a fraction of m0");
    sim->add_option("--seed", sim_seed, "noise seed");
    sim->add_option("--out", sim_out, "output prefix");

    // fit -----------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "fit T2/M0 maps voxel-wise");
    std::string fit_method = "lsq", fit_series, fit_config, fit_out = "fit";
    int fit_threads = 4;
    std::uint64_t fit_seed = 0;
    fit->add_option("--method", fit_method, "lsq | pinn")
        ->check(CLI::IsMember({"lsq", "pinn"}));
    fit->add_option("series", fit_series, "input series (.t2s or .csv)")->required();
    fit->add_option("--config", fit_config, "fit configuration JSON");
    fit->add_option("--out", fit_out, "output prefix");
    fit->add_option("--threads", fit_threads, "worker threads (results identical for any count)");
    fit->add_option("--seed", fit_seed, "override the training seed");

    // generate ------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "synthesize frames from a trained field");
    std::string gen_field, gen_out = "generated.t2s";
    std::vector<double> gen_times;
    gen->add_option("field", gen_field, "trained field file (.t2f)")->required();
    gen->add_option("--times", gen_times, "times in ms")->required();
    gen->add_option("--out", gen_out, "output series file");

    // diff ----------------------------------------------------------------
    auto* dif = app.add_subcommand("diff", "entrywise difference of two maps");
    std::string diff_a, diff_b, diff_out = "diff.t2m", diff_pgm;
    dif->add_option("a", diff_a)->required();
    dif->add_option("b", diff_b)->required();
    dif->add_option("--out", diff_out, "output diff map");
    dif->add_option("--pgm", diff_pgm, "also export the diff as 8-bit grayscale PGM");

    // score ---------------------------------------------------------------
    auto* sco = app.add_subcommand("score", "compare a map against ground truth");
    std::string score_map, score_truth, score_pgm;
    sco->add_option("map", score_map)->required();
    sco->add_option("truth", score_truth)->required();
    sco->add_option("--pgm", score_pgm, "also export the scored map as PGM");

    CLI11_PARSE(app, argc, argv);

    if (*sim) {
        const PhantomLayout layout = sim_config.empty()
                                         ? default_phantom_layout()
                                         : read_phantom_config(resolve_config(sim_config));
        if (sim_times.empty()) sim_times = default_echo_times();
        NoiseSpec noise;
        noise.sigma = sim_sigma;
        noise.seed = sim_seed;
        if (sim_noise == "none") noise.kind = NoiseKind::none;
        else if (sim_noise == "gaussian") noise.kind = NoiseKind::gaussian;
        else noise.kind = NoiseKind::rician;

        const Phantom ph(layout);
        write_series(fs::path(sim_out + ".t2s"), ph.make_series(sim_times, noise));
        write_map(fs::path(sim_out + "_truth_t2.t2m"), ph.truth_t2());
        write_map(fs::path(sim_out + "_truth_m0.t2m"), ph.truth_m0());
        std::cout << "wrote " << sim_out << ".t2s (+truth maps), " << sim_times.size()
                  << " echoes, " << layout.rows << "x" << layout.cols << "\n";
        return 0;
    }

    if (*fit) {
        FitConfig cfg = fit_config.empty() ? default_fit_config()
                                           : read_fit_config(resolve_config(fit_config));
        if (fit->count("--seed") > 0) cfg.train.seed = fit_seed;
        const ImageSeries series = load_series(fit_series);
        const ParameterMap mask = build_mask(series, cfg.mask_threshold);
        if (mask.mask_count() == 0) {
            std::cerr << "fit: mask is empty (all-zero first frame?)\n";
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        MapSet maps;
        if (fit_method == "lsq") {
            maps = map_lsq(series, mask, cfg.lsq, fit_threads);
        } else {
            const auto grid =
                CollocationGrid::uniform(cfg.train.collocation, series.times.back());
            PinnMapResult r = map_pinn(series, mask, grid, cfg.weights, cfg.train, fit_threads);
            write_field(fs::path(fit_out + "_field.t2f"), r.field);
            write_map(fs::path(fit_out + "_dataloss.t2m"), r.data_loss);
            maps = std::move(r.maps);
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_map(fs::path(fit_out + "_t2.t2m"), maps.t2);
        write_map(fs::path(fit_out + "_m0.t2m"), maps.m0);
        write_status_map(fs::path(fit_out + "_status.t2m"), maps.status);
        write_manifest(fs::path(fit_out + "_manifest.json"), fit_method, fit_series, cfg,
                       fit_threads, wall, maps);
        std::cout << "fitted " << maps.t2.mask_count() << " voxels (" << maps.n_failed
                  << " failed) in " << wall << " s\n";
        return 0;
    }

    if (*gen) {
        const TrainedField field = read_field(gen_field);
        write_series(gen_out, generate_frames(field, gen_times));
        std::cout << "wrote " << gen_out << " with " << gen_times.size() << " frames\n";
        return 0;
    }

    if (*dif) {
        const ParameterMap d = diff_map(read_map(diff_a), read_map(diff_b));
        write_map(diff_out, d);
        if (!diff_pgm.empty()) export_pgm(diff_pgm, d);
        double max_abs = 0.0;
        for (std::size_t i = 0; i < d.values.size(); ++i)
            if (d.mask[i]) max_abs = std::max(max_abs, std::abs(d.values[i]));
        json report = {{"voxels", d.mask_count()}, {"max_abs_diff", max_abs}};
        if (d.mask_count() == 0) report["warning"] = "empty joint mask";
        std::cout << report.dump(2) << "\n";
        return 0;
    }

    if (*sco) {
        const ParameterMap m = read_map(score_map);
        const ParameterMap truth = read_map(score_truth);
        if (m.rows != truth.rows || m.cols != truth.cols)
            throw ValidationError("score: dimension mismatch");
        if (!score_pgm.empty()) export_pgm(score_pgm, m);
        std::cout << map_stats(m, truth).dump(2) << "\n";
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
