#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "t2fit/phantom.hpp"
#include "t2fit/pipeline.hpp"

namespace t2fit {

// File formats. All payloads are little-endian. Series and map files carry
// a line-oriented text header terminated by a "data" line, followed by the
// binary payload: 32-bit floats, frame-major then row-major. Map files
// append one mask byte (0/1) per pixel after the floats; masked-out float
// entries are NaN.

void write_series(const std::filesystem::path& path, const ImageSeries& series,
                  double scale = 1.0);
ImageSeries read_series(const std::filesystem::path& path);

void write_map(const std::filesystem::path& path, const ParameterMap& map);
ParameterMap read_map(const std::filesystem::path& path);

// Trained-field file: text header (dims, width, t_max, echo times, entry
// count, format version), then per entry int32 row, int32 col, float64
// scale and the float64 network parameters in flat order
// (w1, b1, w2 row-major, b2, w3, b3, rho).
void write_field(const std::filesystem::path& path, const TrainedField& field);
TrainedField read_field(const std::filesystem::path& path);

// CSV import for single-voxel experiments: first row = echo times in ms,
// each further row = one voxel's signals. The result has one image row
// per voxel and a single column.
ImageSeries read_series_csv(const std::filesystem::path& path);

// 8-bit grayscale export (binary PGM). Values map linearly from
// [window_lo, window_hi] to [0, 255]; masked-out pixels are 0. Pass
// lo >= hi to auto-window to the masked value range.
void export_pgm(const std::filesystem::path& path, const ParameterMap& map, double window_lo = 0.0,
                double window_hi = 0.0);

void write_status_map(const std::filesystem::path& path, const StatusMap& status);

// JSON configs -------------------------------------------------------------

PhantomLayout read_phantom_config(const std::filesystem::path& path);
void write_phantom_config(const std::filesystem::path& path, const PhantomLayout& layout);

// Everything cmd_fit needs; keys missing from the file keep the defaults
// below and are reported in `defaulted` for the run manifest.
struct FitConfig {
    LossWeights weights;
    TrainConfig train;
    LsqOptions lsq;
    double mask_threshold = 0.05;
    std::vector<std::string> defaulted;
};

FitConfig read_fit_config(const std::filesystem::path& path);
FitConfig default_fit_config();

// Serialized run description sufficient to reproduce a fit bit-identically.
void write_manifest(const std::filesystem::path& path, const std::string& method,
                    const std::filesystem::path& series_path, const FitConfig& cfg, int threads,
                    double wall_seconds, const MapSet& maps);

} // namespace t2fit
