#include "t2fit/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace t2fit {

namespace {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "file payloads are little-endian; big-endian hosts need byte swaps");

void write_f32(std::ostream& os, const std::vector<double>& vals) {
    std::vector<float> buf(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) buf[i] = static_cast<float>(vals[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::vector<double> read_f32(std::istream& is, std::size_t n, const std::string& what) {
    std::vector<float> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw IoError(what + ": truncated payload");
    return {buf.begin(), buf.end()};
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + p.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + p.string());
    return is;
}

// Reads "key value..." header lines up to the "data" terminator.
struct Header {
    std::map<std::string, std::string> kv;

    static Header parse(std::istream& is, const std::string& magic, const std::string& what) {
        Header h;
        std::string line;
        if (!std::getline(is, line) || line != magic + " 1")
            throw IoError(what + ": bad magic or unsupported version");
        while (std::getline(is, line)) {
            if (line == "data") return h;
            const auto sp = line.find(' ');
            if (sp == std::string::npos) throw IoError(what + ": malformed header line: " + line);
            h.kv[line.substr(0, sp)] = line.substr(sp + 1);
        }
        throw IoError(what + ": missing data section");
    }

    const std::string& get(const std::string& key, const std::string& what) const {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError(what + ": missing header field '" + key + "'");
        return it->second;
    }

    long get_int(const std::string& key, const std::string& what) const {
        return std::stol(get(key, what));
    }
    double get_double(const std::string& key, const std::string& what) const {
        return std::stod(get(key, what));
    }
    std::vector<double> get_list(const std::string& key, const std::string& what) const {
        std::istringstream ss(get(key, what));
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        return v;
    }
};

std::string fmt_times(const std::vector<double>& times) {
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t i = 0; i < times.size(); ++i) ss << (i ? " " : "") << times[i];
    return ss.str();
}

} // namespace

void write_series(const std::filesystem::path& path, const ImageSeries& series, double scale) {
    auto os = open_out(path);
    os << "T2SERIES 1\n"
       << "rows " << series.rows << "\n"
       << "cols " << series.cols << "\n"
       << "echoes " << series.times.size() << "\n"
       << "times_ms " << fmt_times(series.times) << "\n";
    os.precision(17);
    os << "scale " << scale << "\ndata\n";
    for (const auto& f : series.frames) write_f32(os, f);
    if (!os) throw IoError("write failed: " + path.string());
}

ImageSeries read_series(const std::filesystem::path& path) {
    auto is = open_in(path);
    const Header h = Header::parse(is, "T2SERIES", path.string());
    ImageSeries s;
    s.rows = static_cast<int>(h.get_int("rows", path.string()));
    s.cols = static_cast<int>(h.get_int("cols", path.string()));
    s.times = h.get_list("times_ms", path.string());
    const long n_echo = h.get_int("echoes", path.string());
    const double scale = h.get_double("scale", path.string());
    if (n_echo != static_cast<long>(s.times.size()))
        throw IoError(path.string() + ": echo count does not match times_ms");
    if (s.rows <= 0 || s.cols <= 0) throw IoError(path.string() + ": bad dims");
    for (std::size_t i = 1; i < s.times.size(); ++i)
        if (!(s.times[i] > s.times[i - 1]))
            throw IoError(path.string() + ": echo times not strictly increasing");
    for (long i = 0; i < n_echo; ++i) {
        auto frame = read_f32(is, s.n_pixels(), path.string());
        if (scale != 1.0)
            for (double& v : frame) v *= scale;
        s.frames.push_back(std::move(frame));
    }
    return s;
}

void write_map(const std::filesystem::path& path, const ParameterMap& map) {
    auto os = open_out(path);
    os << "T2MAP 1\n"
       << "rows " << map.rows << "\n"
       << "cols " << map.cols << "\n"
       << "kind " << map_kind_name(map.kind) << "\ndata\n";
    write_f32(os, map.values);
    os.write(reinterpret_cast<const char*>(map.mask.data()),
             static_cast<std::streamsize>(map.mask.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

ParameterMap read_map(const std::filesystem::path& path) {
    auto is = open_in(path);
    const Header h = Header::parse(is, "T2MAP", path.string());
    ParameterMap m;
    m.rows = static_cast<int>(h.get_int("rows", path.string()));
    m.cols = static_cast<int>(h.get_int("cols", path.string()));
    m.kind = map_kind_from_name(h.get("kind", path.string()));
    if (m.rows <= 0 || m.cols <= 0) throw IoError(path.string() + ": bad dims");
    const std::size_t n = static_cast<std::size_t>(m.rows) * m.cols;
    m.values = read_f32(is, n, path.string());
    m.mask.resize(n);
    is.read(reinterpret_cast<char*>(m.mask.data()), static_cast<std::streamsize>(n));
    if (!is) throw IoError(path.string() + ": truncated mask");
    for (std::size_t i = 0; i < n; ++i)
        if (m.mask[i] > 1) throw IoError(path.string() + ": bad mask byte");
    return m;
}

void write_field(const std::filesystem::path& path, const TrainedField& field) {
    auto os = open_out(path);
    os << "T2FIELD 1\n"
       << "rows " << field.rows << "\n"
       << "cols " << field.cols << "\n"
       << "width " << field.width << "\n";
    os.precision(17);
    os << "tmax_ms " << field.t_max << "\n"
       << "times_ms " << fmt_times(field.times) << "\n"
       << "count " << field.entries.size() << "\ndata\n";
    for (const auto& e : field.entries) {
        const std::int32_t rc[2] = {e.row, e.col};
        os.write(reinterpret_cast<const char*>(rc), sizeof rc);
        os.write(reinterpret_cast<const char*>(&e.scale), sizeof e.scale);
        const std::vector<double> flat = e.params.to_flat();
        os.write(reinterpret_cast<const char*>(flat.data()),
                 static_cast<std::streamsize>(flat.size() * sizeof(double)));
    }
    if (!os) throw IoError("write failed: " + path.string());
}

TrainedField read_field(const std::filesystem::path& path) {
    auto is = open_in(path);
    const Header h = Header::parse(is, "T2FIELD", path.string());
    TrainedField f;
    f.rows = static_cast<int>(h.get_int("rows", path.string()));
    f.cols = static_cast<int>(h.get_int("cols", path.string()));
    f.width = static_cast<int>(h.get_int("width", path.string()));
    f.t_max = h.get_double("tmax_ms", path.string());
    f.times = h.get_list("times_ms", path.string());
    const long count = h.get_int("count", path.string());
    if (f.rows <= 0 || f.cols <= 0 || f.width < 1 || !(f.t_max > 0.0) || count < 0)
        throw IoError(path.string() + ": bad field header");
    MlpParams proto;
    proto.c = f.width;
    const std::size_t np = proto.param_count();
    std::vector<double> flat(np);
    for (long i = 0; i < count; ++i) {
        TrainedField::Entry e;
        std::int32_t rc[2];
        is.read(reinterpret_cast<char*>(rc), sizeof rc);
        is.read(reinterpret_cast<char*>(&e.scale), sizeof e.scale);
        is.read(reinterpret_cast<char*>(flat.data()),
                static_cast<std::streamsize>(np * sizeof(double)));
        if (!is) throw IoError(path.string() + ": truncated field entry");
        e.row = rc[0];
        e.col = rc[1];
        if (e.row < 0 || e.row >= f.rows || e.col < 0 || e.col >= f.cols)
            throw IoError(path.string() + ": field entry out of bounds");
        e.params.c = f.width;
        e.params.t_max = f.t_max;
        e.params.from_flat(flat);
        f.entries.push_back(std::move(e));
    }
    return f;
}

ImageSeries read_series_csv(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::string line;
    auto parse_row = [&](const std::string& l) {
        std::vector<double> v;
        std::istringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(path.string() + ": bad numeric cell '" + cell + "'");
            }
        }
        return v;
    };
    if (!std::getline(is, line)) throw IoError(path.string() + ": empty CSV");
    ImageSeries s;
    s.times = parse_row(line);
    std::vector<std::vector<double>> voxels;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto row = parse_row(line);
        if (row.size() != s.times.size())
            throw IoError(path.string() + ": row length does not match echo count");
        voxels.push_back(std::move(row));
    }
    if (voxels.empty()) throw IoError(path.string() + ": no voxel rows");
    s.rows = static_cast<int>(voxels.size());
    s.cols = 1;
    s.frames.assign(s.times.size(), std::vector<double>(voxels.size()));
    for (std::size_t v = 0; v < voxels.size(); ++v)
        for (std::size_t i = 0; i < s.times.size(); ++i) s.frames[i][v] = voxels[v][i];
    return s;
}

void export_pgm(const std::filesystem::path& path, const ParameterMap& map, double window_lo,
                double window_hi) {
    if (!(window_hi > window_lo)) {
        // auto window over the masked values
        window_lo = std::numeric_limits<double>::infinity();
        window_hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < map.values.size(); ++i) {
            if (map.mask[i] && std::isfinite(map.values[i])) {
                window_lo = std::min(window_lo, map.values[i]);
                window_hi = std::max(window_hi, map.values[i]);
            }
        }
        if (!(window_hi > window_lo)) {
            window_lo = 0.0;
            window_hi = 1.0;
        }
    }
    auto os = open_out(path);
    os << "P5\n" << map.cols << " " << map.rows << "\n255\n";
    std::vector<unsigned char> px(map.values.size(), 0);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (!map.mask[i] || !std::isfinite(map.values[i])) continue;
        const double u = (map.values[i] - window_lo) / (window_hi - window_lo);
        px[i] = static_cast<unsigned char>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
    }
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

void write_status_map(const std::filesystem::path& path, const StatusMap& status) {
    ParameterMap m = ParameterMap::empty(status.rows, status.cols, MapKind::residual);
    for (std::size_t i = 0; i < status.status.size(); ++i) {
        m.values[i] = static_cast<double>(status.status[i]);
        m.mask[i] = status.status[i] == VoxelStatus::masked_out ? 0 : 1;
    }
    write_map(path, m);
}

PhantomLayout read_phantom_config(const std::filesystem::path& path) {
    auto is = open_in(path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    PhantomLayout l;
    try {
        l.rows = j.at("rows").get<int>();
        l.cols = j.at("cols").get<int>();
        for (const auto& r : j.at("regions")) {
            DiskRegion d;
            d.center_row = r.at("center_row").get<double>();
            d.center_col = r.at("center_col").get<double>();
            d.radius = r.at("radius").get<double>();
            d.params.m0 = r.at("m0").get<double>();
            d.params.t2 = r.at("t2_ms").get<double>();
            l.regions.push_back(d);
        }
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    l.validate();
    return l;
}

void write_phantom_config(const std::filesystem::path& path, const PhantomLayout& layout) {
    json j;
    j["rows"] = layout.rows;
    j["cols"] = layout.cols;
    j["regions"] = json::array();
    for (const auto& r : layout.regions) {
        j["regions"].push_back({{"center_row", r.center_row},
                                {"center_col", r.center_col},
                                {"radius", r.radius},
                                {"m0", r.params.m0},
                                {"t2_ms", r.params.t2}});
    }
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

FitConfig default_fit_config() { return FitConfig{}; }

FitConfig read_fit_config(const std::filesystem::path& path) {
    auto is = open_in(path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    FitConfig c;
    auto pick = [&](const char* section, const char* key, auto& dst) {
        if (j.contains(section) && j[section].contains(key)) {
            try {
                dst = j[section][key].get<std::decay_t<decltype(dst)>>();
            } catch (const json::exception& e) {
                throw ValidationError(path.string() + ": bad value for " + std::string(section) +
                                      "." + key + ": " + e.what());
            }
        } else {
            c.defaulted.push_back(std::string(section) + "." + key);
        }
    };
    pick("weights", "w_bloch", c.weights.w_bloch);
    pick("weights", "w_data", c.weights.w_data);
    pick("train", "max_iters", c.train.max_iters);
    pick("train", "learning_rate", c.train.learning_rate);
    pick("train", "beta1", c.train.beta1);
    pick("train", "beta2", c.train.beta2);
    pick("train", "epsilon", c.train.epsilon);
    pick("train", "tol", c.train.tol);
    pick("train", "t2_init_ms", c.train.t2_init);
    pick("train", "seed", c.train.seed);
    pick("train", "width", c.train.width);
    pick("train", "collocation", c.train.collocation);
    std::string norm = "absolute";
    pick("train", "residual_norm", norm);
    if (norm == "absolute")
        c.train.norm = ResidualNorm::absolute;
    else if (norm == "squared")
        c.train.norm = ResidualNorm::squared;
    else
        throw ValidationError(path.string() + ": residual_norm must be 'absolute' or 'squared'");
    std::string method = "log_linear";
    pick("lsq", "method", method);
    if (method == "log_linear")
        c.lsq.method = LsqMethod::log_linear;
    else if (method == "nonlinear_refined")
        c.lsq.method = LsqMethod::nonlinear_refined;
    else
        throw ValidationError(path.string() + ": lsq.method must be 'log_linear' or 'nonlinear_refined'");
    pick("lsq", "min_signal", c.lsq.min_signal);
    pick("lsq", "max_gn_iters", c.lsq.max_gn_iters);
    pick("lsq", "gn_tol", c.lsq.gn_tol);
    pick("mask", "threshold", c.mask_threshold);
    c.weights.validate();
    c.train.validate();
    c.lsq.validate();
    return c;
}

void write_manifest(const std::filesystem::path& path, const std::string& method,
                    const std::filesystem::path& series_path, const FitConfig& cfg, int threads,
                    double wall_seconds, const MapSet& maps) {
    json j;
    j["format"] = "t2fit-manifest-1";
    j["method"] = method;
    j["series"] = series_path.string();
    j["threads"] = threads;
    j["wall_seconds"] = wall_seconds;
    j["config"] = {
        {"weights", {{"w_bloch", cfg.weights.w_bloch}, {"w_data", cfg.weights.w_data}}},
        {"train",
         {{"max_iters", cfg.train.max_iters},
          {"learning_rate", cfg.train.learning_rate},
          {"beta1", cfg.train.beta1},
          {"beta2", cfg.train.beta2},
          {"epsilon", cfg.train.epsilon},
          {"tol", cfg.train.tol},
          {"t2_init_ms", cfg.train.t2_init},
          {"seed", cfg.train.seed},
          {"width", cfg.train.width},
          {"collocation", cfg.train.collocation},
          {"residual_norm",
           cfg.train.norm == ResidualNorm::absolute ? "absolute" : "squared"}}},
        {"lsq",
         {{"method", cfg.lsq.method == LsqMethod::log_linear ? "log_linear" : "nonlinear_refined"},
          {"min_signal", cfg.lsq.min_signal},
          {"max_gn_iters", cfg.lsq.max_gn_iters},
          {"gn_tol", cfg.lsq.gn_tol}}},
        {"mask", {{"threshold", cfg.mask_threshold}}},
    };
    j["defaulted_keys"] = cfg.defaulted;
    std::size_t fitted = 0;
    for (auto s : maps.status.status)
        if (s == VoxelStatus::ok) ++fitted;
    j["stats"] = {{"voxels_fitted", fitted}, {"voxels_failed", maps.n_failed}};
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

} // namespace t2fit
