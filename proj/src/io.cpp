#include "ghostdiff/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>
#include <Eigen/Core>

#include "json.hpp"

#include "ghostdiff/version.hpp"

namespace gd::io {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double_strict(const std::string& text) {
    std::string t = trim(text);
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        fail("'" + text + "' is not a number");
    return v;
}

long parse_long_strict(const std::string& text) {
    std::string t = trim(text);
    long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        fail("'" + text + "' is not an integer");
    return v;
}

std::uint64_t parse_u64_strict(const std::string& text) {
    std::string t = trim(text);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        fail("'" + text + "' is not an unsigned integer");
    return v;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) fail("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) fail("format_double: value does not fit");
    return {buf, p};
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& data,
               const std::vector<std::string>& metadata) {
    if (columns.size() != data.size())
        fail("write_csv: " + std::to_string(columns.size()) + " column names for " +
             std::to_string(data.size()) + " columns");
    std::size_t rows = data.empty() ? 0 : data[0].size();
    for (const auto& col : data)
        if (col.size() != rows) fail("write_csv: ragged columns");
    auto out = open_out(path, std::ios::binary);  // binary: byte-identical output everywhere
    for (const auto& m : metadata) out << "# " << m << '\n';
    for (std::size_t c = 0; c < columns.size(); ++c)
        out << columns[c] << (c + 1 < columns.size() ? ',' : '\n');
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < data.size(); ++c)
            out << format_double(data[c][r]) << (c + 1 < data.size() ? ',' : '\n');
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    bool have_header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!have_header) {
            for (auto& c : cells) t.columns.push_back(trim(c));
            t.data.resize(t.columns.size());
            have_header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            fail(path + ":" + std::to_string(lineno) + ": expected " +
                 std::to_string(t.columns.size()) + " cells, got " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                t.data[c].push_back(parse_double_strict(cells[c]));
            } catch (const std::exception& e) {
                fail(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    if (!have_header) fail(path + ": no header row");
    return t;
}

void write_intensity_pgm(const std::string& path, const IntensityMap& m) {
    int w = m.grid.n;
    int h = m.grid.dims == 2 ? m.grid.n : 1;
    double peak = 0.0;
    for (double v : m.values) peak = std::max(peak, v);
    auto out = open_out(path, std::ios::binary);
    out << "P5\n" << w << ' ' << h << "\n65535\n";
    std::vector<unsigned char> row(std::size_t(w) * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = m.values[std::size_t(y) * w + x];
            unsigned p = 0;
            if (peak > 0.0 && v > 0.0)
                p = unsigned(std::min<long>(65535, std::lround(v / peak * 65535.0)));
            row[std::size_t(x) * 2] = (unsigned char) (p >> 8);  // big-endian per PGM
            row[std::size_t(x) * 2 + 1] = (unsigned char) (p & 0xff);
        }
        out.write((const char*) row.data(), std::streamsize(row.size()));
    }
    auto side = open_out(path + ".scale.txt", std::ios::binary);
    side << "# linear intensity scale: intensity = pixel / 65535 * peak\n"
         << "peak = " << format_double(peak) << '\n'
         << "dx = " << format_double(m.grid.dx) << '\n';
}

ParsedConfig parse_key_value_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");
    ParsedConfig pc;
    pc.path = path;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string body = trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            fail(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty())
            fail(path + ":" + std::to_string(lineno) + ": empty key");
        if (pc.entries.count(key))
            fail(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "' (first at line " +
                 std::to_string(pc.entries[key].line) + ")");
        pc.entries[key] = {value, lineno};
    }
    return pc;
}

double parse_length(const std::string& text) {
    std::string t = trim(text);
    double scale = 1.0;
    for (auto [suffix, s] : {std::pair<const char*, double>{"nm", 1e-9},
                             {"um", 1e-6},
                             {"mm", 1e-3},
                             {"m", 1.0}}) {
        std::size_t len = std::string(suffix).size();
        if (t.size() > len && t.compare(t.size() - len, len, suffix) == 0) {
            scale = s;
            t = trim(t.substr(0, t.size() - len));
            break;
        }
    }
    return parse_double_strict(t) * scale;
}

double parse_phase(const std::string& text) {
    std::string t = trim(text);
    if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
        std::string head = trim(t.substr(0, t.size() - 2));
        if (head.empty()) return M_PI;
        if (head == "-") return -M_PI;
        return parse_double_strict(head) * M_PI;
    }
    return parse_double_strict(t);
}

namespace {

const char* to_string(SpeckleMethod m) {
    return m == SpeckleMethod::physical ? "physical" : "spectral";
}

/// One pending config entry with enough context for a pointed diagnostic.
struct EntryView {
    std::string key;
    std::string value;
    std::string where;  // "path:line: " or "override: "
};

class EntrySet {
  public:
    explicit EntrySet(const ParsedConfig& pc) {
        for (const auto& [key, e] : pc.entries) {
            std::string where = e.line > 0 ? pc.path + ":" + std::to_string(e.line) + ": "
                                           : pc.path + ": ";
            entries_.push_back({key, e.value, where});
        }
    }

    /// Consume `key`; returns false if absent. `parse` may throw a bare
    /// message, which gets the location and key prepended.
    template <typename F>
    bool take(const std::string& key, F&& parse) {
        auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const EntryView& e) { return e.key == key; });
        if (it == entries_.end()) return false;
        try {
            parse(it->value);
        } catch (const std::exception& ex) {
            fail(it->where + "key '" + key + "': " + ex.what());
        }
        entries_.erase(it);
        return true;
    }

    void reject_leftovers() const {
        if (entries_.empty()) return;
        const EntryView& e = entries_.front();
        if (e.key.rfind("object.", 0) == 0)
            fail(e.where + "key '" + e.key + "' does not apply to this object.type");
        fail(e.where + "unrecognized key '" + e.key + "'");
    }

  private:
    std::vector<EntryView> entries_;
};

void apply_entries(ScenarioConfig& cfg, const ParsedConfig& pc) {
    EntrySet es(pc);

    es.take("name", [&](const std::string& v) {
        if (v.empty()) fail("name must not be empty");
        cfg.name = v;
    });
    es.take("experiment", [&](const std::string& v) {
        if (v == "ghost_diffraction") cfg.experiment = ExperimentKind::ghost_diffraction;
        else if (v == "coherence_transition") cfg.experiment = ExperimentKind::coherence_transition;
        else if (v == "coherent_limit") cfg.experiment = ExperimentKind::coherent_limit;
        else if (v == "oracle_suite") cfg.experiment = ExperimentKind::oracle_suite;
        else fail("'" + v + "' is not an experiment (ghost_diffraction, coherence_transition, "
                  "coherent_limit, oracle_suite)");
    });
    es.take("grid.dims", [&](const std::string& v) { cfg.grid.dims = int(parse_long_strict(v)); });
    es.take("grid.n", [&](const std::string& v) { cfg.grid.n = int(parse_long_strict(v)); });
    es.take("grid.dx", [&](const std::string& v) { cfg.grid.dx = parse_length(v); });
    // Revalidate through the checked constructor so bad combinations are
    // rejected here, with a file location, rather than deep inside a runner.
    cfg.grid = Grid(cfg.grid.dims, cfg.grid.n, cfg.grid.dx);

    es.take("source.method", [&](const std::string& v) {
        if (v == "physical") cfg.source.method = SpeckleMethod::physical;
        else if (v == "spectral") cfg.source.method = SpeckleMethod::spectral;
        else fail("'" + v + "' is not a source method (physical, spectral)");
    });
    es.take("source.D0", [&](const std::string& v) { cfg.source.D0 = parse_length(v); });
    es.take("source.z", [&](const std::string& v) { cfg.source.z = parse_length(v); });
    es.take("source.lambda", [&](const std::string& v) { cfg.source.lambda = parse_length(v); });
    es.take("source.target_dx_speckle",
            [&](const std::string& v) { cfg.source.target_dx_speckle = parse_length(v); });
    es.take("diaphragm.D", [&](const std::string& v) { cfg.diaphragm_D = parse_length(v); });
    es.take("arm.f", [&](const std::string& v) { cfg.fourier_f = parse_length(v); });

    std::string obj_type = "phase_double_slit";
    if (const auto* pd = std::get_if<PhaseDescriptor>(&cfg.object)) {
        if (std::holds_alternative<PhaseStep>(*pd)) obj_type = "phase_step";
        else if (std::holds_alternative<PhaseGrating>(*pd)) obj_type = "phase_grating";
        else if (std::holds_alternative<PhaseCustom>(*pd)) obj_type = "phase_csv";
    } else if (const auto* ad = std::get_if<AmplitudeDescriptor>(&cfg.object)) {
        obj_type = std::holds_alternative<AmplitudeDoubleSlit>(*ad) ? "amplitude_double_slit"
                                                                    : "amplitude_single_slit";
    }
    es.take("object.type", [&](const std::string& v) {
        static const char* known[] = {"phase_double_slit", "phase_step", "phase_grating",
                                      "phase_csv", "amplitude_double_slit", "amplitude_single_slit"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return v == k; }) == std::end(known))
            fail("'" + v + "' is not an object type");
        obj_type = v;
    });

    double phi = M_PI, slit_width = 160e-6, separation = 530e-6;
    double step_width = 690e-6, period = 160e-6;
    std::string csv_file;
    if (obj_type == "phase_double_slit" || obj_type == "amplitude_double_slit" ||
        obj_type == "amplitude_single_slit") {
        es.take("object.phi", [&](const std::string& v) { phi = parse_phase(v); });
        es.take("object.slit_width", [&](const std::string& v) { slit_width = parse_length(v); });
        es.take("object.separation", [&](const std::string& v) { separation = parse_length(v); });
    } else if (obj_type == "phase_step") {
        es.take("object.phi", [&](const std::string& v) { phi = parse_phase(v); });
        es.take("object.width", [&](const std::string& v) { step_width = parse_length(v); });
    } else if (obj_type == "phase_grating") {
        es.take("object.phi", [&](const std::string& v) { phi = parse_phase(v); });
        es.take("object.period", [&](const std::string& v) { period = parse_length(v); });
        es.take("object.width", [&](const std::string& v) { step_width = parse_length(v); });
    } else if (obj_type == "phase_csv") {
        es.take("object.file", [&](const std::string& v) { csv_file = v; });
    }
    if (obj_type == "phase_double_slit")
        cfg.object = PhaseDescriptor{PhaseDoubleSlit{phi, slit_width, separation}};
    else if (obj_type == "amplitude_double_slit")
        cfg.object = AmplitudeDescriptor{AmplitudeDoubleSlit{slit_width, separation}};
    else if (obj_type == "amplitude_single_slit")
        cfg.object = AmplitudeDescriptor{AmplitudeSingleSlit{slit_width}};
    else if (obj_type == "phase_step")
        cfg.object = PhaseDescriptor{PhaseStep{phi, step_width}};
    else if (obj_type == "phase_grating")
        cfg.object = PhaseDescriptor{PhaseGrating{phi, period, step_width}};
    else if (obj_type == "phase_csv") {
        if (csv_file.empty()) fail(pc.path + ": object.type phase_csv requires object.file");
        CsvTable t = read_csv(csv_file);
        if (t.data.empty()) fail(csv_file + ": no columns");
        cfg.object = PhaseDescriptor{PhaseCustom{t.data[0]}};
    }

    es.take("frames", [&](const std::string& v) {
        long f = parse_long_strict(v);
        if (f < 1) fail("frame count must be >= 1");
        cfg.frames = f;
    });
    es.take("seed", [&](const std::string& v) { cfg.seed = parse_u64_strict(v); });
    es.take("workers", [&](const std::string& v) {
        long w = parse_long_strict(v);
        if (w < 0) fail("worker count must be >= 0");
        cfg.workers = int(w);
    });
    es.take("sweep.D0", [&](const std::string& v) {
        std::vector<double> vals;
        std::size_t start = 0;
        while (start <= v.size()) {
            auto comma = v.find(',', start);
            std::string cell = v.substr(start, comma - start);
            if (!trim(cell).empty()) vals.push_back(parse_length(cell));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (vals.empty()) fail("sweep.D0 needs at least one value");
        cfg.d0_sweep = vals;
    });
    es.take("sweep.frames", [&](const std::string& v) {
        long f = parse_long_strict(v);
        if (f < 2) fail("sweep frame count must be >= 2");
        cfg.sweep_frames = f;
    });
    es.take("report.fringe_window", [&](const std::string& v) { cfg.fringe_outer = parse_length(v); });
    es.take("report.compare_halfwidth",
            [&](const std::string& v) { cfg.compare_halfwidth = parse_length(v); });

    es.reject_leftovers();
}

}  // namespace

ScenarioConfig scenario_from_entries(const ParsedConfig& pc) {
    ScenarioConfig cfg;
    apply_entries(cfg, pc);
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    return scenario_from_entries(parse_key_value_file(path));
}

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        fail("override '" + assignment + "': expected key=value");
    ParsedConfig pc;
    pc.path = "override";
    pc.entries[trim(assignment.substr(0, eq))] = {trim(assignment.substr(eq + 1)), 0};
    apply_entries(cfg, pc);
}

std::string scenario_signature(const ScenarioConfig& cfg) {
    std::ostringstream out;
    out << "name=" << cfg.name << '\n'
        << "experiment=" << gd::to_string(cfg.experiment) << '\n'
        << "grid.dims=" << cfg.grid.dims << '\n'
        << "grid.n=" << cfg.grid.n << '\n'
        << "grid.dx=" << format_double(cfg.grid.dx) << '\n'
        << "source.method=" << to_string(cfg.source.method) << '\n'
        << "source.D0=" << format_double(cfg.source.D0) << '\n'
        << "source.z=" << format_double(cfg.source.z) << '\n'
        << "source.lambda=" << format_double(cfg.source.lambda) << '\n'
        << "source.target_dx_speckle=" << format_double(cfg.source.target_dx_speckle) << '\n'
        << "diaphragm.D=" << format_double(cfg.diaphragm_D) << '\n';
    if (const auto* pd = std::get_if<PhaseDescriptor>(&cfg.object)) {
        if (const auto* s = std::get_if<PhaseStep>(pd))
            out << "object=phase_step," << format_double(s->phi) << ',' << format_double(s->width);
        else if (const auto* g = std::get_if<PhaseGrating>(pd))
            out << "object=phase_grating," << format_double(g->phi) << ','
                << format_double(g->period) << ',' << format_double(g->width);
        else if (const auto* d = std::get_if<PhaseDoubleSlit>(pd))
            out << "object=phase_double_slit," << format_double(d->phi) << ','
                << format_double(d->slit_width) << ',' << format_double(d->separation);
        else if (const auto* c = std::get_if<PhaseCustom>(pd)) {
            out << "object=phase_csv";
            for (double v : c->phase) out << ',' << format_double(v);
        }
    } else if (const auto* ad = std::get_if<AmplitudeDescriptor>(&cfg.object)) {
        if (const auto* d = std::get_if<AmplitudeDoubleSlit>(ad))
            out << "object=amplitude_double_slit," << format_double(d->slit_width) << ','
                << format_double(d->separation);
        else if (const auto* s = std::get_if<AmplitudeSingleSlit>(ad))
            out << "object=amplitude_single_slit," << format_double(s->slit_width);
    }
    out << '\n'
        << "arm.f=" << format_double(cfg.fourier_f) << '\n'
        << "frames=" << cfg.frames << '\n'
        << "seed=" << cfg.seed << '\n';
    out << "sweep.D0=";
    for (std::size_t i = 0; i < cfg.d0_sweep.size(); ++i)
        out << (i ? "," : "") << format_double(cfg.d0_sweep[i]);
    out << '\n'
        << "sweep.frames=" << cfg.sweep_frames << '\n'
        << "report.fringe_window=" << format_double(cfg.fringe_outer) << '\n'
        << "report.compare_halfwidth=" << format_double(cfg.compare_halfwidth) << '\n';
    // workers and out_dir are deliberately left out: they do not change any
    // computed value, so equal physics hashes equal.
    return out.str();
}

std::string config_hash(const ScenarioConfig& cfg) {
    std::string sig = scenario_signature(cfg);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : sig) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long) h);
    return buf;
}

RunManifest make_manifest(const ScenarioConfig& cfg, const ScenarioReport& report) {
    RunManifest m;
    m.scenario_name = cfg.name;
    m.experiment = gd::to_string(cfg.experiment);
    m.config_hash = config_hash(cfg);
    m.seed = cfg.seed;
    m.workers = resolve_workers(cfg.workers);
    m.tool_version = GHOSTDIFF_VERSION;
    m.fftw_version = fftw_version;
    m.eigen_version = std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
    m.wall_seconds = report.wall_seconds;
    m.outputs = report.artifacts;
    for (const auto& a : report.assertions) m.checks.emplace_back(a.name, a.pass);
    m.all_pass = report.all_pass;
    return m;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j;
    j["scenario"] = m.scenario_name;
    j["experiment"] = m.experiment;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["workers"] = m.workers;
    j["versions"] = {{"ghostdiff", m.tool_version},
                     {"fftw", m.fftw_version},
                     {"eigen", m.eigen_version}};
    j["wall_seconds"] = m.wall_seconds;
    j["outputs"] = m.outputs;
    nlohmann::json checks = nlohmann::json::object();
    for (const auto& [name, pass] : m.checks) checks[name] = pass;
    j["checks"] = checks;
    j["all_pass"] = m.all_pass;
    auto out = open_out(path, std::ios::binary);
    out << j.dump(2) << '\n';
}

}  // namespace gd::io
