#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ghostdiff/experiments.hpp"
#include "ghostdiff/field.hpp"

namespace gd::io {

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

/// Column-oriented CSV with a header row; `metadata` lines are written first,
/// each prefixed with "# ". Values round-trip bit-exactly through read_csv.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& data,
               const std::vector<std::string>& metadata = {});

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // column-major, data[c][row]
};
CsvTable read_csv(const std::string& path);

/// 16-bit binary PGM (big-endian, maxval 65535) scaled to the map's peak,
/// plus a "<path>.scale.txt" sidecar recording the peak value so absolute
/// intensities can be reconstructed. 1D maps write a height-1 image.
void write_intensity_pgm(const std::string& path, const IntensityMap& m);

/// "key = value" file with '#' comments and blank lines. Keys keep the line
/// number they came from so later validation can point at the source line.
struct ConfigEntry {
    std::string value;
    int line = 0;
};
struct ParsedConfig {
    std::string path;
    std::map<std::string, ConfigEntry> entries;
};
ParsedConfig parse_key_value_file(const std::string& path);

/// Length with an optional unit suffix: "6um", "0.395m", "532nm", "3mm",
/// bare numbers are meters.
double parse_length(const std::string& text);

/// Phase in radians; accepts "pi" multiples ("pi", "0.5pi", "-2pi").
double parse_phase(const std::string& text);

/// Build a scenario from a parsed file. Unknown keys and malformed values
/// throw with a "path:line:" prefix.
ScenarioConfig scenario_from_entries(const ParsedConfig& pc);
ScenarioConfig load_scenario(const std::string& path);

/// Apply one "dotted.key=value" override (the CLI --set form) using the same
/// schema as the scenario file.
void apply_override(ScenarioConfig& cfg, const std::string& assignment);

/// Canonical, whitespace-free rendering of every config field; equal configs
/// produce equal text. The manifest hashes this.
std::string scenario_signature(const ScenarioConfig& cfg);

/// FNV-1a 64-bit over the canonical signature, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

/// Everything a rerun needs to identify and reproduce one invocation.
/// cmd_run emits exactly one manifest per run directory.
struct RunManifest {
    std::string scenario_name;
    std::string experiment;
    std::string config_hash;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string tool_version;
    std::string fftw_version;
    std::string eigen_version;
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, bool>> checks;
    bool all_pass = true;
};
RunManifest make_manifest(const ScenarioConfig& cfg, const ScenarioReport& report);
void write_manifest(const std::string& path, const RunManifest& m);

}  // namespace gd::io
