#pragma once
// Scenario files in, telemetry files out.
//
// Scenario documents are JSON objects with the sections arena, payload,
// robots, planners, fields, obstacles, target and run. Every key is optional;
// missing keys keep the defaults of the config structs. Unknown keys are errors.

#include "mmt/sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mmt::io {

/// Parses and checks a scenario document. Throws ScenarioError carrying every
/// finding; syntax errors carry "<source>:<line>:<column>".
[[nodiscard]] sim::Scenario parse_scenario(std::string_view text, const std::string& source = "<memory>");

/// Reads `path`, then parse_scenario.
[[nodiscard]] sim::Scenario load_scenario(const std::filesystem::path& path);

/// Serializes every field parse_scenario understands; parse(dump(s)) == s.
[[nodiscard]] std::string dump_scenario(const sim::Scenario& s);

/// Shortest round-trippable form for a double with 17 significant digits.
[[nodiscard]] std::string format_double(double v);

/// Column names of the per-tick CSV, in order.
[[nodiscard]] std::vector<std::string> csv_columns(const sim::SimLog& log);

void write_csv(std::ostream& os, const sim::SimLog& log);

/// Plain CSV table: no quoting, comma separated, header first.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const;  // throws Error if absent
    [[nodiscard]] double number(std::size_t row, const std::string& name) const;
};

[[nodiscard]] CsvTable read_csv(std::istream& is);

/// Summary statistics and run metadata as a JSON document.
[[nodiscard]] std::string summary_json(const sim::SimLog& log);

/// Top-down view: arena, static obstacles, obstacle and target tracks, box and
/// base trajectories, and the planned boxes every `horizon_every` ticks.
void write_svg(std::ostream& os, const sim::SimLog& log, const sim::Scenario& s, std::size_t horizon_every = 20);

struct EmitOptions {
    bool csv{true};
    bool json{true};
    bool svg{true};
};

/// Writes log.csv, summary.json and run.svg into `dir` (created if missing).
/// Returns the written paths; throws Error naming the path on I/O failure.
std::vector<std::filesystem::path> emit(const sim::SimLog& log, const sim::Scenario& s,
                                        const std::filesystem::path& dir, const EmitOptions& opts = {});

}  // namespace mmt::io
