#pragma once

// Plain-text run configuration: `key = value` lines under [run] and [agent]
// sections. write_run_config emits exactly the format parse_run_config
// accepts, so the per-run echo is directly re-runnable.

#include <iosfwd>
#include <string>

#include "ctd3/harness.hpp"

namespace ctd3 {

// Parses a whole config stream on top of default values. Unknown keys,
// unparseable values, and misplaced sections throw std::invalid_argument
// naming the offending line and key.
RunConfig parse_run_config(std::istream& in);

// Same, but layered on top of `start` instead of defaults. Lets callers
// pre-seed values (e.g. from the environment) that the file may override.
RunConfig parse_run_config(std::istream& in, RunConfig start);

// Applies one `key = value` assignment to cfg; section is "run" or "agent".
// Shared by the file parser and by CLI overrides.
void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key,
                      const std::string& value);

void write_run_config(std::ostream& out, const RunConfig& cfg);

} // namespace ctd3
