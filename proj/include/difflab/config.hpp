#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "difflab/experiment.hpp"

namespace difflab {

// Experiment configs use a sectioned key = value format:
//
//   runs = 200
//   [graph]
//   nodes = 20
//   [noise.before.x]
//   sigma_a2 = 0.04
//   [algorithm.AC-DMTC]
//   kind = DMTC
//
// A key's dotted path is its section name joined with the key. Unknown keys
// are errors. Lists are comma separated. '#' starts a comment.

using Override = std::pair<std::string, std::string>;

// Splits "path=value"; throws ParseError on a missing '='.
Override parse_override(const std::string& text);

ExperimentConfig parse_config(std::istream& in, const std::vector<Override>& overrides = {});
ExperimentConfig parse_config_text(const std::string& text, const std::vector<Override>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::vector<Override>& overrides = {});

// Canonical text; parse_config_text(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

}  // namespace difflab
