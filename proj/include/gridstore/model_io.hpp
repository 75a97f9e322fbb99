#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include "gridstore/model.hpp"

namespace gridstore {

/// Thrown on malformed input text. `line`/`column` are 1-based and refer to
/// the position where parsing stopped (0 when unknown, e.g. schema errors
/// reported after the document parsed).
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line_ = 0, int column_ = 0)
      : std::runtime_error(msg), line(line_), column(column_) {}
  int line = 0;
  int column = 0;
};

/// Parses the JSON network document (keys: buses, lines, storage, demand,
/// period). Caps accept the string "inf". Unknown keys are rejected.
/// Semantic checks beyond shape are left to validate().
std::pair<Network, DemandSeries> parse_network(const std::string& text);

/// Inverse of parse_network: emits a document that parses back to an
/// identical model (reals round-trip bit-exact).
std::string serialize_network(const Network& net, const DemandSeries& demand);

std::pair<Network, DemandSeries> load_network_file(const std::string& path);

}  // namespace gridstore
