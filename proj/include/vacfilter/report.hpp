#pragma once

// Tabular results and their CSV / JSON serialization. Column layouts and the
// JSON document schema are described in docs/formats.md.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vacfilter/montecarlo.hpp"

namespace vacfilter {

inline constexpr int kJsonSchemaVersion = 1;

std::string library_version();

struct Table {
  std::string name;
  std::vector<std::string> columns;
  /// Each cell is a number, string, boolean or null.
  std::vector<std::vector<nlohmann::json>> rows;

  void add_row(std::vector<nlohmann::json> row);
  /// Index of a column; throws std::out_of_range if absent.
  std::size_t column(const std::string& name) const;
};

struct Provenance {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> conventions;
};

/// Conventions every output states in its header.
std::map<std::string, std::string> default_conventions();

/// "# key: value" header lines, then a header row and the data rows.
void write_csv(std::ostream& os, const Table& table, const Provenance& prov);

/// Full JSON document with the given tables and an optional result object.
nlohmann::json make_document(const std::string& kind, const Provenance& prov,
                             const std::vector<Table>& tables,
                             const nlohmann::json& result = nlohmann::json::object());

/// Checks a document against the versioned schema; returns the problems found.
std::vector<std::string> validate_document(const nlohmann::json& doc);

/// Reads a table back from a JSON document (inverse of make_document).
Table table_from_document(const nlohmann::json& doc, const std::string& name);

/// trial_stats layout: detector, R_alpha_sq, P_accept, stderr, E, P_S, G.
Table trial_stats_table();
void add_trial_stats(Table& table, const FilterDetector& det, double R_alpha_sq, const McResult& run);

}  // namespace vacfilter
