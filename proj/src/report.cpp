#include "vacfilter/report.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vacfilter {

namespace {

std::string format_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isnan(d)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
  }
  return v.dump();
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string library_version() {
#ifdef VACFILTER_VERSION
  return VACFILTER_VERSION;
#else
  return "unknown";
#endif
}

void Table::add_row(std::vector<nlohmann::json> row) {
  if (row.size() != columns.size()) {
    throw std::invalid_argument("row width " + std::to_string(row.size()) + " does not match table '" +
                                name + "'");
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& col) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] == col) return k;
  }
  throw std::out_of_range("table '" + name + "' has no column '" + col + "'");
}

std::map<std::string, std::string> default_conventions() {
  return {
      {"homodyne_quadrature", "vacuum variance 1/4, mean Re(alpha e^{-i theta})"},
      {"covariance_matrix", "vacuum = identity, ordering (x1, p1, ..., xn, pn)"},
      {"sensitivity", "second derivative in |alpha|, Richardson-extrapolated differences"},
      {"qkd_V", "single-mode squeezing variance, TMSV variance (V + 1/V)/2"},
  };
}

void write_csv(std::ostream& os, const Table& table, const Provenance& prov) {
  os << "# vacfilter " << library_version() << "\n";
  os << "# table: " << table.name << "\n";
  os << "# command: " << prov.command << "\n";
  if (prov.seed) os << "# seed: " << *prov.seed << "\n";
  for (const auto& [k, v] : prov.conventions) os << "# convention " << k << ": " << v << "\n";
  for (std::size_t k = 0; k < table.columns.size(); ++k) os << (k ? "," : "") << table.columns[k];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << format_cell(row[k]);
    os << "\n";
  }
}

nlohmann::json make_document(const std::string& kind, const Provenance& prov,
                             const std::vector<Table>& tables, const nlohmann::json& result) {
  nlohmann::json doc;
  doc["schema_version"] = kJsonSchemaVersion;
  doc["kind"] = kind;
  doc["provenance"] = {{"command", prov.command},
                       {"version", library_version()},
                       {"seed", prov.seed ? nlohmann::json(*prov.seed) : nlohmann::json(nullptr)},
                       {"conventions", prov.conventions}};
  doc["tables"] = nlohmann::json::object();
  for (const auto& t : tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) rows.push_back(r);
    doc["tables"][t.name] = {{"columns", t.columns}, {"rows", rows}};
  }
  doc["result"] = result;
  return doc;
}

std::vector<std::string> validate_document(const nlohmann::json& doc) {
  std::vector<std::string> errs;
  auto need = [&](const nlohmann::json& obj, const char* key, auto pred, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      errs.push_back(std::string("missing '") + key + "'");
      return false;
    }
    if (!pred(obj.at(key))) {
      errs.push_back(std::string("'") + key + "' must be " + what);
      return false;
    }
    return true;
  };
  auto is_obj = [](const nlohmann::json& v) { return v.is_object(); };
  auto is_str = [](const nlohmann::json& v) { return v.is_string(); };
  if (!doc.is_object()) return {"document must be an object"};
  if (need(doc, "schema_version", [](const nlohmann::json& v) { return v.is_number_integer(); },
           "an integer") &&
      doc["schema_version"].get<int>() != kJsonSchemaVersion) {
    errs.push_back("unsupported schema_version");
  }
  need(doc, "kind", is_str, "a string");
  if (need(doc, "provenance", is_obj, "an object")) {
    const auto& p = doc["provenance"];
    need(p, "command", is_str, "a string");
    need(p, "version", is_str, "a string");
    need(p, "seed", [](const nlohmann::json& v) { return v.is_null() || v.is_number_unsigned(); },
         "null or an unsigned integer");
    if (need(p, "conventions", is_obj, "an object")) {
      for (const auto& [k, v] : p["conventions"].items()) {
        if (!v.is_string()) errs.push_back("convention '" + k + "' must be a string");
      }
    }
  }
  if (need(doc, "tables", is_obj, "an object")) {
    for (const auto& [name, t] : doc["tables"].items()) {
      if (!t.is_object() || !t.contains("columns") || !t.contains("rows") || !t["columns"].is_array() ||
          !t["rows"].is_array()) {
        errs.push_back("table '" + name + "' needs 'columns' and 'rows' arrays");
        continue;
      }
      for (const auto& c : t["columns"]) {
        if (!c.is_string()) errs.push_back("table '" + name + "' has a non-string column name");
      }
      for (const auto& r : t["rows"]) {
        if (!r.is_array() || r.size() != t["columns"].size()) {
          errs.push_back("table '" + name + "' has a row of the wrong width");
          break;
        }
        for (const auto& cell : r) {
          if (cell.is_object() || cell.is_array()) {
            errs.push_back("table '" + name + "' has a nested cell");
            break;
          }
        }
      }
    }
  }
  need(doc, "result", is_obj, "an object");
  return errs;
}

Table table_from_document(const nlohmann::json& doc, const std::string& name) {
  const auto& t = doc.at("tables").at(name);
  Table out{name, t.at("columns").get<std::vector<std::string>>(), {}};
  for (const auto& r : t.at("rows")) out.add_row(r.get<std::vector<nlohmann::json>>());
  return out;
}

Table trial_stats_table() {
  return Table{"trial_stats", {"detector", "R_alpha_sq", "P_accept", "stderr", "E", "P_S", "G"}, {}};
}

void add_trial_stats(Table& table, const FilterDetector& det, double R_alpha_sq, const McResult& run) {
  table.add_row({detector_name(det), R_alpha_sq,
                 optional_number(run.P_accept ? std::optional<double>(run.P_accept->value) : std::nullopt),
                 optional_number(run.P_accept ? std::optional<double>(run.P_accept->std_error) : std::nullopt),
                 optional_number(run.E ? std::optional<double>(run.E->value) : std::nullopt), run.P_S.value,
                 optional_number(run.G ? std::optional<double>(run.G->value) : std::nullopt)});
}

}  // namespace vacfilter
