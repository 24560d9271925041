#include "ordfa/dataset_io.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "ordfa/errors.hpp"

#ifndef ORDFA_VERSION
#define ORDFA_VERSION "0.0.0"
#endif

namespace ordfa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\"") - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

const char* library_version() { return ORDFA_VERSION; }

std::string provenance_line(std::uint64_t seed, const std::string& config_hash) {
  return std::string("ordfa ") + ORDFA_VERSION + " seed=" + std::to_string(seed) + " config=" + config_hash;
}

DatasetFile parse_dataset(std::istream& in, const std::vector<std::string>& item_ids,
                          const std::vector<int>& declared_categories, const std::string& group_column,
                          const std::string& source) {
  if (item_ids.size() != declared_categories.size())
    throw DataError("item list and declared categories differ in length");
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split_csv(line);
    break;
  }
  if (header.empty()) throw DataError(source + ": no header row");

  std::map<std::string, int> column_of;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (!column_of.emplace(header[j], static_cast<int>(j)).second)
      throw DataError(source + ": duplicate column '" + header[j] + "' in header");
  std::vector<int> item_col;
  for (const auto& id : item_ids) {
    const auto it = column_of.find(id);
    if (it == column_of.end()) throw DataError(source + ": header has no column '" + id + "'");
    item_col.push_back(it->second);
  }
  int group_col = -1;
  if (!group_column.empty()) {
    const auto it = column_of.find(group_column);
    if (it == column_of.end()) throw DataError(source + ": header has no group column '" + group_column + "'");
    group_col = it->second;
  }

  DatasetFile out;
  out.item_ids = item_ids;
  std::vector<int> responses;
  int row = 0;
  const auto parse_int = [&](const std::string& cell, int col) {
    const auto where = [&, col] {
      return source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) + "), column " +
             std::to_string(col + 1) + " '" + header[static_cast<std::size_t>(col)] + "'";
    };
    if (cell.empty()) throw DataError(where() + ": empty cell (missing values are not supported)");
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(cell, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != cell.size()) throw DataError(where() + ": value '" + cell + "' is not an integer");
    return std::pair{v, where};
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    ++row;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw DataError(source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) + ") has " +
                      std::to_string(cells.size()) + " fields, header has " + std::to_string(header.size()));
    for (std::size_t i = 0; i < item_col.size(); ++i) {
      const int col = item_col[i];
      const auto [v, where] = parse_int(cells[static_cast<std::size_t>(col)], col);
      if (v < 1 || v > declared_categories[i])
        throw DataError(where() + ": value " + std::to_string(v) + " outside the declared codes 1.." +
                        std::to_string(declared_categories[i]));
      responses.push_back(v);
    }
    if (group_col >= 0) {
      const auto [g, where] = parse_int(cells[static_cast<std::size_t>(group_col)], group_col);
      if (g < 1) throw DataError(where() + ": group label " + std::to_string(g) + " must be a positive integer");
      out.groups.push_back(g);
    }
  }
  if (row == 0) throw DataError(source + ": no data rows");
  out.data = DatasetMatrix(declared_categories, std::move(responses));
  const auto& counts = out.data.category_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    int observed = 0;
    for (int c : counts[i]) observed += c > 0 ? 1 : 0;
    if (observed == 1)
      out.warnings.push_back("item '" + item_ids[i] + "' has a single observed category; its thresholds are prior-dominated");
  }
  return out;
}

DatasetFile read_dataset(const std::string& path, const std::vector<std::string>& item_ids,
                         const std::vector<int>& declared_categories, const std::string& group_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_dataset(in, item_ids, declared_categories, group_column, path);
}

std::string format_category_counts(const std::vector<std::string>& item_ids, const DatasetMatrix& data) {
  std::size_t w = 4;
  for (const auto& id : item_ids) w = std::max(w, id.size());
  int max_c = 0;
  for (int c : data.declared_categories()) max_c = std::max(max_c, c);
  std::ostringstream os;
  os << std::string(w, ' ');
  for (int c = 1; c <= max_c; ++c) os << "  " << std::setw(5) << c;
  os << '\n';
  const auto& counts = data.category_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    os << item_ids[i] << std::string(w - item_ids[i].size(), ' ');
    for (int c = 0; c < max_c; ++c) {
      os << "  ";
      if (c < static_cast<int>(counts[i].size())) os << std::setw(5) << counts[i][static_cast<std::size_t>(c)];
      else os << std::setw(5) << '-';
    }
    os << '\n';
  }
  return os.str();
}

void write_dataset_csv(std::ostream& os, const std::vector<std::string>& item_ids, const DatasetMatrix& data,
                       const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << '\n';
  for (std::size_t i = 0; i < item_ids.size(); ++i) os << (i ? "," : "") << item_ids[i];
  os << '\n';
  for (int n = 0; n < data.n_rows(); ++n) {
    const auto r = data.row(n);
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

std::string population_json(const SimCondition& condition, const PopulationParams& params,
                            const std::vector<std::string>& item_ids, const std::string& provenance) {
  using nlohmann::json;
  json j;
  j["provenance"] = provenance;
  j["condition"] = {{"shape", to_string(condition.shape)},
                    {"n_categories", condition.n_categories},
                    {"n", condition.n},
                    {"n_sparse_items", condition.n_sparse_items},
                    {"reference", to_string(condition.reference)},
                    {"seed", condition.seed},
                    {"n_items", condition.n_items},
                    {"n_factors", condition.n_factors}};
  const auto& st = params.structure;
  json loadings = json::array();
  for (Eigen::Index i = 0; i < st.loadings.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < st.loadings.cols(); ++k) row.push_back(st.loadings(i, k));
    loadings.push_back(row);
  }
  json phi = json::array();
  for (Eigen::Index k = 0; k < st.factor_cov.rows(); ++k) {
    json row = json::array();
    for (Eigen::Index l = 0; l < st.factor_cov.cols(); ++l) row.push_back(st.factor_cov(k, l));
    phi.push_back(row);
  }
  json items = json::array();
  for (std::size_t i = 0; i < params.thresholds.size(); ++i) {
    const auto tau = params.thresholds[i].values();
    items.push_back({{"id", item_ids[i]},
                     {"factor", params.item_factor[i] + 1},
                     {"sparse", static_cast<bool>(params.sparse[i])},
                     {"thresholds", std::vector<double>(tau.begin(), tau.end())}});
  }
  std::vector<int> refs;
  for (int r : params.reference_items) refs.push_back(r + 1);
  j["population"] = {{"loadings", loadings},
                     {"factor_cov", phi},
                     {"residual_var", std::vector<double>(st.residual_var.data(), st.residual_var.data() + st.residual_var.size())},
                     {"reference_items", refs},
                     {"threshold_rule", params.threshold_rule},
                     {"items", items}};
  return j.dump(2) + "\n";
}

}  // namespace ordfa
