#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ordfa/model.hpp"
#include "ordfa/simgen.hpp"

namespace ordfa {

const char* library_version();

/// "ordfa <version> seed=<seed> config=<hash>", written as a leading "# " line.
std::string provenance_line(std::uint64_t seed, const std::string& config_hash);

struct DatasetFile {
  std::vector<std::string> item_ids;
  DatasetMatrix data;
  std::vector<int> groups;  // one label per row when a group column was read
  std::vector<std::string> warnings;
};

/// Comma-separated, mandatory header, 1-based integer codes. Lines starting
/// with '#' and blank lines are skipped. Item columns are matched by name to
/// `item_ids`; `group_column`, when non-empty, must hold positive integers.
/// Errors cite the row (data row and file line), column and value.
DatasetFile parse_dataset(std::istream& in, const std::vector<std::string>& item_ids,
                          const std::vector<int>& declared_categories, const std::string& group_column = {},
                          const std::string& source = "<input>");
DatasetFile read_dataset(const std::string& path, const std::vector<std::string>& item_ids,
                         const std::vector<int>& declared_categories, const std::string& group_column = {});

/// Per-item counts for every declared category, zeros included.
std::string format_category_counts(const std::vector<std::string>& item_ids, const DatasetMatrix& data);

void write_dataset_csv(std::ostream& os, const std::vector<std::string>& item_ids, const DatasetMatrix& data,
                       const std::string& provenance = {});

/// Generating values of a simulated dataset, for truth bookkeeping.
std::string population_json(const SimCondition& condition, const PopulationParams& params,
                            const std::vector<std::string>& item_ids, const std::string& provenance);

}  // namespace ordfa
