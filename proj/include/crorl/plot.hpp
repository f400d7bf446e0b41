#pragma once

#include <string>
#include <vector>

namespace crorl {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index; throws naming the column when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

/// Writes subopt_vs_n.svg, and subopt_vs_zeta.svg when some row has
/// zeta_approx > 0. Returns the paths written. An empty table is an error.
std::vector<std::string> emit_plots(const std::string& csv_path, const std::string& out_dir);

}  // namespace crorl
