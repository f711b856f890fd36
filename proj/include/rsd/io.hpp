#ifndef RSD_IO_HPP
#define RSD_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsd/types.hpp"

namespace rsd {

/// Parsed rectangular numeric data plus optional row labels.
struct RawTable {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
};

/// CSV cells are plain decimals; a non-numeric first column is taken as row
/// labels. Throws DataError with row/column positions on bad input.
RawTable parse_csv_table(std::istream& in);

/// JSON tables carry {"schema":1, "model":..., "labels":[...], and a
/// "counts" or "values" matrix}.
RawTable parse_json_table(const std::string& text);

/// Reads a table file; format is "csv" or "json", or derived from the file
/// extension when empty.
RawTable read_table(const std::string& path, std::string format = "");

void write_table_csv(std::ostream& out, const std::vector<std::vector<double>>& rows,
                     const std::vector<std::string>& labels);
std::string table_to_json(const std::vector<std::vector<double>>& rows,
                          const std::vector<std::string>& labels, const std::string& model);

ContingencyTable to_contingency(const RawTable& raw);
SampleMatrix to_samples(const RawTable& raw, SampleMatrix::Kind kind);

/// Fully resolved command invocation; echoed into every report.
struct RunSpec {
  std::string subcommand;                // analyze | audit | simulate | reproduce
  std::string model = "multinomial";     // multinomial | normal | rank
  std::string family = "change-point";   // all-pairwise | change-point | tvc
  std::string procedure = "rsd";         // rsd | step-down | step-up
  std::string sided;                     // one | two; default depends on the family
  std::string criticals_source;          // inline | file | bh | bg
  std::vector<double> criticals;         // inline values
  std::string criticals_file;
  double alpha = 0.05;
  int control = 0;  // 1-based; 0 means the last population
  std::string input_path;
  std::string output_path;
  std::string format;             // csv | json | "" (by extension)
  std::string pooling = "average";  // average | sum (multinomial rsd)
  int rank_n = 1;
  double rank_w = 0.0;
  std::uint64_t seed = 0;

  // audit
  std::string builtin;  // figure1 | figure2
  std::string pair;     // "i,j", 1-based
  std::vector<double> grid;
  bool survey = false;
  int random_instances = 0;

  // simulate / reproduce
  std::string config_path;
  std::string blocks;  // "1-5:2.0,6-10:-2.0"
  int sim_k = 101;
  int iterations = 5000;
  double rsd_alpha = 0.05;
  double su_alpha = 0.07;
  int table = 5;
  std::vector<int> rows;
  bool serial = false;
};

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 audit violations.
int run(const RunSpec& spec, std::ostream& out, std::ostream& err);

}  // namespace rsd

#endif  // RSD_IO_HPP
