#ifndef RSD_TYPES_HPP
#define RSD_TYPES_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsd {

/// Thrown for malformed input data (bad file contents, invalid table shapes).
/// The CLI maps this to exit code 2; plain std::invalid_argument covers
/// precondition violations on library calls.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class Sidedness { one_sided, two_sided };

enum class ProblemShape { all_pairwise, change_point, treatments_vs_control };

/// k x q matrix of nonnegative cell counts, one multinomial population per
/// row. Fractional entries are allowed: pooled rows are built by averaging
/// cell counts across populations.
struct ContingencyTable {
  std::vector<std::vector<double>> counts;
  std::vector<std::string> labels;  // optional, one per row when present

  int rows() const { return static_cast<int>(counts.size()); }
  int cols() const { return counts.empty() ? 0 : static_cast<int>(counts[0].size()); }
  double row_total(int i) const;
  std::vector<double> flat() const;  // row-major
  void validate() const;             // throws std::invalid_argument
};

/// k x q real observations: one q-vector per population (normal model) or
/// k x 1 joint-rank means (rank model).
struct SampleMatrix {
  enum class Kind { normal, rank_means };

  std::vector<std::vector<double>> values;
  Kind kind = Kind::normal;
  std::vector<std::string> labels;

  int rows() const { return static_cast<int>(values.size()); }
  int cols() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
  std::vector<double> flat() const;
  void validate() const;
};

/// Ordered critical values C_1 < C_2 < ... < C_K.
struct CriticalValues {
  std::vector<double> values;
  std::string source = "user";  // "bh" | "bg" | "user"
  double alpha = 0.0;           // set when generated from bh/bg

  int size() const { return static_cast<int>(values.size()); }
  double at(int index_1based) const { return values.at(static_cast<size_t>(index_1based - 1)); }
  void validate() const;  // strictly increasing, finite, nonempty
};

/// The hypothesis family Q and, for the partition engine, the split classes
/// it induces. Population indices are 0-based throughout the library; the
/// CLI and all serialized output use 1-based indices.
struct ProblemFamily {
  ProblemShape shape = ProblemShape::all_pairwise;
  int k = 0;
  int control = -1;  // 0-based; defaults to k-1 when shape is treatments_vs_control

  int control_index() const { return control >= 0 ? control : k - 1; }

  /// Hypothesis pairs: (i, i+1) for change point, (treatment, control) for
  /// treatments versus control, (i, j) with i < j for all pairwise.
  std::vector<std::pair<int, int>> pairs() const;

  /// Largest number of splits an RSD run can execute (k - 1 for every shape).
  int max_splits() const { return k - 1; }

  void validate() const;
};

struct Decision {
  int i = 0;
  int j = 0;
  bool reject = false;
  double statistic = std::nan("");  // pair statistic or the separating split's H
  int stage = 0;                    // 1-based step of rejection; 0 if accepted / unknown
};

struct DecisionReport {
  std::vector<Decision> decisions;

  const Decision* find(int i, int j) const;
  bool rejected(int i, int j) const;  // throws std::invalid_argument if (i,j) absent
  int reject_count() const;
};

}  // namespace rsd

#endif  // RSD_TYPES_HPP
