#ifndef RSD_INTERVAL_AUDIT_HPP
#define RSD_INTERVAL_AUDIT_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsd/stepwise.hpp"
#include "rsd/types.hpp"

namespace rsd {

enum class ModelKind { multinomial, normal, rank };

/// Direction of increasing evidence against H_ij, flattened to the row-major
/// k x q data layout. Multinomial rays shift mass between the extreme cells
/// of rows i and j; normal rays shift whole mean vectors; rank rays shift
/// the two rank means.
struct DirectionVector {
  ModelKind model = ModelKind::normal;
  int k = 0, q = 1;
  int i = 0, j = 0;  // 0-based populations
  std::vector<double> g;
};

DirectionVector direction_vector(ModelKind model, int k, int q, int i, int j);

/// A full multiple-testing procedure on flat row-major k x q data.
using DecisionProcedure = std::function<DecisionReport(const std::vector<double>&)>;

/// Everything needed to instantiate one of the supported procedures as a
/// DecisionProcedure closure.
struct ProcedureSpec {
  enum class Kind { rsd, step_down, step_up };
  Kind kind = Kind::rsd;
  ModelKind model = ModelKind::normal;
  ProblemFamily family;
  Sidedness sided = Sidedness::two_sided;
  CriticalValues criticals;
  PairStatKind pair_stat = PairStatKind::z_difference;  // classic procedures only
  int q = 1;
  int rank_n_per_pop = 1;
  double rank_w_override = 0.0;
  bool multinomial_raw_sums = false;
};

DecisionProcedure make_procedure(const ProcedureSpec& spec);

struct RayScan {
  std::vector<double> grid;   // possibly truncated in survey mode
  std::vector<bool> reject;   // decision for the audited pair at each point
  bool clipped = false;
};

/// Evaluates the procedure along x + a*g for each a in the grid (which must
/// start at 0 and increase) and extracts the (i, j) decision. Multinomial
/// points must keep every cell nonnegative: survey_clip stops at the last
/// valid point, otherwise the offending grid value is an error.
RayScan ray_decisions(const DecisionProcedure& procedure, const std::vector<double>& x,
                      const DirectionVector& direction, const std::vector<double>& a_grid,
                      bool survey_clip = false);

/// First index where a rejection is followed by an acceptance, if any.
std::optional<size_t> check_one_sided(const std::vector<bool>& reject);

/// Index of an acceptance that reopens after accept...reject, if any
/// (non-convex acceptance section).
std::optional<size_t> check_two_sided(const std::vector<bool>& reject);

/// The Figure-2 construction transfers to all-pairwise testing only when
/// C1 + 2*C2 > 2*C3.
bool figure2_applies_all_pairwise(const CriticalValues& criticals);

/// A 3-population univariate instance on which the usual step-down loses the
/// interval property, with the decision pattern frozen per point.
struct Counterexample {
  std::string name;
  ProblemFamily family;
  Sidedness sided = Sidedness::one_sided;
  PairStatKind pair_stat = PairStatKind::difference;
  CriticalValues criticals;
  std::vector<double> x;                            // base point, q = 1
  std::pair<int, int> ray_pair;                     // audited hypothesis
  std::vector<double> grid;                         // offsets giving x, x*, (x**)
  std::vector<std::vector<bool>> expected_rejects;  // [grid point][family pair]
};

/// One-sided change point: step-down rejects H_12 at x but accepts at
/// x* = x + 0.2 g_12 despite more evidence against H_12.
Counterexample counterexample_change_point();

/// Two-sided treatments versus control (control = 3): step-down's H_13
/// decisions run accept, reject, accept along g_13.
Counterexample counterexample_tvc();

/// Randomized interval-property certification: generates instances of the
/// given model/family, ray-scans every hypothesis pair under RSD, and counts
/// violations (none are expected).
struct CertifySetup {
  ModelKind model = ModelKind::normal;
  ProblemShape shape = ProblemShape::change_point;
  Sidedness sided = Sidedness::one_sided;
  int instances = 1000;
  std::uint64_t seed = 1;
  int min_k = 3, max_k = 5;
};

struct ViolationCase {
  int instance_index = 0;
  int k = 0, q = 1;
  std::vector<double> data;
  std::pair<int, int> pair;
  std::vector<double> grid;
  std::vector<bool> pattern;
  size_t violation_index = 0;
  Sidedness sided = Sidedness::one_sided;
};

struct CertifyResult {
  int instances = 0;
  long scans = 0;       // pair rays examined
  long violations = 0;  // violating rays
  std::vector<ViolationCase> examples;
};

CertifyResult certify_random_instances(const CertifySetup& setup, bool parallel = true);

}  // namespace rsd

#endif  // RSD_INTERVAL_AUDIT_HPP
