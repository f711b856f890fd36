#include "rsd/types.hpp"

#include <algorithm>
#include <cmath>

namespace rsd {

double ContingencyTable::row_total(int i) const {
  double total = 0.0;
  for (double c : counts.at(static_cast<size_t>(i))) total += c;
  return total;
}

std::vector<double> ContingencyTable::flat() const {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rows()) * static_cast<size_t>(cols()));
  for (const auto& row : counts) out.insert(out.end(), row.begin(), row.end());
  return out;
}

void ContingencyTable::validate() const {
  if (rows() < 2) throw std::invalid_argument("contingency table needs k >= 2 rows");
  if (cols() < 2) throw std::invalid_argument("contingency table needs q >= 2 cells");
  const size_t q = counts[0].size();
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != q)
      throw std::invalid_argument("contingency table row " + std::to_string(i + 1) + " is ragged");
    for (size_t j = 0; j < q; ++j) {
      const double c = counts[i][j];
      if (!std::isfinite(c) || c < 0.0)
        throw std::invalid_argument("contingency table cell (" + std::to_string(i + 1) + "," +
                                    std::to_string(j + 1) + ") must be a nonnegative number");
    }
  }
}

std::vector<double> SampleMatrix::flat() const {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(rows()) * static_cast<size_t>(cols()));
  for (const auto& row : values) out.insert(out.end(), row.begin(), row.end());
  return out;
}

void SampleMatrix::validate() const {
  if (rows() < 2) throw std::invalid_argument("sample matrix needs k >= 2 rows");
  if (cols() < 1) throw std::invalid_argument("sample matrix needs q >= 1 columns");
  const size_t q = values[0].size();
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != q)
      throw std::invalid_argument("sample matrix row " + std::to_string(i + 1) + " is ragged");
    for (double v : values[i])
      if (!std::isfinite(v))
        throw std::invalid_argument("sample matrix row " + std::to_string(i + 1) +
                                    " contains a non-finite value");
  }
}

void CriticalValues::validate() const {
  if (values.empty()) throw std::invalid_argument("critical values must be nonempty");
  for (size_t m = 0; m < values.size(); ++m) {
    if (!std::isfinite(values[m])) throw std::invalid_argument("critical values must be finite");
    if (m > 0 && !(values[m - 1] < values[m]))
      throw std::invalid_argument("critical values must be strictly increasing");
  }
}

std::vector<std::pair<int, int>> ProblemFamily::pairs() const {
  std::vector<std::pair<int, int>> q;
  switch (shape) {
    case ProblemShape::change_point:
      for (int i = 0; i + 1 < k; ++i) q.emplace_back(i, i + 1);
      break;
    case ProblemShape::treatments_vs_control: {
      const int c = control_index();
      for (int i = 0; i < k; ++i)
        if (i != c) q.emplace_back(i, c);
      break;
    }
    case ProblemShape::all_pairwise:
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) q.emplace_back(i, j);
      break;
  }
  return q;
}

void ProblemFamily::validate() const {
  if (k < 2) throw std::invalid_argument("family needs k >= 2 populations");
  if (shape == ProblemShape::treatments_vs_control) {
    const int c = control_index();
    if (c < 0 || c >= k) throw std::invalid_argument("control index out of range");
  }
}

const Decision* DecisionReport::find(int i, int j) const {
  for (const auto& d : decisions)
    if ((d.i == i && d.j == j) || (d.i == j && d.j == i)) return &d;
  return nullptr;
}

bool DecisionReport::rejected(int i, int j) const {
  const Decision* d = find(i, j);
  if (!d)
    throw std::invalid_argument("hypothesis (" + std::to_string(i + 1) + "," +
                                std::to_string(j + 1) + ") is not in the family");
  return d->reject;
}

int DecisionReport::reject_count() const {
  int n = 0;
  for (const auto& d : decisions) n += d.reject ? 1 : 0;
  return n;
}

}  // namespace rsd
