#pragma once

// Logit-scale observations indexed by (country, vaccine, time, source), the
// common currency between preprocessing, the models and the sampler.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vaxcov/coverage_data.hpp"

namespace vaxcov {

/// Index ranges C, V, T. Cells are laid out country-major, time fastest.
struct ModelDims {
  int countries = 0;
  int vaccines = 0;
  int times = 0;

  int cells() const { return countries * vaccines * times; }
  int cell(int i, int j, int t) const { return (i * vaccines + j) * times + t; }
  bool operator==(const ModelDims&) const = default;
};

/// One logit-transformed coverage value. Indices are 0-based.
struct Observation {
  int country = 0;
  int vaccine = 0;
  int time = 0;
  SourceKind source = SourceKind::Admin;
  double y = 0.0;
};

/// Validated set of observations: indices in range, finite values and at most
/// one value per (i, j, t, k).
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(ModelDims dims, std::vector<Observation> observations);

  const ModelDims& dims() const noexcept { return dims_; }
  const std::vector<Observation>& observations() const noexcept { return obs_; }
  std::size_t size() const noexcept { return obs_.size(); }
  std::size_t count(SourceKind source) const;

  /// Time indices observed for (i, j) from `source`, ascending.
  std::vector<int> observed_times(int i, int j, SourceKind source) const;
  bool is_observed(int i, int j, int t, SourceKind source) const;

  /// Every (i, j, t, k) cell without an observation, in cell-then-source order.
  std::vector<Observation> missing_cells() const;

  /// Keeps observations with time < `times` and shrinks T accordingly.
  ObservationSet truncated(int times) const;

 private:
  std::size_t slot(int i, int j, int t, SourceKind k) const;

  ModelDims dims_;
  std::vector<Observation> obs_;
  std::vector<char> present_;  // 3 * cells flags
};

/// Labels for the integer indices used by an ObservationSet.
struct IndexMaps {
  std::vector<std::string> countries;
  std::vector<std::string> regions;  // parallel to countries
  std::vector<std::string> vaccines;
  int first_year = 0;
  int n_years = 0;

  ModelDims dims() const {
    return {static_cast<int>(countries.size()), static_cast<int>(vaccines.size()), n_years};
  }
  std::optional<int> country_index(std::string_view code) const;
  std::optional<int> vaccine_index(std::string_view code) const;
  int year(int t) const { return first_year + t; }
};

}  // namespace vaxcov
