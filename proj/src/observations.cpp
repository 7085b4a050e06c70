#include "vaxcov/observations.hpp"

#include <algorithm>
#include <cmath>

#include "vaxcov/errors.hpp"

namespace vaxcov {

ObservationSet::ObservationSet(ModelDims dims, std::vector<Observation> observations)
    : dims_(dims), obs_(std::move(observations)) {
  if (dims_.countries < 1 || dims_.vaccines < 1 || dims_.times < 1) {
    throw DataError("model dimensions must all be at least 1");
  }
  present_.assign(static_cast<std::size_t>(dims_.cells()) * 3, 0);
  for (const auto& o : obs_) {
    if (o.country < 0 || o.country >= dims_.countries || o.vaccine < 0 ||
        o.vaccine >= dims_.vaccines || o.time < 0 || o.time >= dims_.times) {
      throw DataError("observation index out of range");
    }
    if (!std::isfinite(o.y)) throw DataError("non-finite observation value");
    auto& flag = present_[slot(o.country, o.vaccine, o.time, o.source)];
    if (flag) {
      throw DataError("duplicate observation for cell (" + std::to_string(o.country) + "," +
                      std::to_string(o.vaccine) + "," + std::to_string(o.time) + "," +
                      std::string(to_string(o.source)) + ")");
    }
    flag = 1;
  }
}

std::size_t ObservationSet::slot(int i, int j, int t, SourceKind k) const {
  return static_cast<std::size_t>(dims_.cell(i, j, t)) * 3 + static_cast<std::size_t>(k);
}

std::size_t ObservationSet::count(SourceKind source) const {
  return static_cast<std::size_t>(
      std::count_if(obs_.begin(), obs_.end(), [&](const Observation& o) { return o.source == source; }));
}

bool ObservationSet::is_observed(int i, int j, int t, SourceKind source) const {
  return present_[slot(i, j, t, source)] != 0;
}

std::vector<int> ObservationSet::observed_times(int i, int j, SourceKind source) const {
  std::vector<int> times;
  for (int t = 0; t < dims_.times; ++t) {
    if (is_observed(i, j, t, source)) times.push_back(t);
  }
  return times;
}

std::vector<Observation> ObservationSet::missing_cells() const {
  std::vector<Observation> out;
  for (int i = 0; i < dims_.countries; ++i) {
    for (int j = 0; j < dims_.vaccines; ++j) {
      for (int t = 0; t < dims_.times; ++t) {
        for (auto k : kAllSources) {
          if (!is_observed(i, j, t, k)) out.push_back({i, j, t, k, 0.0});
        }
      }
    }
  }
  return out;
}

ObservationSet ObservationSet::truncated(int times) const {
  if (times < 1 || times > dims_.times) throw DataError("invalid truncation length");
  std::vector<Observation> kept;
  for (const auto& o : obs_) {
    if (o.time < times) kept.push_back(o);
  }
  return ObservationSet({dims_.countries, dims_.vaccines, times}, std::move(kept));
}

std::optional<int> IndexMaps::country_index(std::string_view code) const {
  const auto it = std::find(countries.begin(), countries.end(), code);
  if (it == countries.end()) return std::nullopt;
  return static_cast<int>(it - countries.begin());
}

std::optional<int> IndexMaps::vaccine_index(std::string_view code) const {
  const auto it = std::find(vaccines.begin(), vaccines.end(), code);
  if (it == vaccines.end()) return std::nullopt;
  return static_cast<int>(it - vaccines.begin());
}

}  // namespace vaxcov
