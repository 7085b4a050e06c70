#pragma once

#include <random>
#include <vector>

#include "vaxcov/model.hpp"

namespace vaxcov::oracle {

struct RandomInstance {
  LatentField field;
  Hyperparams hyper;
  ObservationSet data;
  std::vector<double> missing_y;
};

// Random in-domain point with roughly 70% of (i, j, t, k) cells observed.
inline RandomInstance random_instance(ModelKind kind, ModelDims d, std::mt19937_64& rng,
                                      const PriorConfig& priors = {}) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomInstance r;
  r.field = LatentField::zeros(d);
  auto fill = [&](auto& m) {
    for (Eigen::Index a = 0; a < m.size(); ++a) m.data()[a] = z(rng);
  };
  fill(r.field.beta);
  fill(r.field.alpha);
  fill(r.field.gamma);
  fill(r.field.phi);
  fill(r.field.delta);
  fill(r.field.psi);
  fill(r.field.omega);
  r.field.lambda = z(rng);
  for (int k = 0; k < 3; ++k) {
    r.field.nu[k] = z(rng);
    r.field.lambda_src[k] = 0.5 * z(rng);
  }
  for (auto id : hyper_ids(kind)) {
    r.hyper.at(id) = is_correlation(id) ? 1.9 * u(rng) - 0.95 : 0.2 + 2.0 * u(rng);
  }
  if (kind == ModelKind::IDML && priors.sigma3_upper) r.hyper.sigma_src[2] = 0.05 + 0.3 * u(rng);

  std::vector<Observation> obs;
  for (int i = 0; i < d.countries; ++i)
    for (int j = 0; j < d.vaccines; ++j)
      for (int t = 0; t < d.times; ++t)
        for (auto k : kAllSources) {
          if (u(rng) < 0.7) obs.push_back({i, j, t, k, 2.0 * z(rng)});
        }
  std::shuffle(obs.begin(), obs.end(), rng);
  r.data = ObservationSet(d, std::move(obs));
  if (kind == ModelKind::BDSL) {
    for (std::size_t m = 0; m < r.data.missing_cells().size(); ++m) r.missing_y.push_back(2.0 * z(rng));
  }
  return r;
}

}  // namespace vaxcov::oracle
