#include "plr/synthgen.hpp"

#include <cmath>
#include <random>

#include "plr/errors.hpp"
#include "plr/rng.hpp"

namespace plr {

void SynthSpec::validate() const {
  if (n_instances < 1 || n_classes < 1 || feature_dim < 1) {
    throw ValidationError("synthetic dataset counts must be >= 1");
  }
  if (!(positive_rate > 0.0 && positive_rate < 1.0)) {
    throw ValidationError("positive_rate must lie in (0, 1)");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("noise_sigma must be finite and >= 0");
  }
}

Dataset gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.feature_dim);

  Matrix prototypes(static_cast<Eigen::Index>(spec.n_classes), d);
  {
    auto eng = make_engine(spec.seed, 0x50524f544fULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index c = 0; c < prototypes.rows(); ++c) {
      double norm = 0.0;
      do {
        for (Eigen::Index j = 0; j < d; ++j) prototypes(c, j) = normal(eng);
        norm = prototypes.row(c).norm();
      } while (norm == 0.0);
      prototypes.row(c) /= norm;
    }
  }

  Matrix features = Matrix::Zero(static_cast<Eigen::Index>(spec.n_instances), d);
  TriStateLabelMatrix labels(spec.n_instances, spec.n_classes, LabelState::Negative);
  for (std::size_t i = 0; i < spec.n_instances; ++i) {
    auto eng = make_engine(spec.seed, 0x1000'0000'0000ULL + i);
    std::bernoulli_distribution positive(spec.positive_rate);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      if (positive(eng)) {
        labels.set(i, c, LabelState::Positive);
        features.row(r) += prototypes.row(static_cast<Eigen::Index>(c));
      }
    }
    for (Eigen::Index j = 0; j < d; ++j) features(r, j) += spec.noise_sigma * normal(eng);
  }
  return Dataset(std::move(features), std::move(labels), "synthetic");
}

}  // namespace plr
