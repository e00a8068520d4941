#include "mixreg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mixreg {

namespace {

constexpr std::size_t kProbeAttempts = 1000;
constexpr double kMinAcceptance = 0.01;
constexpr double kNoiseClip = 3.0;

std::size_t draw_category(Rng& rng, std::span<const double> cumulative) {
  const double u = rng.uniform();
  for (std::size_t j = 0; j + 1 < cumulative.size(); ++j) {
    if (u < cumulative[j]) return j;
  }
  return cumulative.size() - 1;
}

GeneratedData generate_impl(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng, bool agnostic) {
  spec.validate();
  if (components.k() != spec.k || components.d() != spec.d) {
    throw std::invalid_argument("generate: components do not match spec k/d");
  }
  const auto weights = spec.weights();
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());

  Vector w;
  if (agnostic) w = unit_vector(rng, spec.d);

  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto d = static_cast<Eigen::Index>(spec.d);
  Matrix x(n, d);
  Vector y(n);
  std::vector<std::size_t> assignments(spec.n);

  const std::size_t max_attempts = kProbeAttempts + 1000 * spec.n;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  Vector xi(d);
  while (accepted < spec.n) {
    if (attempts == kProbeAttempts &&
        static_cast<double>(accepted) < kMinAcceptance * static_cast<double>(attempts)) {
      throw InfeasibleError("generate: acceptance rate below 1% over the probe batch (label_bound/separation_margin)");
    }
    if (attempts >= max_attempts) throw InfeasibleError("generate: rejection sampling did not finish");
    ++attempts;

    for (Eigen::Index j = 0; j < d; ++j) xi(j) = rng.normal();
    const std::size_t a = draw_category(rng, cumulative);
    double noise = spec.sigma * rng.normal();
    if (agnostic) {
      noise = std::clamp(noise, -kNoiseClip * spec.sigma, kNoiseClip * spec.sigma);
      noise += spec.misspec_level * std::cos(w.dot(xi));
    }
    const double yi = components.component(a).dot(xi) + noise;

    if (spec.label_bound && std::abs(yi) > *spec.label_bound) continue;
    if (spec.separation_margin > 0.0) {
      bool separated = true;
      for (std::size_t l = 0; l < spec.k && separated; ++l) {
        if (l != a && std::abs(yi - components.component(l).dot(xi)) < spec.separation_margin) separated = false;
      }
      if (!separated) continue;
    }
    x.row(static_cast<Eigen::Index>(accepted)) = xi.transpose();
    y(static_cast<Eigen::Index>(accepted)) = yi;
    assignments[accepted] = a;
    ++accepted;
  }

  GroundTruth truth{components, std::move(assignments), spec.sigma, agnostic ? spec.misspec_level : 0.0};
  return GeneratedData{Dataset(std::move(x), std::move(y), std::move(truth)), attempts - accepted, std::move(w)};
}

}  // namespace

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("GeneratorSpec." + field + ": " + why);
  };
  if (n < 1) fail("n", "must be >= 1");
  if (d < 1) fail("d", "must be >= 1");
  if (k < 1) fail("k", "must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail("sigma", "must be finite and >= 0");
  if (!(component_scale > 0.0) || !std::isfinite(component_scale)) fail("component_scale", "must be finite and > 0");
  if (!(misspec_level >= 0.0) || !std::isfinite(misspec_level)) fail("misspec_level", "must be finite and >= 0");
  if (!(separation_margin >= 0.0) || !std::isfinite(separation_margin)) fail("separation_margin", "must be finite and >= 0");
  if (label_bound && !(*label_bound > 0.0)) fail("label_bound", "must be > 0");
  if (mode == GenerationMode::Realizable && misspec_level != 0.0) fail("misspec_level", "requires agnostic mode");
  if (!mixing_weights.empty()) {
    if (mixing_weights.size() != k) fail("mixing_weights", "needs k entries");
    double total = 0.0;
    for (double v : mixing_weights) {
      if (!(v >= 0.0)) fail("mixing_weights", "entries must be >= 0");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("mixing_weights", "must sum to 1");
  }
}

std::vector<double> GeneratorSpec::weights() const {
  if (!mixing_weights.empty()) return mixing_weights;
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

ParameterSet draw_components(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  Matrix m(static_cast<Eigen::Index>(spec.k), static_cast<Eigen::Index>(spec.d));
  for (std::size_t j = 0; j < spec.k; ++j) {
    m.row(static_cast<Eigen::Index>(j)) = spec.component_scale * unit_vector(rng, spec.d).transpose();
  }
  return ParameterSet(std::move(m));
}

GeneratedData generate_realizable(const GeneratorSpec& spec, Rng& rng) {
  const ParameterSet components = draw_components(spec, rng);
  return generate_realizable(spec, components, rng);
}

GeneratedData generate_realizable(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng) {
  if (spec.mode != GenerationMode::Realizable) throw std::invalid_argument("generate_realizable: mode must be Realizable");
  return generate_impl(spec, components, rng, false);
}

GeneratedData generate_agnostic(const GeneratorSpec& spec, Rng& rng) {
  const ParameterSet components = draw_components(spec, rng);
  return generate_agnostic(spec, components, rng);
}

GeneratedData generate_agnostic(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng) {
  if (spec.mode != GenerationMode::Agnostic) throw std::invalid_argument("generate_agnostic: mode must be Agnostic");
  return generate_impl(spec, components, rng, true);
}

GeneratedData generate(const GeneratorSpec& spec, Rng& rng) {
  return spec.mode == GenerationMode::Realizable ? generate_realizable(spec, rng) : generate_agnostic(spec, rng);
}

GeneratedData generate(const GeneratorSpec& spec, const ParameterSet& components, Rng& rng) {
  return spec.mode == GenerationMode::Realizable ? generate_realizable(spec, components, rng)
                                                 : generate_agnostic(spec, components, rng);
}

ClipResult clip_labels(const Dataset& data, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("clip_labels: b must be > 0");
  Vector y = data.labels();
  std::size_t clamped = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) > b) {
      y(i) = b;
      ++clamped;
    } else if (y(i) < -b) {
      y(i) = -b;
      ++clamped;
    }
  }
  return ClipResult{data.with_labels(std::move(y)), clamped};
}

}  // namespace mixreg
