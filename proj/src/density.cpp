#include "poecal/density.hpp"

namespace poecal {

std::string_view to_string(ProbeKind kind) {
  return kind == ProbeKind::rademacher ? "rademacher" : "gaussian";
}

std::string_view to_string(Integrator integrator) {
  return integrator == Integrator::midpoint ? "midpoint" : "euler";
}

std::string_view to_string(DensityMode mode) { return mode == DensityMode::exact ? "exact" : "ode"; }

ProbeKind parse_probe_kind(std::string_view text) {
  if (text == "rademacher") return ProbeKind::rademacher;
  if (text == "gaussian") return ProbeKind::gaussian;
  throw ConfigError("unknown probe kind '" + std::string(text) + "'", "density.probe_kind");
}

Integrator parse_integrator(std::string_view text) {
  if (text == "midpoint") return Integrator::midpoint;
  if (text == "euler") return Integrator::euler;
  throw ConfigError("unknown integrator '" + std::string(text) + "'", "density.integrator");
}

DensityMode parse_density_mode(std::string_view text) {
  if (text == "exact") return DensityMode::exact;
  if (text == "ode") return DensityMode::ode;
  throw ConfigError("unknown density mode '" + std::string(text) + "'", "density.mode");
}

}  // namespace poecal
