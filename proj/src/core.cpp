#include "poecal/core.hpp"

namespace poecal {

std::string_view to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::unconstrained: return "unconstrained";
    case ConstraintMode::box_01: return "box_01";
    case ConstraintMode::sum_to_one: return "sum_to_one";
  }
  return "unknown";
}

ConstraintMode parse_constraint_mode(std::string_view text) {
  if (text == "unconstrained") return ConstraintMode::unconstrained;
  if (text == "box_01") return ConstraintMode::box_01;
  if (text == "sum_to_one") return ConstraintMode::sum_to_one;
  throw ConfigError("unknown constraint mode '" + std::string(text) + "'");
}

std::string_view to_string(JacobianMode mode) {
  return mode == JacobianMode::exact ? "exact" : "identity";
}

JacobianMode parse_jacobian_mode(std::string_view text) {
  if (text == "exact") return JacobianMode::exact;
  if (text == "identity") return JacobianMode::identity;
  throw ConfigError("unknown jacobian mode '" + std::string(text) + "'");
}

}  // namespace poecal
