#include "estrocon/model.hpp"

#include <fmt/format.h>

#include "estrocon/error.hpp"

namespace estrocon {

ValidationError::ValidationError(std::vector<std::string> list)
    : Error([&] {
        std::string msg = "validation failed:";
        for (const auto& v : list) msg += "\n  - " + v;
        return msg;
      }()),
      violations(std::move(list)) {}

std::string_view to_string(Diet diet) { return diet == Diet::CD ? "CD" : "HFD"; }

Diet parse_diet(std::string_view text) {
  if (text == "CD") return Diet::CD;
  if (text == "HFD") return Diet::HFD;
  throw ValidationError({fmt::format("unknown diet '{}' (expected CD or HFD)", text)});
}

namespace {

void require_non_negative(std::vector<std::string>& out, const char* name, double v) {
  if (!std::isfinite(v) || v < 0.0) out.push_back(fmt::format("{} must be finite and >= 0, got {}", name, v));
}

}  // namespace

std::vector<std::string> ModelParams::violations() const {
  std::vector<std::string> out;
  const std::pair<const char*, double> fields[] = {
      {"k1", k1}, {"a1", a1}, {"m1", m1}, {"mu", mu}, {"r", r},   {"alpha", alpha}, {"k2", k2}, {"m2", m2},
      {"k3", k3}, {"c", c},   {"l", l},   {"a2", a2}, {"a3", a3}, {"eta", eta},     {"p", p}};
  for (const auto& [name, value] : fields) require_non_negative(out, name, value);
  if (!(p > 0.0 && p <= 1.0)) out.push_back(fmt::format("p must lie in (0, 1], got {}", p));
  if (!(l >= 1.0)) out.push_back(fmt::format("l must be >= 1, got {}", l));
  if (!(m1 > 0.0)) out.push_back(fmt::format("m1 must be > 0, got {}", m1));
  if (!(m2 > 0.0)) out.push_back(fmt::format("m2 must be > 0, got {}", m2));
  if (!(mu > 0.0)) out.push_back(fmt::format("mu must be > 0, got {}", mu));
  return out;
}

std::vector<std::string> ModelParams::warnings() const {
  std::vector<std::string> out;
  if (a3 == 0.0) out.emplace_back("a3 == 0: adaptation term is c at E == 0 and 0 for every E > 0");
  if (a2 == 0.0) out.emplace_back("a2 == 0: death term is c at E == 0 and 0 for every E > 0");
  return out;
}

void ModelParams::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(std::move(v));
}

DietInit DietInit::table(Diet diet) {
  DietInit init;
  init.diet = diet;
  if (diet == Diet::HFD) {
    init.E0 = 1293.918;
    init.F0 = 368.820;
  }
  return init;
}

DietInit DietInit::steady_state(Diet diet, const ModelParams& params) {
  DietInit init = table(diet);
  init.F0 = params.mu * init.E0 / params.r;
  return init;
}

std::vector<std::string> DietInit::violations() const {
  std::vector<std::string> out;
  require_non_negative(out, "T0", T0);
  require_non_negative(out, "S0", S0);
  require_non_negative(out, "R0", R0);
  require_non_negative(out, "E0", E0);
  require_non_negative(out, "F0", F0);
  return out;
}

double hill_term(double E, double a, double c, double l) {
  if (a == 0.0) return E == 0.0 ? c : 0.0;
  const double x = std::pow(E / a, l);
  if (std::isinf(x)) return 0.0;
  return c / (1.0 + x);
}

double hill_term_derivative(double E, double a, double c, double l) {
  if (a == 0.0) return 0.0;
  // -c * l * (E/a)^(l-1) / (a * (1 + (E/a)^l)^2), divided stepwise so that
  // neither the numerator nor the squared denominator overflows.
  const double ratio = E / a;
  const double q = std::pow(ratio, l - 1.0);
  const double x = q * ratio;
  if (std::isinf(q) || std::isinf(x)) return 0.0;
  return -c * l / a * (q / (1.0 + x)) / (1.0 + x);
}

double growth_factor(double E, double k1, double a1) {
  const double denom = a1 + E;
  return denom == 0.0 ? 0.0 : k1 * E / denom;
}

double growth_factor_derivative(double E, double k1, double a1) {
  const double denom = a1 + E;
  return denom == 0.0 ? 0.0 : k1 * a1 / (denom * denom);
}

namespace {

void check_finite(const char* model, const char* component, double v) {
  if (!std::isfinite(v)) throw EvaluationError(fmt::format("{}: non-finite {} = {}", model, component, v));
}

}  // namespace

StateBasic rhs_basic(const StateBasic& s, const ModelParams& p) {
  check_finite("rhs_basic", "T", s.T);
  check_finite("rhs_basic", "E", s.E);
  check_finite("rhs_basic", "F", s.F);
  return {
      growth_factor(s.E, p.k1, p.a1) * s.T * (1.0 - p.m1 * s.T),
      p.r * s.F - p.mu * s.E,
      -p.alpha * s.T * s.F,
  };
}

StateExtended rhs_extended(const StateExtended& s, const ModelParams& p, double u) {
  check_finite("rhs_extended", "S", s.S);
  check_finite("rhs_extended", "R", s.R);
  check_finite("rhs_extended", "E", s.E);
  check_finite("rhs_extended", "F", s.F);
  check_finite("rhs_extended", "u", u);
  if (u < 0.0 || u > 1.0) throw EvaluationError(fmt::format("rhs_extended: control u = {} outside [0, 1]", u));

  const double crowding = 1.0 - p.m1 * (s.S + p.eta * s.R);
  const double death = hill_term(s.E, p.a2, p.c, p.l);
  const double adaptation = hill_term(s.E, p.a3, p.c, p.l);
  return {
      growth_factor(s.E, p.k1, p.a1) * s.S * crowding - death * s.S - adaptation * s.S,
      p.k3 * s.R * crowding + adaptation * s.S,
      (1.0 - u) * p.r * s.F - p.mu * s.E,
      p.k2 * s.F * (1.0 - p.m2 * s.F) - p.alpha * (s.S + s.R) * s.F,
  };
}

double fat_volume_estimate(const AdipocyteGeometry& g) {
  if (!(g.d > 0.0)) throw DomainError(fmt::format("adipocyte diameter must be > 0, got {}", g.d));
  if (!(g.n >= 0.0) || !(g.V >= 0.0)) throw DomainError("adipocyte density and cube volume must be >= 0");
  return g.n * std::cbrt(g.V * g.V) / g.d;
}

CapacityCheck carrying_capacity_check(const ModelParams& p) {
  CapacityCheck out;
  out.threshold = p.alpha == 0.0 ? 0.0 : p.alpha / (p.m1 * p.eta);
  out.margin = p.k2 - out.threshold;
  out.feasible = out.margin >= 0.0;
  return out;
}

}  // namespace estrocon
