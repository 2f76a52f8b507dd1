#pragma once

#include <string>
#include <vector>

#include "mmg/domain.hpp"
#include "mmg/scenarios.hpp"
#include "mmg/subproblem.hpp"

namespace mmg::audit {

struct Violation {
  std::string constraint;  // family name
  int t = -1;
  int h = -1;
  double amount = 0.0;  // magnitude of the violation
  bool warning = false; // true for soft checks (e.g. simultaneous buy/sell)
};

struct AuditReport {
  std::vector<Violation> violations;  // hard failures only
  std::vector<Violation> warnings;
  double max_violation = 0.0;
  bool ok(double tol = 1e-6) const { return max_violation <= tol; }
};

/// Evaluates the original (nonconvex) operating constraints directly on a
/// solved dispatch: power balance per scenario, DG limits/reserve bands,
/// inter-hour ramps across scenario pairs, the SOC recursions and bounds,
/// terminal conditions, flexible-load caps/neutrality and the shed budget.
/// Simultaneous charge/discharge or buy/sell above tol is reported as a
/// warning (harmless for a convex relaxation, but worth surfacing).
AuditReport audit_dispatch(const subproblem::MgDispatch& d,
                           const domain::MgConfig& mg, int mg_index,
                           const scenarios::ScenarioSet& scen,
                           const domain::HorizonSpec& horizon,
                           double tol = 1e-6);

}  // namespace mmg::audit
