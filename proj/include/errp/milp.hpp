#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "errp/evaluate.hpp"
#include "errp/instance.hpp"
#include "errp/plan.hpp"

namespace errp {

enum class VarKind { continuous, binary };
enum class ConstraintSense { le, ge, eq };

struct MilpVariable {
  std::string name;
  VarKind kind = VarKind::continuous;
  double lb = 0.0;
  double ub = 0.0;
};

struct LinearTerm {
  int var = 0;  // index into MilpModel::vars
  double coeff = 0.0;
};

struct MilpConstraint {
  std::string name;
  std::vector<LinearTerm> terms;
  ConstraintSense sense = ConstraintSense::le;
  double rhs = 0.0;
};

struct MilpModel {
  std::string name;
  bool minimize = true;
  std::vector<LinearTerm> objective;
  double objective_constant = 0.0;
  std::vector<MilpVariable> vars;
  std::vector<MilpConstraint> constraints;
  std::vector<std::string> warnings;  // e.g. unreachable retailers
  // Penalty-weighted sum of the per-(retailer, period) linearization gaps:
  // an upper bound on how far the objective's shortage terms can sit below
  // the exact loss values for any fixed plan.
  double linearization_gap_bound = 0.0;

  int var_index(const std::string& name) const;  // -1 if absent
  bool structurally_equal(const MilpModel& o) const;
};

struct MilpBuildOptions {
  int segments = 10;
  // Track the battery on the solver side in whole level units (matching the
  // dynamic program's grid) instead of exact kWh.
  bool discretized = false;
  int levels = 20;
};

// Assemble the static-uncertainty model: routing binaries, cargo balance,
// big-M battery clamps and tangent cuts for the cumulative-demand loss
// functions.  Variable names follow a fixed scheme (V_i_t, T_i_j_t, Q_i_t,
// L_t, W_t, b_t, bu_t, Eb_t, Ef_t, Ineg_i_t, Ipos_i_t, Ecap_i_t plus
// documented auxiliaries), so solutions can be decoded by name.
MilpModel build_model(const Instance& inst, const MilpBuildOptions& opt = {});

// CPLEX-style LP text, byte-deterministic for a given model.
void write_model(const MilpModel& model, const std::string& path);
std::string model_to_lp(const MilpModel& model);

// Parse the documented LP subset back (sections Minimize / Subject To /
// Bounds / Binaries / End).
MilpModel read_model(const std::string& path);
MilpModel parse_lp(const std::string& text, const std::string& origin);

enum class SolveStatus { optimal, feasible, infeasible, unknown };

struct SolverSolution {
  SolveStatus status = SolveStatus::unknown;
  double objective = 0.0;
  std::vector<double> values;  // aligned with model.vars
  double gap = 0.0;
  double runtime_sec = 0.0;
  std::vector<std::string> warnings;  // variables defaulted to zero, etc.
};

// Solution file: "STATUS <status> OBJ <num> [GAP <num>] [TIME <num>]" then
// one "<name> <value>" per line.  Unknown names are an error; binaries must
// be integral within 1e-6.
SolverSolution read_solution(const std::string& path, const MilpModel& model);
SolverSolution parse_solution(const std::string& text, const MilpModel& model,
                              const std::string& origin);

// Recover the plan encoded in a solution's V/L/Q variables.  Errors name the
// violated model rule (one position per period, transit adjacency, ...).
Plan decode_plan(const MilpModel& model, const SolverSolution& sol,
                 const Instance& inst);

// The model's own cost of a fixed plan: travel terms exactly, shortage terms
// through the tangent-cut envelopes (the value an LP solver would assign to
// this plan).  Used to check the relaxation direction of the linearization.
double linearized_plan_cost(const Plan& plan, const Instance& inst,
                            const MilpBuildOptions& opt = {});

// ---------------------------------------------------------------------------
// Exact reference solver by exhaustive enumeration (small instances only).

struct EnumOptions {
  // DFS node budget over the route tree; exceeding it aborts with an error
  // reporting the explored/estimated size.
  long long budget = 20'000'000;
  // Delivery quantities are enumerated on this grid (units).
  int delivery_step = 1;
  EvalOptions eval;  // battery mode for the exact evaluation
};

struct EnumBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimum-exact-cost plan among all route/load/delivery schedules that can
// never overflow a retailer under any demand outcome of positive probability
// (so the plan is a valid fixed policy and its cost an upper bound on the
// optimal policy value).  Loads are placed as late as possible, which is
// never worse.  Ties break lexicographically.
Plan enumerate_optimal_plan(const Instance& inst, const EnumOptions& opt = {});

}  // namespace errp
