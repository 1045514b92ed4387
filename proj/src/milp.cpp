#include "errp/milp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "errp/demand.hpp"
#include "errp/energy.hpp"

namespace errp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num_str(double v) {
  if (v == static_cast<double>(std::llround(v)) && std::fabs(v) < 1e15)
    return std::to_string(std::llround(v));
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Incremental model assembly with name-indexed variables.
struct Builder {
  MilpModel m;
  std::unordered_map<std::string, int> index;

  int var(const std::string& name, VarKind kind, double lb, double ub) {
    MilpVariable v;
    v.name = name;
    v.kind = kind;
    v.lb = lb;
    v.ub = ub;
    m.vars.push_back(v);
    const int id = static_cast<int>(m.vars.size()) - 1;
    index.emplace(name, id);
    return id;
  }

  int get(const std::string& name) const {
    const auto it = index.find(name);
    if (it == index.end())
      throw std::logic_error("model builder: unknown variable " + name);
    return it->second;
  }

  void con(const std::string& name, std::vector<LinearTerm> terms,
           ConstraintSense sense, double rhs) {
    MilpConstraint c;
    c.name = name;
    for (const LinearTerm& t : terms)
      if (t.coeff != 0.0) c.terms.push_back(t);
    c.sense = sense;
    c.rhs = rhs;
    m.constraints.push_back(std::move(c));
  }

  void obj(int var, double coeff) {
    if (coeff != 0.0) m.objective.push_back({var, coeff});
  }
};

std::string nm(const char* stem, int a) { return std::string(stem) + "_" + std::to_string(a); }
std::string nm(const char* stem, int a, int b) {
  return std::string(stem) + "_" + std::to_string(a) + "_" + std::to_string(b);
}
std::string nm(const char* stem, int a, int b, int c) {
  return nm(stem, a, b) + "_" + std::to_string(c);
}
std::string nm(const char* stem, int a, int b, int c, int d) {
  return nm(stem, a, b, c) + "_" + std::to_string(d);
}

// One row of the transit-variable table: a road arc, or the implicit stay
// loop (arc = -1, zero energy and supply).
struct TransitArc {
  int from, to;
  int arc;  // index into network.arcs, -1 for stay
};

std::vector<TransitArc> transit_arcs(const Instance& inst) {
  std::vector<TransitArc> out;
  for (std::size_t a = 0; a < inst.network.arcs.size(); ++a)
    out.push_back({inst.network.arcs[a].from, inst.network.arcs[a].to,
                   static_cast<int>(a)});
  if (inst.network.allow_stay)
    for (int i = 0; i < inst.network.node_count; ++i) out.push_back({i, i, -1});
  return out;
}

std::vector<char> reachable_within(const RoadNetwork& net, int from, int steps) {
  std::vector<char> seen(net.node_count, 0);
  seen[from] = 1;
  std::vector<int> frontier{from};
  for (int s = 0; s < steps && !frontier.empty(); ++s) {
    std::vector<int> next;
    for (int n : frontier)
      for (int to : net.out_neighbors(n))
        if (!seen[to]) {
          seen[to] = 1;
          next.push_back(to);
        }
    frontier.swap(next);
  }
  return seen;
}

// Per-(retailer, period) loss envelopes over the cumulative demand, plus the
// interval bounds used to size the big-M constants.
struct LossChain {
  std::vector<PiecewiseLinearLoss> loss, comp;  // [t-1]
  std::vector<double> ineg_ub, ipos_ub, ecap_ub, mean_cum;
};

LossChain build_loss_chain(const RetailerSpec& r, int horizon, int segments) {
  LossChain ch;
  DemandDistribution cum = point_mass(0);
  double sum_ecap_ub = 0.0, sum_ineg_ub = 0.0, mean_cum = 0.0;
  double ipos_prev_ub = r.initial_inventory;
  const double k = r.capacity;
  for (int t = 1; t <= horizon; ++t) {
    cum = convolve(cum, r.demand[t - 1]);
    mean_cum += r.demand[t - 1].mean();
    ch.loss.push_back(piecewise_linearize(cum, segments, LossKind::loss));
    ch.comp.push_back(piecewise_linearize(cum, segments, LossKind::complementary));
    ch.ecap_ub.push_back(std::max(0.0, ipos_prev_ub));
    sum_ecap_ub += ch.ecap_ub.back();
    const double q_lb = r.initial_inventory - sum_ecap_ub;
    const double q_ub = r.initial_inventory + t * k + sum_ineg_ub;
    ch.ineg_ub.push_back(mean_cum + std::max(0.0, -q_lb));
    sum_ineg_ub += ch.ineg_ub.back();
    ch.ipos_ub.push_back(std::max(0.0, q_ub));
    ipos_prev_ub = ch.ipos_ub.back();
    ch.mean_cum.push_back(mean_cum);
  }
  return ch;
}

}  // namespace

int MilpModel::var_index(const std::string& name) const {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == name) return static_cast<int>(i);
  return -1;
}

MilpModel build_model(const Instance& inst, const MilpBuildOptions& opt) {
  inst.validate();
  if (opt.segments < 1)
    throw std::runtime_error("build_model: segments must be >= 1");
  if (opt.discretized && opt.levels < 1)
    throw std::runtime_error("build_model: levels must be >= 1");

  const int T = inst.horizon;
  const int N = inst.network.node_count;
  const int K = inst.vehicle.load_capacity;
  const int C = static_cast<int>(inst.retailers.size());
  const int depot = inst.network.depot;
  const double w = inst.vehicle.unladen_weight;
  const double wpu = inst.vehicle.weight_per_unit;
  const double B = inst.vehicle.battery_capacity;
  const double lam = inst.vehicle.efficiency;
  const double l0 = inst.initial_vehicle_load;
  const bool disc = opt.discretized;
  const int LV = opt.levels;
  // All battery quantities live in "clamp units": kWh by default, level
  // units when discretized; kap converts clamp units back to kWh.
  const double kap = disc ? B / LV : 1.0;
  const double Bc = disc ? LV : B;
  const double W_lo = w, W_hi = w + K * wpu;

  const std::vector<TransitArc> tarcs = transit_arcs(inst);

  // Arc energy in clamp units: requirement per vehicle fill and ERS supply.
  std::vector<std::vector<double>> req_of_fill(inst.network.arcs.size());
  std::vector<double> sup_c(inst.network.arcs.size());
  double req_max = 0.0, req_min = 0.0, sup_max = 0.0;
  for (std::size_t a = 0; a < inst.network.arcs.size(); ++a) {
    const ArcSpec& arc = inst.network.arcs[a];
    if (disc) {
      sup_c[a] = static_cast<double>(discretize_kwh(arc.supplied_energy, LV, B));
      req_of_fill[a].resize(K + 1);
      for (int v = 0; v <= K; ++v) {
        req_of_fill[a][v] = static_cast<double>(
            discretize_energy(arc, w + v * wpu, LV, B));
        req_max = std::max(req_max, req_of_fill[a][v]);
        req_min = std::min(req_min, req_of_fill[a][v]);
      }
    } else {
      sup_c[a] = arc.supplied_energy;
      req_max = std::max(req_max, required_battery_energy(arc, W_hi));
      req_min = std::min({req_min, required_battery_energy(arc, W_lo),
                          required_battery_energy(arc, W_hi)});
    }
    sup_max = std::max(sup_max, sup_c[a]);
  }
  if (disc && req_min < 0.0)
    throw std::runtime_error(
        "build_model: the discretized battery mode only bounds the traction "
        "requirement from below and cannot represent regenerative arcs");

  Builder bld;
  bld.m.name = "errp_static";
  bld.m.minimize = true;

  // ---- Variables (creation order fixes the serialized layout).
  for (int t = 1; t <= T; ++t)
    for (int i = 0; i < N; ++i) bld.var(nm("V", i, t), VarKind::binary, 0, 1);
  for (int t = 1; t < T; ++t)
    for (const TransitArc& a : tarcs)
      bld.var(nm("T", a.from, a.to, t), VarKind::binary, 0, 1);
  for (int t = 1; t <= T; ++t) bld.var(nm("L", t), VarKind::continuous, 0, K);
  for (int t = 1; t <= T; ++t)
    for (int r = 0; r < C; ++r)
      bld.var(nm("Q", inst.retailers[r].node, t), VarKind::continuous, 0,
              inst.retailers[r].capacity);
  for (int t = 1; t <= T; ++t)
    bld.var(nm("W", t), VarKind::continuous, W_lo, W_hi);
  if (disc) {
    for (int t = 1; t < T; ++t)
      for (int v = 0; v <= K; ++v) bld.var(nm("vl", v, t), VarKind::binary, 0, 1);
  } else {
    for (int t = 1; t < T; ++t)
      for (const TransitArc& a : tarcs)
        if (a.arc >= 0 && inst.network.arcs[a.arc].alpha != 0.0)
          bld.var(nm("TW", a.from, a.to, t), VarKind::continuous, 0, W_hi);
  }
  for (int t = 1; t < T; ++t)
    bld.var(nm("Req", t), VarKind::continuous, req_min, req_max);

  const double sb = disc ? static_cast<double>(discretize_kwh(
                               inst.start_battery, LV, B))
                         : inst.start_battery;
  bld.var(nm("b", 1), VarKind::continuous, sb, sb);
  for (int t = 2; t <= T; ++t) bld.var(nm("b", t), VarKind::continuous, 0, Bc);
  const double bu_lb = -req_max, bu_ub = Bc + sup_max - req_min;
  for (int t = 2; t <= T; ++t)
    bld.var(nm("bu", t), VarKind::continuous, bu_lb, bu_ub);
  for (int t = 2; t <= T; ++t) {
    bld.var(nm("y0", t), VarKind::binary, 0, 1);
    bld.var(nm("yB", t), VarKind::binary, 0, 1);
  }
  const double ef_ub = kap * req_max / lam;
  for (int t = 1; t < T; ++t) {
    bld.var(nm("Eb", t), VarKind::continuous, 0, B);
    bld.var(nm("yD", t), VarKind::binary, 0, 1);
    bld.var(nm("Ef", t), VarKind::continuous, 0, ef_ub);
  }

  std::vector<LossChain> chains;
  for (int r = 0; r < C; ++r)
    chains.push_back(build_loss_chain(inst.retailers[r], T, opt.segments));
  for (int t = 1; t <= T; ++t)
    for (int r = 0; r < C; ++r) {
      const int node = inst.retailers[r].node;
      bld.var(nm("Ineg", node, t), VarKind::continuous, 0, chains[r].ineg_ub[t - 1]);
      bld.var(nm("Ipos", node, t), VarKind::continuous, 0, chains[r].ipos_ub[t - 1]);
      bld.var(nm("Ecap", node, t), VarKind::continuous, 0, chains[r].ecap_ub[t - 1]);
      bld.var(nm("yE", node, t), VarKind::binary, 0, 1);
    }

  // ---- Movement: one position per period, departures follow arcs, transit
  // and position indicators agree.
  bld.con("start", {{bld.get(nm("V", inst.start_node, 1)), 1.0}},
          ConstraintSense::eq, 1.0);
  for (int t = 1; t <= T; ++t) {
    std::vector<LinearTerm> terms;
    for (int i = 0; i < N; ++i) terms.push_back({bld.get(nm("V", i, t)), 1.0});
    bld.con(nm("onepos", t), terms, ConstraintSense::eq, 1.0);
  }
  for (int t = 1; t < T; ++t) {
    for (int i = 0; i < N; ++i) {
      std::vector<LinearTerm> terms;
      for (const TransitArc& a : tarcs)
        if (a.from == i) terms.push_back({bld.get(nm("T", a.from, a.to, t)), 1.0});
      terms.push_back({bld.get(nm("V", i, t)), -1.0});
      bld.con(nm("depart", i, t), terms, ConstraintSense::eq, 0.0);
    }
    for (const TransitArc& a : tarcs) {
      const int tv = bld.get(nm("T", a.from, a.to, t));
      const int vi = bld.get(nm("V", a.from, t));
      const int vj = bld.get(nm("V", a.to, t + 1));
      bld.con(nm("link1", a.from, a.to, t), {{tv, 1.0}, {vi, -1.0}, {vj, -1.0}},
              ConstraintSense::ge, -1.0);
      bld.con(nm("link2", a.from, a.to, t), {{tv, 1.0}, {vi, -1.0}},
              ConstraintSense::le, 0.0);
      bld.con(nm("link3", a.from, a.to, t), {{tv, 1.0}, {vj, -1.0}},
              ConstraintSense::le, 0.0);
    }
  }

  // ---- Cargo: depot-only loads, presence-gated deliveries, vehicle
  // inventory within [0, K] through the whole horizon, weight tracking.
  for (int t = 1; t <= T; ++t)
    bld.con(nm("load", t),
            {{bld.get(nm("L", t)), 1.0},
             {bld.get(nm("V", depot, t)), -static_cast<double>(K)}},
            ConstraintSense::le, 0.0);
  for (int t = 1; t <= T; ++t)
    for (int r = 0; r < C; ++r) {
      const int node = inst.retailers[r].node;
      bld.con(nm("deliver", node, t),
              {{bld.get(nm("Q", node, t)), 1.0},
               {bld.get(nm("V", node, t)),
                -static_cast<double>(inst.retailers[r].capacity)}},
              ConstraintSense::le, 0.0);
    }
  for (int t = 1; t <= T; ++t) {
    std::vector<LinearTerm> terms;
    for (int k = 1; k <= t; ++k) terms.push_back({bld.get(nm("L", k)), 1.0});
    for (int r = 0; r < C; ++r)
      for (int k = 1; k < t; ++k)
        terms.push_back({bld.get(nm("Q", inst.retailers[r].node, k)), -1.0});
    bld.con(nm("cargo_hi", t), terms, ConstraintSense::le, K - l0);
    bld.con(nm("cargo_lo", t), terms, ConstraintSense::ge, -l0);
  }
  {
    // Closes the end-of-horizon gap: final-period deliveries must also be
    // covered by cargo actually on board.
    std::vector<LinearTerm> terms;
    for (int k = 1; k <= T; ++k) terms.push_back({bld.get(nm("L", k)), 1.0});
    for (int r = 0; r < C; ++r)
      for (int k = 1; k <= T; ++k)
        terms.push_back({bld.get(nm("Q", inst.retailers[r].node, k)), -1.0});
    bld.con("cargo_end", terms, ConstraintSense::ge, -l0);
  }
  for (int t = 1; t <= T; ++t) {
    std::vector<LinearTerm> terms{{bld.get(nm("W", t)), 1.0}};
    for (int k = 1; k <= t; ++k)
      terms.push_back({bld.get(nm("L", k)), -static_cast<double>(wpu)});
    for (int r = 0; r < C; ++r)
      for (int k = 1; k <= t; ++k)
        terms.push_back({bld.get(nm("Q", inst.retailers[r].node, k)), wpu});
    bld.con(nm("weight", t), terms, ConstraintSense::eq, w + l0 * wpu);
  }

  // ---- Required traction energy of each period's transit.
  if (disc) {
    for (int t = 1; t < T; ++t) {
      std::vector<LinearTerm> sum, wsum{{bld.get(nm("W", t)), -1.0}};
      for (int v = 0; v <= K; ++v) {
        sum.push_back({bld.get(nm("vl", v, t)), 1.0});
        if (v > 0) wsum.push_back({bld.get(nm("vl", v, t)), v * wpu});
      }
      bld.con(nm("fillsum", t), sum, ConstraintSense::eq, 1.0);
      bld.con(nm("fillw", t), wsum, ConstraintSense::eq, -w);
      for (const TransitArc& a : tarcs) {
        if (a.arc < 0) continue;
        for (int v = 0; v <= K; ++v) {
          const double eps = req_of_fill[a.arc][v];
          if (eps <= 0.0) continue;
          bld.con(nm("reqcut", a.from, a.to, v, t),
                  {{bld.get(nm("Req", t)), 1.0},
                   {bld.get(nm("T", a.from, a.to, t)), -eps},
                   {bld.get(nm("vl", v, t)), -eps}},
                  ConstraintSense::ge, -eps);
        }
      }
    }
  } else {
    for (int t = 1; t < T; ++t) {
      std::vector<LinearTerm> terms{{bld.get(nm("Req", t)), 1.0}};
      for (const TransitArc& a : tarcs) {
        if (a.arc < 0) continue;
        const ArcSpec& arc = inst.network.arcs[a.arc];
        if (arc.beta != 0.0)
          terms.push_back({bld.get(nm("T", a.from, a.to, t)), -arc.beta});
        if (arc.alpha != 0.0)
          terms.push_back({bld.get(nm("TW", a.from, a.to, t)), -arc.alpha});
      }
      bld.con(nm("req", t), terms, ConstraintSense::eq, 0.0);
      for (const TransitArc& a : tarcs) {
        if (a.arc < 0 || inst.network.arcs[a.arc].alpha == 0.0) continue;
        const int tw = bld.get(nm("TW", a.from, a.to, t));
        const int tv = bld.get(nm("T", a.from, a.to, t));
        const int wv = bld.get(nm("W", t));
        bld.con(nm("tw1", a.from, a.to, t), {{tw, 1.0}, {tv, -W_hi}},
                ConstraintSense::le, 0.0);
        bld.con(nm("tw2", a.from, a.to, t), {{tw, 1.0}, {tv, -W_lo}},
                ConstraintSense::ge, 0.0);
        bld.con(nm("tw3", a.from, a.to, t), {{tw, 1.0}, {wv, -1.0}, {tv, -W_lo}},
                ConstraintSense::le, -W_lo);
        bld.con(nm("tw4", a.from, a.to, t), {{tw, 1.0}, {wv, -1.0}, {tv, -W_hi}},
                ConstraintSense::ge, -W_hi);
      }
    }
  }

  // ---- Battery flow and the b = min(max(bu, 0), B) clamp.  The indicator
  // pair (y0 = battery floored, yB = battery ceilinged) makes the clamp and
  // the derived fuel quantity exact for any cost configuration; M constants
  // come from the bu interval [-req_max, Bc + sup_max].
  const double M0 = std::max({bu_ub, -bu_lb, 1.0});
  const double M1 = std::max({bu_ub - Bc, Bc - bu_lb, 1.0});
  const double Mb = std::max({Bc - bu_lb, bu_ub, 1.0});
  const double MD = std::max(B, 1.0);
  const double M2 = std::max({kap * bu_ub, -kap * bu_lb, 1.0});
  for (int t = 1; t < T; ++t) {
    std::vector<LinearTerm> terms{{bld.get(nm("bu", t + 1)), 1.0},
                                  {bld.get(nm("b", t)), -1.0},
                                  {bld.get(nm("Req", t)), 1.0}};
    for (const TransitArc& a : tarcs)
      if (a.arc >= 0 && sup_c[a.arc] != 0.0)
        terms.push_back({bld.get(nm("T", a.from, a.to, t)), -sup_c[a.arc]});
    bld.con(nm("flow", t), terms, ConstraintSense::eq, 0.0);
  }
  for (int t = 2; t <= T; ++t) {
    const int bu = bld.get(nm("bu", t));
    const int b = bld.get(nm("b", t));
    const int y0 = bld.get(nm("y0", t));
    const int yB = bld.get(nm("yB", t));
    bld.con(nm("y0a", t), {{bu, 1.0}, {y0, M0}}, ConstraintSense::le, M0);
    bld.con(nm("y0b", t), {{bu, 1.0}, {y0, M0}}, ConstraintSense::ge, 0.0);
    bld.con(nm("yBa", t), {{bu, 1.0}, {yB, -M1}}, ConstraintSense::le, Bc);
    bld.con(nm("yBb", t), {{bu, 1.0}, {yB, -M1}}, ConstraintSense::ge, Bc - M1);
    bld.con(nm("yexcl", t), {{y0, 1.0}, {yB, 1.0}}, ConstraintSense::le, 1.0);
    bld.con(nm("bclamp1", t), {{b, 1.0}, {y0, Bc}}, ConstraintSense::le, Bc);
    bld.con(nm("bclamp2", t), {{b, 1.0}, {yB, -Bc}}, ConstraintSense::ge, 0.0);
    bld.con(nm("bclamp3", t), {{b, 1.0}, {bu, -1.0}, {y0, -Mb}},
            ConstraintSense::le, 0.0);
    bld.con(nm("bclamp4", t), {{b, 1.0}, {bu, -1.0}, {y0, Mb}, {yB, Mb}},
            ConstraintSense::ge, 0.0);
  }
  // Battery discharge Eb_t = max(b_t - b_{t+1}, 0) in kWh, and fuel top-up
  // Ef_t = max(-bu_{t+1}, 0) / lambda, reusing y0 as the depletion indicator.
  for (int t = 1; t < T; ++t) {
    const int eb = bld.get(nm("Eb", t));
    const int yd = bld.get(nm("yD", t));
    const int ef = bld.get(nm("Ef", t));
    const int b0 = bld.get(nm("b", t));
    const int b1 = bld.get(nm("b", t + 1));
    const int bu = bld.get(nm("bu", t + 1));
    const int y0 = bld.get(nm("y0", t + 1));
    bld.con(nm("eb1", t), {{eb, 1.0}, {b0, -kap}, {b1, kap}},
            ConstraintSense::ge, 0.0);
    bld.con(nm("eb2", t), {{eb, 1.0}, {b0, -kap}, {b1, kap}, {yd, MD}},
            ConstraintSense::le, MD);
    bld.con(nm("eb3", t), {{eb, 1.0}, {yd, -MD}}, ConstraintSense::le, 0.0);
    bld.con(nm("ef1", t), {{ef, lam}, {bu, kap}}, ConstraintSense::ge, 0.0);
    bld.con(nm("ef2", t), {{ef, lam}, {bu, kap}, {y0, M2}},
            ConstraintSense::le, M2);
    bld.con(nm("ef3", t), {{ef, lam}, {y0, -M2}}, ConstraintSense::le, 0.0);
  }

  // ---- Expected shortage / leftover inventory / capacity spill.  Ineg and
  // Ipos sit on tangent-cut lower envelopes of the (complementary) loss of
  // the cumulative demand, evaluated at
  //   q = s + sum Q_{<=t} + sum Ineg_{<t} - sum Ecap_{<=t};
  // Ecap is the exact max(Ipos_{t-1} + Q_t - capacity, 0) via one binary.
  for (int r = 0; r < C; ++r) {
    const RetailerSpec& ret = inst.retailers[r];
    const int node = ret.node;
    const LossChain& ch = chains[r];
    for (int t = 1; t <= T; ++t) {
      auto q_terms = [&](double scale) {
        std::vector<LinearTerm> terms;
        for (int k = 1; k <= t; ++k)
          terms.push_back({bld.get(nm("Q", node, k)), scale});
        for (int k = 1; k < t; ++k)
          terms.push_back({bld.get(nm("Ineg", node, k)), scale});
        for (int k = 1; k <= t; ++k)
          terms.push_back({bld.get(nm("Ecap", node, k)), -scale});
        return terms;
      };
      const auto& lc = ch.loss[t - 1].cuts;
      for (std::size_t k = 0; k < lc.size(); ++k) {
        std::vector<LinearTerm> terms = q_terms(-lc[k].slope);
        terms.push_back({bld.get(nm("Ineg", node, t)), 1.0});
        bld.con(nm("lossL", node, t, static_cast<int>(k)), terms,
                ConstraintSense::ge,
                lc[k].intercept + lc[k].slope * ret.initial_inventory);
      }
      const auto& cc = ch.comp[t - 1].cuts;
      for (std::size_t k = 0; k < cc.size(); ++k) {
        std::vector<LinearTerm> terms = q_terms(-cc[k].slope);
        terms.push_back({bld.get(nm("Ipos", node, t)), 1.0});
        bld.con(nm("lossC", node, t, static_cast<int>(k)), terms,
                ConstraintSense::ge,
                cc[k].intercept + cc[k].slope * ret.initial_inventory);
      }
      const int ecap = bld.get(nm("Ecap", node, t));
      const int q = bld.get(nm("Q", node, t));
      const int ye = bld.get(nm("yE", node, t));
      const double ME =
          std::max({static_cast<double>(ret.capacity),
                    t > 1 ? ch.ipos_ub[t - 2] : static_cast<double>(ret.initial_inventory),
                    1.0});
      const double base = t > 1 ? 0.0 : static_cast<double>(ret.initial_inventory);
      std::vector<LinearTerm> lo{{ecap, 1.0}, {q, -1.0}};
      std::vector<LinearTerm> hi1{{ecap, 1.0}, {q, -1.0}, {ye, ME}};
      if (t > 1) {
        lo.push_back({bld.get(nm("Ipos", node, t - 1)), -1.0});
        hi1.push_back({bld.get(nm("Ipos", node, t - 1)), -1.0});
      }
      bld.con(nm("ecap_lo", node, t), lo, ConstraintSense::ge, base - ret.capacity);
      bld.con(nm("ecap_hi1", node, t), hi1, ConstraintSense::le,
              ME + base - ret.capacity);
      bld.con(nm("ecap_hi2", node, t), {{ecap, 1.0}, {ye, -ME}},
              ConstraintSense::le, 0.0);
    }
  }

  // ---- Objective.  For the consumed basis, electric traction energy equals
  // required minus the fuel-covered part (kap*Req - lambda*Ef), so the cost
  // collapses to Ce*kap*Req + (Cf - Ce*lambda)*Ef.  The supplied basis
  // charges the raw ERS feed per transited arc plus battery discharge.
  const double Ce = inst.electricity_cost, Cf = inst.fuel_cost;
  if (inst.ers_cost_basis == ErsCostBasis::consumed) {
    for (int t = 1; t < T; ++t) {
      bld.obj(bld.get(nm("Req", t)), Ce * kap);
      bld.obj(bld.get(nm("Ef", t)), Cf - Ce * lam);
    }
  } else {
    for (int t = 1; t < T; ++t) {
      for (const TransitArc& a : tarcs)
        if (a.arc >= 0 && inst.network.arcs[a.arc].supplied_energy != 0.0)
          bld.obj(bld.get(nm("T", a.from, a.to, t)),
                  Ce * inst.network.arcs[a.arc].supplied_energy);
      bld.obj(bld.get(nm("Eb", t)), Ce);
      bld.obj(bld.get(nm("Ef", t)), Cf);
    }
  }
  for (int t = 1; t <= T; ++t)
    for (int r = 0; r < C; ++r)
      bld.obj(bld.get(nm("Ineg", inst.retailers[r].node, t)), inst.penalty);

  for (int r = 0; r < C; ++r)
    for (int t = 0; t < T; ++t)
      bld.m.linearization_gap_bound += inst.penalty * chains[r].loss[t].max_gap;

  const std::vector<char> seen =
      reachable_within(inst.network, inst.start_node, T - 1);
  for (int r = 0; r < C; ++r)
    if (!seen[inst.retailers[r].node])
      bld.m.warnings.push_back(
          "retailer at node " + std::to_string(inst.retailers[r].node) +
          " is unreachable within the horizon; the model can only leave it unserved");

  return std::move(bld.m);
}

// ---------------------------------------------------------------------------
// LP text.

namespace {

void append_terms(std::string& out, const MilpModel& m,
                  const std::vector<LinearTerm>& terms, double constant) {
  bool first = true;
  for (const LinearTerm& t : terms) {
    if (t.coeff == 0.0) continue;
    const double mag = std::fabs(t.coeff);
    if (first) {
      out += t.coeff < 0 ? "- " : "";
      first = false;
    } else {
      out += t.coeff < 0 ? " - " : " + ";
    }
    out += num_str(mag) + " " + m.vars[t.var].name;
  }
  if (constant != 0.0) {
    if (first)
      out += num_str(constant);
    else
      out += (constant < 0 ? " - " : " + ") + num_str(std::fabs(constant));
    first = false;
  }
  if (first) out += "0";
}

}  // namespace

std::string model_to_lp(const MilpModel& m) {
  std::string out = "\\ Problem: " + m.name + "\n";
  out += m.minimize ? "Minimize\n" : "Maximize\n";
  out += " obj: ";
  append_terms(out, m, m.objective, m.objective_constant);
  out += "\nSubject To\n";
  for (const MilpConstraint& c : m.constraints) {
    out += " " + c.name + ": ";
    append_terms(out, m, c.terms, 0.0);
    switch (c.sense) {
      case ConstraintSense::le: out += " <= "; break;
      case ConstraintSense::ge: out += " >= "; break;
      case ConstraintSense::eq: out += " = "; break;
    }
    out += num_str(c.rhs) + "\n";
  }
  out += "Bounds\n";
  for (const MilpVariable& v : m.vars) {
    if (v.kind == VarKind::binary) continue;
    if (v.lb == 0.0 && v.ub == kInf) continue;  // the LP default
    if (v.lb == -kInf && v.ub == kInf)
      out += " " + v.name + " free\n";
    else if (v.lb == v.ub)
      out += " " + v.name + " = " + num_str(v.lb) + "\n";
    else if (v.ub == kInf)
      out += " " + v.name + " >= " + num_str(v.lb) + "\n";
    else if (v.lb == 0.0)
      out += " " + v.name + " <= " + num_str(v.ub) + "\n";
    else
      out += " " + num_str(v.lb) + " <= " + v.name + " <= " + num_str(v.ub) + "\n";
  }
  bool any_bin = false;
  for (const MilpVariable& v : m.vars) any_bin |= v.kind == VarKind::binary;
  if (any_bin) {
    out += "Binaries\n";
    for (const MilpVariable& v : m.vars)
      if (v.kind == VarKind::binary) out += " " + v.name + "\n";
  }
  out += "End\n";
  return out;
}

void write_model(const MilpModel& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_model: cannot open " + path);
  f << model_to_lp(m);
  if (!f) throw std::runtime_error("write_model: write failed for " + path);
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

bool parse_double(const std::string& s, double* out) {
  const char* b = s.c_str();
  char* e = nullptr;
  *out = std::strtod(b, &e);
  return e == b + s.size() && !s.empty();
}

struct LpParser {
  MilpModel m;
  std::unordered_map<std::string, int> index;
  std::string origin;
  int lineno = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + what);
  }

  int intern(const std::string& name) {
    const auto it = index.find(name);
    if (it != index.end()) return it->second;
    MilpVariable v;
    v.name = name;
    v.kind = VarKind::continuous;
    v.lb = 0.0;
    v.ub = kInf;
    m.vars.push_back(v);
    index.emplace(name, static_cast<int>(m.vars.size()) - 1);
    return static_cast<int>(m.vars.size()) - 1;
  }

  // sign/coefficient/name token stream -> linear terms + folded constant
  void parse_expr(const std::vector<std::string>& toks, std::size_t from,
                  std::size_t to, std::vector<LinearTerm>* terms, double* constant) {
    double sign = 1.0, coef = 0.0;
    bool has_coef = false;
    std::map<int, double> acc;
    std::vector<int> order;
    for (std::size_t i = from; i < to; ++i) {
      const std::string& tok = toks[i];
      double num;
      if (tok == "+" || tok == "-") {
        if (has_coef) {  // the pending number was a bare constant
          *constant += sign * coef;
          sign = 1.0;
          has_coef = false;
        }
        if (tok == "-") sign = -sign;
      } else if (parse_double(tok, &num)) {
        if (has_coef) fail("two consecutive numbers in expression near '" + tok + "'");
        coef = num;
        has_coef = true;
      } else if (is_identifier(tok)) {
        const int var = intern(tok);
        const double c = sign * (has_coef ? coef : 1.0);
        if (!acc.count(var)) order.push_back(var);
        acc[var] += c;
        sign = 1.0;
        has_coef = false;
      } else {
        fail("unexpected token '" + tok + "' in expression");
      }
    }
    if (has_coef) *constant += sign * coef;
    for (int var : order)
      if (acc[var] != 0.0) terms->push_back({var, acc[var]});
  }
};

}  // namespace

MilpModel parse_lp(const std::string& text, const std::string& origin) {
  LpParser P;
  P.origin = origin;
  enum class Sec { none, objective, constraints, bounds, binaries, done };
  Sec sec = Sec::none;

  std::istringstream stream(text);
  std::string raw;
  while (std::getline(stream, raw)) {
    ++P.lineno;
    std::string line = raw;
    const std::size_t slash = line.find('\\');
    if (slash != std::string::npos) {
      const std::string comment = trim(line.substr(slash + 1));
      if (P.m.name.empty() && comment.rfind("Problem:", 0) == 0)
        P.m.name = trim(comment.substr(8));
      line = line.substr(0, slash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string low = lower(line);

    if (low == "minimize" || low == "min") {
      sec = Sec::objective;
      P.m.minimize = true;
      continue;
    }
    if (low == "maximize" || low == "max") {
      sec = Sec::objective;
      P.m.minimize = false;
      continue;
    }
    if (low == "subject to" || low == "st" || low == "s.t.") {
      sec = Sec::constraints;
      continue;
    }
    if (low == "bounds") {
      sec = Sec::bounds;
      continue;
    }
    if (low == "binaries" || low == "binary") {
      sec = Sec::binaries;
      continue;
    }
    if (low == "end") {
      sec = Sec::done;
      break;
    }

    switch (sec) {
      case Sec::none:
        P.fail("content before any section header: '" + line + "'");
      case Sec::done:
        break;
      case Sec::objective: {
        std::string body = line;
        const std::size_t colon = body.find(':');
        if (colon != std::string::npos) body = body.substr(colon + 1);
        const std::vector<std::string> toks = tokens_of(body);
        P.parse_expr(toks, 0, toks.size(), &P.m.objective, &P.m.objective_constant);
        break;
      }
      case Sec::constraints: {
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos)
          P.fail("constraint line without a 'name:' label");
        MilpConstraint c;
        c.name = trim(line.substr(0, colon));
        if (!is_identifier(c.name)) P.fail("bad constraint name '" + c.name + "'");
        const std::vector<std::string> toks = tokens_of(line.substr(colon + 1));
        std::size_t sense_at = toks.size();
        for (std::size_t i = 0; i < toks.size(); ++i)
          if (toks[i] == "<=" || toks[i] == ">=" || toks[i] == "=" ||
              toks[i] == "<" || toks[i] == ">") {
            sense_at = i;
            break;
          }
        if (sense_at == toks.size()) P.fail("constraint without a <=, >= or =");
        if (sense_at + 2 != toks.size())
          P.fail("constraint right-hand side must be a single number");
        const std::string& s = toks[sense_at];
        c.sense = (s == "<=" || s == "<")   ? ConstraintSense::le
                  : (s == ">=" || s == ">") ? ConstraintSense::ge
                                            : ConstraintSense::eq;
        if (!parse_double(toks.back(), &c.rhs))
          P.fail("bad right-hand side '" + toks.back() + "'");
        double lhs_const = 0.0;
        P.parse_expr(toks, 0, sense_at, &c.terms, &lhs_const);
        c.rhs -= lhs_const;
        P.m.constraints.push_back(std::move(c));
        break;
      }
      case Sec::bounds: {
        const std::vector<std::string> toks = tokens_of(line);
        double num;
        if (toks.size() == 2 && lower(toks[1]) == "free") {
          const int v = P.intern(toks[0]);
          P.m.vars[v].lb = -kInf;
          P.m.vars[v].ub = kInf;
        } else if (toks.size() == 3 && is_identifier(toks[0]) &&
                   parse_double(toks[2], &num)) {
          const int v = P.intern(toks[0]);
          if (toks[1] == "<=" || toks[1] == "<")
            P.m.vars[v].ub = num;
          else if (toks[1] == ">=" || toks[1] == ">")
            P.m.vars[v].lb = num;
          else if (toks[1] == "=")
            P.m.vars[v].lb = P.m.vars[v].ub = num;
          else
            P.fail("bad bound operator '" + toks[1] + "'");
        } else if (toks.size() == 3 && parse_double(toks[0], &num) &&
                   (toks[1] == "<=" || toks[1] == "<")) {
          P.m.vars[P.intern(toks[2])].lb = num;
        } else if (toks.size() == 5 && parse_double(toks[0], &num)) {
          if ((toks[1] != "<=" && toks[1] != "<") ||
              (toks[3] != "<=" && toks[3] != "<"))
            P.fail("bad range bound '" + line + "'");
          double hi;
          if (!parse_double(toks[4], &hi)) P.fail("bad bound value '" + toks[4] + "'");
          const int v = P.intern(toks[2]);
          P.m.vars[v].lb = num;
          P.m.vars[v].ub = hi;
        } else {
          P.fail("unrecognized bounds line '" + line + "'");
        }
        break;
      }
      case Sec::binaries: {
        for (const std::string& tok : tokens_of(line)) {
          if (!is_identifier(tok)) P.fail("bad variable name '" + tok + "'");
          const int v = P.intern(tok);
          P.m.vars[v].kind = VarKind::binary;
          P.m.vars[v].lb = 0.0;
          P.m.vars[v].ub = 1.0;
        }
        break;
      }
    }
  }
  if (sec != Sec::done) P.fail("missing End marker");
  return std::move(P.m);
}

MilpModel read_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_model: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_lp(buf.str(), path);
}

bool MilpModel::structurally_equal(const MilpModel& o) const {
  if (name != o.name || minimize != o.minimize ||
      objective_constant != o.objective_constant)
    return false;
  if (vars.size() != o.vars.size() || constraints.size() != o.constraints.size())
    return false;

  auto var_map = [](const MilpModel& m) {
    std::map<std::string, std::pair<VarKind, std::pair<double, double>>> out;
    for (const MilpVariable& v : m.vars) out[v.name] = {v.kind, {v.lb, v.ub}};
    return out;
  };
  if (var_map(*this) != var_map(o)) return false;

  auto named_terms = [](const MilpModel& m, const std::vector<LinearTerm>& terms) {
    std::map<std::string, double> out;
    for (const LinearTerm& t : terms)
      if (t.coeff != 0.0) out[m.vars[t.var].name] += t.coeff;
    return out;
  };
  if (named_terms(*this, objective) != named_terms(o, o.objective)) return false;

  using ConSig = std::pair<std::pair<int, double>, std::map<std::string, double>>;
  auto con_map = [&](const MilpModel& m) {
    std::map<std::string, ConSig> out;
    for (const MilpConstraint& c : m.constraints)
      out[c.name] = {{static_cast<int>(c.sense), c.rhs}, named_terms(m, c.terms)};
    return out;
  };
  return con_map(*this) == con_map(o);
}

// ---------------------------------------------------------------------------
// Solution files.

SolverSolution parse_solution(const std::string& text, const MilpModel& model,
                              const std::string& origin) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < model.vars.size(); ++i)
    index.emplace(model.vars[i].name, static_cast<int>(i));

  SolverSolution sol;
  sol.values.assign(model.vars.size(), 0.0);
  std::vector<char> seen(model.vars.size(), 0);

  std::istringstream stream(text);
  std::string line;
  int lineno = 0;
  bool have_header = false;
  auto fail = [&](const std::string& what) -> void {
    throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + what);
  };

  while (std::getline(stream, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::vector<std::string> toks = tokens_of(line);
    if (toks.empty()) continue;

    if (!have_header) {
      if (toks.size() < 4 || lower(toks[0]) != "status" || lower(toks[2]) != "obj")
        fail("expected 'STATUS <status> OBJ <value>' header");
      const std::string st = lower(toks[1]);
      if (st == "optimal")
        sol.status = SolveStatus::optimal;
      else if (st == "feasible")
        sol.status = SolveStatus::feasible;
      else if (st == "infeasible")
        sol.status = SolveStatus::infeasible;
      else if (st == "unknown")
        sol.status = SolveStatus::unknown;
      else
        fail("unparseable status '" + toks[1] + "'");
      if (!parse_double(toks[3], &sol.objective))
        fail("bad objective value '" + toks[3] + "'");
      for (std::size_t i = 4; i + 1 < toks.size(); i += 2) {
        const std::string key = lower(toks[i]);
        double v;
        if (!parse_double(toks[i + 1], &v)) fail("bad value for " + toks[i]);
        if (key == "gap")
          sol.gap = v;
        else if (key == "time")
          sol.runtime_sec = v;
        else
          fail("unknown header field '" + toks[i] + "'");
      }
      if ((toks.size() - 4) % 2 != 0) fail("dangling token in header");
      have_header = true;
      continue;
    }

    if (toks.size() != 2) fail("expected '<name> <value>'");
    const auto it = index.find(toks[0]);
    if (it == index.end())
      fail("solution references unknown variable '" + toks[0] + "'");
    if (seen[it->second]) fail("duplicate assignment for '" + toks[0] + "'");
    double v;
    if (!parse_double(toks[1], &v)) fail("bad value '" + toks[1] + "'");
    sol.values[it->second] = v;
    seen[it->second] = 1;
  }
  if (!have_header)
    throw std::runtime_error(origin + ": empty solution file (no STATUS header)");

  if (sol.status == SolveStatus::optimal || sol.status == SolveStatus::feasible) {
    for (std::size_t i = 0; i < model.vars.size(); ++i) {
      if (model.vars[i].kind == VarKind::binary && seen[i]) {
        const double v = sol.values[i];
        if (std::fabs(v) > 1e-6 && std::fabs(v - 1.0) > 1e-6)
          throw std::runtime_error(origin + ": binary variable " +
                                   model.vars[i].name + " has fractional value " +
                                   num_str(v));
      }
      if (!seen[i])
        sol.warnings.push_back("variable " + model.vars[i].name +
                               " missing from solution; defaulted to 0");
    }
  }
  return sol;
}

SolverSolution read_solution(const std::string& path, const MilpModel& model) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_solution: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_solution(buf.str(), model, path);
}

Plan decode_plan(const MilpModel& model, const SolverSolution& sol,
                 const Instance& inst) {
  if (sol.status != SolveStatus::optimal && sol.status != SolveStatus::feasible)
    throw std::runtime_error("decode_plan: solution status carries no plan");
  if (sol.values.size() != model.vars.size())
    throw std::runtime_error("decode_plan: solution does not cover the model");

  const int T = inst.horizon;
  const int N = inst.network.node_count;
  auto value_of = [&](const std::string& name) -> double {
    const int i = model.var_index(name);
    if (i < 0)
      throw std::runtime_error("decode_plan: model lacks variable " + name +
                               " (not built from this instance?)");
    return sol.values[i];
  };

  Plan plan;
  for (int t = 1; t <= T; ++t) {
    std::vector<int> here;
    for (int i = 0; i < N; ++i)
      if (value_of(nm("V", i, t)) > 0.5) here.push_back(i);
    if (here.size() > 1)
      throw std::runtime_error(
          "decode_plan: one-position-per-period violated at period " +
          std::to_string(t) + " (" + std::to_string(here.size()) +
          " position indicators set)");
    if (here.empty())
      plan.route.push_back(t == 1 ? inst.start_node : plan.route.back());
    else
      plan.route.push_back(here[0]);
  }

  // Transit indicators, when present, must agree with the position sequence.
  for (int t = 1; t < T; ++t)
    for (const TransitArc& a : transit_arcs(inst)) {
      const int i = model.var_index(nm("T", a.from, a.to, t));
      if (i < 0) continue;
      if (sol.values[i] > 0.5 &&
          (a.from != plan.route[t - 1] || a.to != plan.route[t]))
        throw std::runtime_error(
            "decode_plan: transit indicator " + model.vars[i].name +
            " contradicts the position sequence (" +
            std::to_string(plan.route[t - 1]) + " -> " +
            std::to_string(plan.route[t]) + " in period " + std::to_string(t) + ")");
    }
  for (int t = 1; t < T; ++t) {
    const int from = plan.route[t - 1], to = plan.route[t];
    if (from == to) {
      if (!inst.network.allow_stay)
        throw std::runtime_error(
            "decode_plan: route stays at node " + std::to_string(from) +
            " in period " + std::to_string(t) + " but staying is not allowed");
    } else if (inst.network.arc_index(from, to) < 0) {
      throw std::runtime_error("decode_plan: transit adjacency violated: no arc " +
                               std::to_string(from) + " -> " + std::to_string(to));
    }
  }

  for (int t = 1; t <= T; ++t) {
    const double v = value_of(nm("L", t));
    if (v < -1e-6)
      throw std::runtime_error("decode_plan: negative load in period " +
                               std::to_string(t));
    if (v > 1e-6 && plan.route[t - 1] != inst.network.depot)
      throw std::runtime_error(
          "decode_plan: load in period " + std::to_string(t) +
          " but the vehicle is not at the depot");
    plan.loads.push_back(std::max(0.0, v));
  }
  plan.deliveries.assign(inst.retailers.size(), std::vector<double>(T, 0.0));
  for (std::size_t r = 0; r < inst.retailers.size(); ++r) {
    const int node = inst.retailers[r].node;
    for (int t = 1; t <= T; ++t) {
      const double v = value_of(nm("Q", node, t));
      if (v < -1e-6)
        throw std::runtime_error("decode_plan: negative delivery at node " +
                                 std::to_string(node) + " in period " +
                                 std::to_string(t));
      if (v > 1e-6 && plan.route[t - 1] != node)
        throw std::runtime_error(
            "decode_plan: delivery at node " + std::to_string(node) +
            " in period " + std::to_string(t) +
            " but the vehicle is not visiting it");
      plan.deliveries[r][t - 1] = std::max(0.0, v);
    }
  }
  plan.predicted_cost = sol.objective;
  plan.validate(inst);
  return plan;
}

double linearized_plan_cost(const Plan& plan, const Instance& inst,
                            const MilpBuildOptions& opt) {
  plan.validate(inst);
  if (opt.segments < 1)
    throw std::runtime_error("linearized_plan_cost: segments must be >= 1");
  const int T = inst.horizon;
  const bool disc = opt.discretized;
  const int LV = opt.levels;
  const double B = inst.vehicle.battery_capacity;
  const double kap = disc ? B / LV : 1.0;
  const double Bc = disc ? LV : B;
  const double lam = inst.vehicle.efficiency;
  const double Ce = inst.electricity_cost, Cf = inst.fuel_cost;

  double cost = 0.0;

  // Travel, mirroring the model's battery bookkeeping exactly.
  double b = disc ? static_cast<double>(discretize_kwh(inst.start_battery, LV, B))
                  : inst.start_battery;
  double units = inst.initial_vehicle_load;
  for (int t = 1; t <= T; ++t) {
    units += plan.loads[t - 1];
    for (std::size_t r = 0; r < inst.retailers.size(); ++r)
      units -= plan.deliveries[r][t - 1];
    if (t == T) break;
    const int from = plan.route[t - 1], to = plan.route[t];
    double req = 0.0, sup = 0.0, sraw = 0.0;
    if (from != to) {
      const int a = inst.network.arc_index(from, to);
      const ArcSpec& arc = inst.network.arcs[a];
      const double W = inst.vehicle.unladen_weight + units * inst.vehicle.weight_per_unit;
      req = disc ? static_cast<double>(discretize_energy(arc, W, LV, B))
                 : required_battery_energy(arc, W);
      sup = disc ? static_cast<double>(discretize_kwh(arc.supplied_energy, LV, B))
                 : arc.supplied_energy;
      sraw = arc.supplied_energy;
    }
    const double bu = b + sup - req;
    const double b2 = std::clamp(bu, 0.0, Bc);
    const double Ef = kap * std::max(-bu, 0.0) / lam;
    if (inst.ers_cost_basis == ErsCostBasis::consumed) {
      cost += Ce * (kap * req - lam * Ef) + Cf * Ef;
    } else {
      const double Eb = kap * std::max(b - b2, 0.0);
      cost += Ce * sraw + Ce * Eb + Cf * Ef;
    }
    b = b2;
  }

  // Shortage chain on the tangent-cut envelopes.
  for (std::size_t r = 0; r < inst.retailers.size(); ++r) {
    const RetailerSpec& ret = inst.retailers[r];
    DemandDistribution cum = point_mass(0);
    double sum_q = 0.0, sum_ineg = 0.0, sum_ecap = 0.0;
    double ipos_prev = ret.initial_inventory;
    for (int t = 1; t <= T; ++t) {
      cum = convolve(cum, ret.demand[t - 1]);
      sum_q += plan.deliveries[r][t - 1];
      sum_ecap += std::max(ipos_prev + plan.deliveries[r][t - 1] - ret.capacity, 0.0);
      const double q = ret.initial_inventory + sum_q + sum_ineg - sum_ecap;
      const PiecewiseLinearLoss pl = piecewise_linearize(cum, opt.segments, LossKind::loss);
      const PiecewiseLinearLoss pc =
          piecewise_linearize(cum, opt.segments, LossKind::complementary);
      const double ineg = std::max(0.0, pl.value(q));
      ipos_prev = std::max(0.0, pc.value(q));
      cost += inst.penalty * ineg;
      sum_ineg += ineg;
    }
  }
  return cost;
}

}  // namespace errp
