#include "errp/sdp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "errp/energy.hpp"

namespace errp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Everything the recursion needs in table form: level-unit arc energies per
// vehicle fill, per-period loss tables and demand transition lists.
struct SdpContext {
  const Instance& inst;
  int levels;
  double kappa;  // kWh per level unit

  struct Succ {
    int node;
    int arc;  // -1 for the implicit stay loop
  };
  std::vector<std::vector<Succ>> succ;  // per node, sorted by node id

  // eps[arc][vehicle_inv]: battery draw in level units after the period's
  // load/delivery actions; slev[arc]: level units fed by the road.
  std::vector<std::vector<int>> eps;
  std::vector<int> slev;

  // loss_table[i][t-1][q]: expected shortage at post-delivery inventory q.
  std::vector<std::vector<std::vector<double>>> loss_table;
  // trans[i][t-1][q]: (next inventory, probability) pairs.
  struct Step {
    int inv;
    double p;
  };
  std::vector<std::vector<std::vector<std::vector<Step>>>> trans;

  std::uint64_t space = 1;  // size of the mixed-radix state encoding

  explicit SdpContext(const Instance& ii, int lv) : inst(ii), levels(lv) {
    kappa = inst.vehicle.battery_capacity / levels;
    const int N = inst.network.node_count;
    const int K = inst.vehicle.load_capacity;

    succ.resize(N);
    for (int n = 0; n < N; ++n) {
      if (inst.network.allow_stay) succ[n].push_back({n, -1});
      for (std::size_t a = 0; a < inst.network.arcs.size(); ++a)
        if (inst.network.arcs[a].from == n)
          succ[n].push_back({inst.network.arcs[a].to, static_cast<int>(a)});
      std::sort(succ[n].begin(), succ[n].end(),
                [](const Succ& x, const Succ& y) { return x.node < y.node; });
    }

    eps.resize(inst.network.arcs.size());
    slev.resize(inst.network.arcs.size());
    for (std::size_t a = 0; a < inst.network.arcs.size(); ++a) {
      slev[a] = static_cast<int>(discretize_kwh(inst.network.arcs[a].supplied_energy,
                                                levels, inst.vehicle.battery_capacity));
      eps[a].resize(K + 1);
      for (int v = 0; v <= K; ++v) {
        const double weight =
            inst.vehicle.unladen_weight + v * inst.vehicle.weight_per_unit;
        eps[a][v] = static_cast<int>(discretize_energy(
            inst.network.arcs[a], weight, levels, inst.vehicle.battery_capacity));
      }
    }

    const std::size_t C = inst.retailers.size();
    loss_table.resize(C);
    trans.resize(C);
    for (std::size_t i = 0; i < C; ++i) {
      const RetailerSpec& r = inst.retailers[i];
      loss_table[i].resize(inst.horizon);
      trans[i].resize(inst.horizon);
      for (int t = 0; t < inst.horizon; ++t) {
        loss_table[i][t].resize(r.capacity + 1);
        trans[i][t].resize(r.capacity + 1);
        for (int q = 0; q <= r.capacity; ++q) {
          loss_table[i][t][q] = loss(r.demand[t], q);
          std::vector<Step>& steps = trans[i][t][q];
          double at_zero = 0.0;
          for (int d = 0; d <= r.demand[t].max_value(); ++d) {
            const double p = r.demand[t].pmf[d];
            if (p == 0.0) continue;
            if (d >= q)
              at_zero += p;
            else
              steps.push_back({q - d, p});
          }
          if (at_zero > 0.0) steps.push_back({0, at_zero});
        }
      }
    }

    unsigned __int128 sp = static_cast<unsigned __int128>(N);
    sp *= K + 1;
    sp *= levels + 1;
    for (std::size_t i = 0; i < C; ++i) sp *= inst.retailers[i].capacity + 1;
    if (sp > static_cast<unsigned __int128>(1) << 50)
      throw std::runtime_error(
          "state encoding space exceeds 2^50; this instance is far beyond what the "
          "dynamic program can tabulate");
    space = static_cast<std::uint64_t>(sp);
  }

  std::uint64_t encode(int pos, int vinv, int bat, const int* invs) const {
    std::uint64_t key = static_cast<std::uint64_t>(pos) *
                            static_cast<std::uint64_t>(inst.vehicle.load_capacity + 1) +
                        static_cast<std::uint64_t>(vinv);
    key = key * static_cast<std::uint64_t>(levels + 1) + static_cast<std::uint64_t>(bat);
    for (std::size_t i = 0; i < inst.retailers.size(); ++i)
      key = key * static_cast<std::uint64_t>(inst.retailers[i].capacity + 1) +
            static_cast<std::uint64_t>(invs[i]);
    return key;
  }
};

// Travel cost (money) of one arc traversal with vehicle fill vinv and
// battery level bat, and the battery level on arrival.
struct LegOutcome {
  double cost;
  int bat_after;
};

LegOutcome leg_cost(const SdpContext& ctx, int arc, int vinv, int bat) {
  const Instance& inst = ctx.inst;
  const int req = ctx.eps[arc][vinv];
  const int sup = ctx.slev[arc];
  const int ers_direct = std::min(req, sup);
  const int from_battery = std::min(bat, std::max(0, req - sup));
  const int deficit = std::max(0, req - sup - bat);
  const int bat_after = std::clamp(bat + sup - req, 0, ctx.levels);
  const double fuel =
      inst.fuel_cost * (deficit * ctx.kappa) / inst.vehicle.efficiency;
  double electric;
  if (inst.ers_cost_basis == ErsCostBasis::consumed) {
    electric = inst.electricity_cost * (ers_direct + from_battery) * ctx.kappa;
  } else {
    electric = inst.electricity_cost * inst.network.arcs[arc].supplied_energy +
               inst.electricity_cost * from_battery * ctx.kappa;
  }
  return {electric + fuel, bat_after};
}

}  // namespace

std::uint64_t Policy::encode(const SdpState& s) const {
  std::uint64_t key = static_cast<std::uint64_t>(s.pos) *
                          static_cast<std::uint64_t>(load_cap + 1) +
                      static_cast<std::uint64_t>(s.vehicle_inv);
  key = key * static_cast<std::uint64_t>(levels + 1) +
        static_cast<std::uint64_t>(s.battery_level);
  for (std::size_t i = 0; i < retailer_caps.size(); ++i)
    key = key * static_cast<std::uint64_t>(retailer_caps[i] + 1) +
          static_cast<std::uint64_t>(s.retailer_inv[i]);
  return key;
}

const Policy::Entry* Policy::lookup(const SdpState& s) const {
  if (s.t < 1 || s.t > static_cast<int>(table.size())) return nullptr;
  const auto& m = table[s.t - 1];
  const auto it = m.find(encode(s));
  return it == m.end() ? nullptr : &it->second;
}

std::uint64_t Policy::state_count() const {
  std::uint64_t n = 0;
  for (const auto& m : table) n += m.size();
  return n;
}

std::vector<SdpAction> enumerate_actions(const SdpState& s, const Instance& inst) {
  std::vector<SdpAction> out;
  const bool final_period = s.t >= inst.horizon;
  const int K = inst.vehicle.load_capacity;
  const int ret = inst.retailer_index(s.pos);

  std::vector<int> successors;
  if (final_period) {
    successors.push_back(s.pos);
  } else {
    if (inst.network.allow_stay) successors.push_back(s.pos);
    for (int n : inst.network.out_neighbors(s.pos)) successors.push_back(n);
    std::sort(successors.begin(), successors.end());
  }

  const int max_load = s.pos == inst.network.depot ? K - s.vehicle_inv : 0;
  for (int next : successors) {
    for (int load = 0; load <= max_load; ++load) {
      int max_del = 0;
      if (ret >= 0)
        max_del = std::min(s.vehicle_inv + load,
                           inst.retailers[ret].capacity - s.retailer_inv[ret]);
      for (int del = 0; del <= max_del; ++del) out.push_back({next, load, del});
    }
  }
  return out;
}

double immediate_cost(const SdpState& s, const SdpAction& a, const Instance& inst,
                      int levels) {
  SdpContext ctx(inst, levels);
  const int ret = inst.retailer_index(s.pos);
  const int vinv_after = s.vehicle_inv + a.load_up - a.delivery;

  double cost = 0.0;
  if (s.t < inst.horizon && a.next_pos != s.pos) {
    const int arc = inst.network.arc_index(s.pos, a.next_pos);
    if (arc < 0)
      throw std::runtime_error("immediate_cost: no arc from " + std::to_string(s.pos) +
                               " to " + std::to_string(a.next_pos));
    cost += leg_cost(ctx, arc, vinv_after, s.battery_level).cost;
  }
  for (std::size_t i = 0; i < inst.retailers.size(); ++i) {
    const int post =
        s.retailer_inv[i] + (static_cast<int>(i) == ret ? a.delivery : 0);
    cost += inst.penalty * ctx.loss_table[i][s.t - 1][post];
  }
  return cost;
}

Policy solve_backward(const Instance& inst, const SdpOptions& opt) {
  inst.validate();
  if (opt.levels < 1) throw std::runtime_error("solve_backward: levels must be >= 1");
  SdpContext ctx(inst, opt.levels);
  const int T = inst.horizon;
  const int K = inst.vehicle.load_capacity;
  const int N = inst.network.node_count;
  const std::size_t C = inst.retailers.size();

  // ---- Reachability, factored into the vehicle component (pos, fill,
  // battery) and one inventory component per retailer.  The cross product
  // over-approximates the jointly reachable set, which only costs extra
  // table entries, never wrong values.
  const int start_bat = static_cast<int>(
      discretize_kwh(inst.start_battery, opt.levels, inst.vehicle.battery_capacity));

  auto veh_key = [&](int pos, int vinv, int bat) {
    return (pos * (K + 1) + vinv) * (opt.levels + 1) + bat;
  };
  const int veh_space = N * (K + 1) * (opt.levels + 1);
  std::vector<std::vector<char>> veh_reach(T, std::vector<char>(veh_space, 0));
  veh_reach[0][veh_key(inst.start_node, inst.initial_vehicle_load, start_bat)] = 1;
  std::vector<std::vector<std::vector<char>>> inv_reach(
      C, std::vector<std::vector<char>>(T));
  for (std::size_t i = 0; i < C; ++i) {
    inv_reach[i][0].assign(inst.retailers[i].capacity + 1, 0);
    inv_reach[i][0][inst.retailers[i].initial_inventory] = 1;
  }

  for (int t = 1; t < T; ++t) {
    for (int pos = 0; pos < N; ++pos) {
      const int reti = inst.retailer_index(pos);
      const int max_cap = reti >= 0 ? inst.retailers[reti].capacity : 0;
      for (int vinv = 0; vinv <= K; ++vinv) {
        for (int bat = 0; bat <= opt.levels; ++bat) {
          if (!veh_reach[t - 1][veh_key(pos, vinv, bat)]) continue;
          const int max_load = pos == inst.network.depot ? K - vinv : 0;
          for (int load = 0; load <= max_load; ++load) {
            const int max_del = std::min(vinv + load, max_cap);
            for (int del = 0; del <= max_del; ++del) {
              const int after = vinv + load - del;
              for (const SdpContext::Succ& sc : ctx.succ[pos]) {
                const int bat2 =
                    sc.arc < 0
                        ? bat
                        : std::clamp(bat + ctx.slev[sc.arc] - ctx.eps[sc.arc][after],
                                     0, opt.levels);
                veh_reach[t][veh_key(sc.node, after, bat2)] = 1;
              }
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < C; ++i) {
      const int cap = inst.retailers[i].capacity;
      inv_reach[i][t].assign(cap + 1, 0);
      for (int inv = 0; inv <= cap; ++inv) {
        if (!inv_reach[i][t - 1][inv]) continue;
        for (int del = 0; del <= std::min(K, cap - inv); ++del)
          for (const SdpContext::Step& st : ctx.trans[i][t - 1][inv + del])
            inv_reach[i][t][st.inv] = 1;
      }
    }
  }

  // State-space size guard, counting the tabulated product sets.
  {
    std::uint64_t total_states = 0;
    std::ostringstream size_report;
    for (int t = 0; t < T; ++t) {
      std::uint64_t veh = 0;
      for (char c : veh_reach[t]) veh += c;
      std::uint64_t per = veh;
      for (std::size_t i = 0; i < C; ++i) {
        std::uint64_t cnt = 0;
        for (char c : inv_reach[i][t]) cnt += c;
        per *= cnt;
      }
      total_states += per;
      size_report << (t ? ", " : "") << "t" << (t + 1) << ": " << per;
    }
    const std::uint64_t table_bytes = ctx.space * sizeof(double) * 3 * T;
    if (total_states > opt.state_cap || table_bytes / 16 > opt.state_cap)
      throw std::runtime_error(
          "solve_backward: state space needs " + std::to_string(total_states) +
          " tabulated states (dense tables: " + std::to_string(ctx.space) +
          " slots x " + std::to_string(T) + " periods), exceeding the cap of " +
          std::to_string(opt.state_cap) + " (per period: " + size_report.str() + ")");
  }

  std::vector<int> caps(C);
  for (std::size_t i = 0; i < C; ++i) caps[i] = inst.retailers[i].capacity;

  // Visit every state in the period-t product set.
  auto for_each_state = [&](int t, auto&& fn) {
    std::vector<std::vector<int>> vals(C);
    for (std::size_t i = 0; i < C; ++i)
      for (int v = 0; v <= caps[i]; ++v)
        if (inv_reach[i][t - 1][v]) vals[i].push_back(v);
    std::vector<int> invs(C), idx(C);
    for (int pos = 0; pos < N; ++pos)
      for (int vinv = 0; vinv <= K; ++vinv)
        for (int bat = 0; bat <= opt.levels; ++bat) {
          if (!veh_reach[t - 1][veh_key(pos, vinv, bat)]) continue;
          std::fill(idx.begin(), idx.end(), 0);
          while (true) {
            for (std::size_t i = 0; i < C; ++i) invs[i] = vals[i][idx[i]];
            fn(pos, vinv, bat, invs);
            std::size_t i = 0;
            while (i < C && ++idx[i] == vals[i].size()) idx[i++] = 0;
            if (i == C) break;
          }
        }
  };

  // ---- Backward recursion over dense per-period tables.
  struct Slot {
    double value = kInf;
    int next_pos = -1, load = 0, del = 0;
  };
  std::vector<std::vector<Slot>> tables(T);

  const double penalty = inst.penalty;
  for (int t = T; t >= 1; --t) {
    std::vector<Slot>& table = tables[t - 1];
    table.assign(ctx.space, Slot{});
    const std::vector<Slot>* next_table = t < T ? &tables[t] : nullptr;

    std::vector<std::uint64_t> keys;
    std::vector<std::array<int, 3>> veh_states;
    std::vector<std::vector<int>> inv_states;
    for_each_state(t, [&](int pos, int vinv, int bat, const std::vector<int>& invs) {
      keys.push_back(ctx.encode(pos, vinv, bat, invs.data()));
      veh_states.push_back({pos, vinv, bat});
      inv_states.push_back(invs);
    });

    auto process_range = [&](std::size_t lo, std::size_t hi) {
      // Expected next-period value per post-decision tuple (next position,
      // fill, battery, post-delivery inventories).  Many state/action pairs
      // share a tuple, which is where the big constant factor is saved.  The
      // memo is worker-local so results never depend on scheduling.
      std::unordered_map<std::uint64_t, double> memo;
      std::vector<int> post(C);
      for (std::size_t sidx = lo; sidx < hi; ++sidx) {
        const auto [pos, vinv, bat] = veh_states[sidx];
        const std::vector<int>& invs = inv_states[sidx];
        const int ret = inst.retailer_index(pos);
        const int max_load = pos == inst.network.depot ? K - vinv : 0;
        const int cap_here = ret >= 0 ? caps[ret] - invs[ret] : 0;

        Slot best;
        auto consider = [&](int next, int arc, int load, int del) {
          const int after = vinv + load - del;
          double cost = 0.0;
          for (std::size_t i = 0; i < C; ++i) {
            post[i] = invs[i] + (static_cast<int>(i) == ret ? del : 0);
            cost += penalty * ctx.loss_table[i][t - 1][post[i]];
          }
          int bat2 = bat;
          if (arc >= 0) {
            const LegOutcome leg = leg_cost(ctx, arc, after, bat);
            cost += leg.cost;
            bat2 = leg.bat_after;
          }
          if (cost >= best.value) return;  // the future part is nonnegative
          if (next_table) {
            std::uint64_t pkey =
                (static_cast<std::uint64_t>(next) * (K + 1) + after);
            pkey = pkey * static_cast<std::uint64_t>(opt.levels + 1) +
                   static_cast<std::uint64_t>(bat2);
            const std::uint64_t base = pkey;
            for (std::size_t i = 0; i < C; ++i)
              pkey = pkey * static_cast<std::uint64_t>(caps[i] + 1) +
                     static_cast<std::uint64_t>(post[i]);
            auto [it, fresh] = memo.try_emplace(pkey, 0.0);
            if (fresh) {
              double ev = 0.0;
              auto rec = [&](auto&& self, std::size_t i, std::uint64_t partial,
                             double prob) -> void {
                if (i == C) {
                  ev += prob * (*next_table)[partial].value;
                  return;
                }
                for (const SdpContext::Step& st : ctx.trans[i][t - 1][post[i]])
                  self(self, i + 1,
                       partial * static_cast<std::uint64_t>(caps[i] + 1) +
                           static_cast<std::uint64_t>(st.inv),
                       prob * st.p);
              };
              rec(rec, 0, base, 1.0);
              it->second = ev;
            }
            cost += it->second;
          }
          if (cost < best.value) best = {cost, next, load, del};
        };

        if (t == T) {
          for (int load = 0; load <= max_load; ++load) {
            const int max_del = std::min(vinv + load, cap_here);
            for (int del = 0; del <= max_del; ++del) consider(pos, -1, load, del);
          }
        } else {
          for (const SdpContext::Succ& sc : ctx.succ[pos]) {
            for (int load = 0; load <= max_load; ++load) {
              const int max_del = std::min(vinv + load, cap_here);
              for (int del = 0; del <= max_del; ++del)
                consider(sc.node, sc.arc, load, del);
            }
          }
        }
        table[keys[sidx]] = best;
      }
    };

    const int workers = std::max(1, opt.workers);
    if (workers == 1 || keys.size() < 1024) {
      process_range(0, keys.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (keys.size() + workers - 1) / workers;
      for (int w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(keys.size(), lo + chunk);
        if (lo < hi) pool.emplace_back(process_range, lo, hi);
      }
      for (auto& th : pool) th.join();
    }
  }

  // ---- Package the policy.
  Policy pol;
  pol.levels = opt.levels;
  pol.node_count = N;
  pol.load_cap = K;
  pol.retailer_caps = caps;
  pol.table.resize(T);
  for (int t = 1; t <= T; ++t) {
    for_each_state(t, [&](int pos, int vinv, int bat, const std::vector<int>& invs) {
      const std::uint64_t key = ctx.encode(pos, vinv, bat, invs.data());
      const Slot& slot = tables[t - 1][key];
      if (slot.next_pos < 0) return;  // dead end, value infinite
      pol.table[t - 1][key] =
          Policy::Entry{slot.value, SdpAction{slot.next_pos, slot.load, slot.del}};
    });
  }

  pol.initial_state.t = 1;
  pol.initial_state.pos = inst.start_node;
  pol.initial_state.vehicle_inv = inst.initial_vehicle_load;
  pol.initial_state.battery_level = start_bat;
  for (std::size_t i = 0; i < C; ++i)
    pol.initial_state.retailer_inv.push_back(inst.retailers[i].initial_inventory);

  const Policy::Entry* root = pol.lookup(pol.initial_state);
  if (!root)
    throw std::runtime_error(
        "solve_backward: the start state hits a dead end (a node without outgoing "
        "arcs while staying is not allowed)");
  pol.value_at_initial = root->value;
  return pol;
}

Trajectory replay(const Policy& policy, const Instance& inst,
                  const std::vector<std::vector<int>>& demand_trace) {
  if (demand_trace.size() != inst.retailers.size())
    throw std::runtime_error("replay: demand trace needs one row per retailer");
  for (const auto& row : demand_trace)
    if (static_cast<int>(row.size()) != inst.horizon)
      throw std::runtime_error("replay: demand trace rows must cover the horizon");

  SdpContext ctx(inst, policy.levels);
  Trajectory traj;
  SdpState s = policy.initial_state;
  for (int t = 1; t <= inst.horizon; ++t) {
    s.t = t;
    const Policy::Entry* e = policy.lookup(s);
    if (!e)
      throw std::logic_error("replay: state not found in the policy table (period " +
                             std::to_string(t) + ")");
    const SdpAction a = e->action;
    const int ret = inst.retailer_index(s.pos);

    TrajectoryRow row;
    row.t = t;
    row.pos = s.pos;
    row.load_up = a.load_up;
    row.delivery = a.delivery;
    row.delivery_retailer = a.delivery > 0 ? ret : -1;
    row.battery = s.battery_level * ctx.kappa;
    const int after = s.vehicle_inv + a.load_up - a.delivery;
    row.vehicle_inv = after;
    row.weight = inst.vehicle.unladen_weight + after * inst.vehicle.weight_per_unit;

    int bat2 = s.battery_level;
    if (t < inst.horizon && a.next_pos != s.pos) {
      const int arc = inst.network.arc_index(s.pos, a.next_pos);
      const LegOutcome leg = leg_cost(ctx, arc, after, s.battery_level);
      row.required_energy = ctx.eps[arc][after] * ctx.kappa;
      row.travel_cost = leg.cost;
      bat2 = leg.bat_after;
    }

    for (std::size_t i = 0; i < inst.retailers.size(); ++i) {
      const int post = s.retailer_inv[i] + (static_cast<int>(i) == ret ? a.delivery : 0);
      const int d = demand_trace[i][t - 1];
      row.penalty_cost += inst.penalty * std::max(d - post, 0);
      s.retailer_inv[i] = std::max(post - d, 0);
      row.retailer_inv.push_back(s.retailer_inv[i]);
    }

    traj.total_travel += row.travel_cost;
    traj.total_penalty += row.penalty_cost;
    traj.rows.push_back(row);

    s.pos = a.next_pos;
    s.vehicle_inv = after;
    s.battery_level = bat2;
  }
  traj.total_cost = traj.total_travel + traj.total_penalty;
  return traj;
}

std::string format_trajectory(const Trajectory& traj, const Instance& inst) {
  std::ostringstream os;
  auto num = [](double v) {
    std::ostringstream o;
    o << v;
    return o.str();
  };
  auto row = [&](const std::string& label, auto getter) {
    os << label;
    for (const TrajectoryRow& r : traj.rows) os << "\t" << getter(r);
    os << "\n";
  };
  row("t", [](const TrajectoryRow& r) { return std::to_string(r.t); });
  row("position", [](const TrajectoryRow& r) { return std::to_string(r.pos); });
  row("load-up", [](const TrajectoryRow& r) { return std::to_string(r.load_up); });
  row("delivery", [](const TrajectoryRow& r) { return std::to_string(r.delivery); });
  row("battery", [&](const TrajectoryRow& r) { return num(r.battery); });
  row("weight", [&](const TrajectoryRow& r) { return num(r.weight); });
  for (std::size_t i = 0; i < inst.retailers.size(); ++i) {
    const std::string label =
        "inv " + (inst.retailers[i].name.empty()
                      ? "node " + std::to_string(inst.retailers[i].node)
                      : inst.retailers[i].name);
    row(label, [&, i](const TrajectoryRow& r) { return std::to_string(r.retailer_inv[i]); });
  }
  row("required energy", [&](const TrajectoryRow& r) { return num(r.required_energy); });
  row("travel cost", [&](const TrajectoryRow& r) { return num(r.travel_cost); });
  row("penalty", [&](const TrajectoryRow& r) { return num(r.penalty_cost); });
  os << "total\t" << num(traj.total_cost) << " (travel " << num(traj.total_travel)
     << ", penalty " << num(traj.total_penalty) << ")\n";
  return os.str();
}

}  // namespace errp
