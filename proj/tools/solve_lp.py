#!/usr/bin/env python3
"""Reference MILP solver bridge.

Reads the LP subset emitted by `errp build-milp` (Minimize / Subject To /
Bounds / Binaries / End), solves it with scipy's HiGHS backend and writes the
solution file format `errp decode-plan` expects:

    STATUS <optimal|feasible|infeasible|unknown> OBJ <value> [GAP g] [TIME t]
    <variable> <value>
    ...
"""

import argparse
import math
import re
import sys
import time

import numpy as np
from scipy import optimize, sparse

IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def is_number(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False


class Model:
    def __init__(self):
        self.minimize = True
        self.obj = {}          # var -> coeff
        self.obj_const = 0.0
        self.cons = []         # (name, {var: coeff}, sense, rhs)
        self.lb = {}
        self.ub = {}
        self.binary = set()
        self.order = []        # declaration order
        self._seen = set()

    def var(self, name):
        if name not in self._seen:
            self._seen.add(name)
            self.order.append(name)
            self.lb[name] = 0.0
            self.ub[name] = math.inf
        return name


def parse_expr(model, toks, where):
    """sign/coefficient/identifier token stream -> (terms dict, constant)."""
    terms, const = {}, 0.0
    sign, coef, has_coef = 1.0, 0.0, False
    for tok in toks:
        if tok in ("+", "-"):
            if has_coef:
                const += sign * coef
                sign, has_coef = 1.0, False
            if tok == "-":
                sign = -sign
        elif is_number(tok):
            if has_coef:
                raise SystemExit(f"{where}: two consecutive numbers near {tok!r}")
            coef, has_coef = float(tok), True
        elif IDENT.match(tok):
            v = model.var(tok)
            terms[v] = terms.get(v, 0.0) + sign * (coef if has_coef else 1.0)
            sign, has_coef = 1.0, False
        else:
            raise SystemExit(f"{where}: unexpected token {tok!r}")
    if has_coef:
        const += sign * coef
    return terms, const


def parse_lp(path):
    model = Model()
    section = None
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            where = f"{path}:{lineno}"
            line = raw.split("\\", 1)[0].strip()
            if not line:
                continue
            low = line.lower()
            if low in ("minimize", "min", "maximize", "max"):
                section = "obj"
                model.minimize = low.startswith("min")
                continue
            if low in ("subject to", "st", "s.t."):
                section = "cons"
                continue
            if low == "bounds":
                section = "bounds"
                continue
            if low in ("binaries", "binary"):
                section = "bin"
                continue
            if low == "end":
                section = "done"
                break

            if section == "obj":
                body = line.split(":", 1)[1] if ":" in line else line
                terms, const = parse_expr(model, body.split(), where)
                for v, c in terms.items():
                    model.obj[v] = model.obj.get(v, 0.0) + c
                model.obj_const += const
            elif section == "cons":
                if ":" not in line:
                    raise SystemExit(f"{where}: constraint without a name label")
                name, body = line.split(":", 1)
                toks = body.split()
                sense_at = next((i for i, t in enumerate(toks)
                                 if t in ("<=", ">=", "=", "<", ">")), None)
                if sense_at is None or sense_at + 2 != len(toks):
                    raise SystemExit(f"{where}: malformed constraint")
                terms, const = parse_expr(model, toks[:sense_at], where)
                sense = {"<": "<=", ">": ">="}.get(toks[sense_at], toks[sense_at])
                model.cons.append((name.strip(), terms, sense,
                                   float(toks[-1]) - const))
            elif section == "bounds":
                toks = line.split()
                if len(toks) == 2 and toks[1].lower() == "free":
                    v = model.var(toks[0])
                    model.lb[v], model.ub[v] = -math.inf, math.inf
                elif len(toks) == 3 and IDENT.match(toks[0]):
                    v, op, val = model.var(toks[0]), toks[1], float(toks[2])
                    if op in ("<=", "<"):
                        model.ub[v] = val
                    elif op in (">=", ">"):
                        model.lb[v] = val
                    elif op == "=":
                        model.lb[v] = model.ub[v] = val
                    else:
                        raise SystemExit(f"{where}: bad bound operator {op!r}")
                elif len(toks) == 3 and is_number(toks[0]):
                    model.lb[model.var(toks[2])] = float(toks[0])
                elif len(toks) == 5 and is_number(toks[0]) and is_number(toks[4]):
                    v = model.var(toks[2])
                    model.lb[v], model.ub[v] = float(toks[0]), float(toks[4])
                else:
                    raise SystemExit(f"{where}: unrecognized bounds line")
            elif section == "bin":
                for tok in line.split():
                    v = model.var(tok)
                    model.binary.add(v)
                    model.lb[v], model.ub[v] = 0.0, 1.0
            elif section is None:
                raise SystemExit(f"{where}: content before any section header")
    if section != "done":
        raise SystemExit(f"{path}: missing End marker")
    return model


def solve(model, time_limit):
    n = len(model.order)
    idx = {v: i for i, v in enumerate(model.order)}
    c = np.zeros(n)
    for v, coeff in model.obj.items():
        c[idx[v]] = coeff
    if not model.minimize:
        c = -c

    constraints = []
    if model.cons:
        rows, cols, vals, lo, hi = [], [], [], [], []
        for r, (_, terms, sense, rhs) in enumerate(model.cons):
            for v, coeff in terms.items():
                rows.append(r)
                cols.append(idx[v])
                vals.append(coeff)
            lo.append(rhs if sense in (">=", "=") else -math.inf)
            hi.append(rhs if sense in ("<=", "=") else math.inf)
        a = sparse.csc_array((vals, (rows, cols)), shape=(len(model.cons), n))
        constraints.append(optimize.LinearConstraint(a, lo, hi))

    integrality = np.array([1 if v in model.binary else 0 for v in model.order])
    bounds = optimize.Bounds([model.lb[v] for v in model.order],
                             [model.ub[v] for v in model.order])
    options = {}
    if time_limit:
        options["time_limit"] = time_limit
    return optimize.milp(c=c, constraints=constraints, integrality=integrality,
                         bounds=bounds, options=options)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("model", help="LP file")
    ap.add_argument("solution", help="solution file to write")
    ap.add_argument("--time-limit", type=float, default=None, help="seconds")
    args = ap.parse_args()

    model = parse_lp(args.model)
    t0 = time.perf_counter()
    res = solve(model, args.time_limit)
    elapsed = time.perf_counter() - t0

    if res.status == 0:
        status = "optimal"
    elif res.status == 1 and res.x is not None:
        status = "feasible"
    elif res.status == 2:
        status = "infeasible"
    else:
        status = "unknown"

    lines = []
    obj = 0.0
    if res.x is not None:
        obj = float(res.fun) * (1.0 if model.minimize else -1.0) + model.obj_const
        for v, x in zip(model.order, res.x):
            x = float(x)
            if v in model.binary:
                x = float(round(x))
            elif abs(x) < 1e-12:
                x = 0.0
            lines.append(f"{v} {x!r}")

    header = f"STATUS {status} OBJ {obj!r}"
    gap = getattr(res, "mip_gap", None)
    if gap is not None and math.isfinite(gap):
        header += f" GAP {float(gap)!r}"
    header += f" TIME {elapsed:.3f}"

    with open(args.solution, "w") as f:
        f.write(header + "\n")
        f.write("\n".join(lines))
        if lines:
            f.write("\n")
    print(f"{status}: objective {obj} ({len(lines)} variables, "
          f"{elapsed:.2f}s)", file=sys.stderr)
    return 0 if res.x is not None or status == "infeasible" else 1


if __name__ == "__main__":
    sys.exit(main())
