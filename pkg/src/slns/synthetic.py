"""Small synthetic instance families used by the tests, demos and acceptance suite."""
from __future__ import annotations

import numpy as np

from .model import LinearConstraint, MipModel, Sense, Variable, VarKind


def _rows(W, senses, rhs, prefix="c"):
    cons = []
    for k, (row, s, b) in enumerate(zip(W, senses, rhs)):
        terms = tuple((int(j), float(a)) for j, a in enumerate(row) if a != 0)
        cons.append(LinearConstraint(terms, s, float(b), f"{prefix}{k}"))
    return tuple(cons)


def knapsack(profits, weights, capacity, name="knapsack") -> MipModel:
    """Single 0-1 knapsack written as a minimisation (negated profit)."""
    variables = tuple(Variable(f"x{j}", VarKind.BINARY, 0.0, 1.0, -float(p)) for j, p in enumerate(profits))
    row = LinearConstraint(tuple((j, float(w)) for j, w in enumerate(weights)), Sense.LE, float(capacity), "cap")
    return MipModel(name, variables, (row,))


def multi_knapsack(n: int, m: int, rng, tightness: float = 0.5, name: str = "mkp") -> MipModel:
    """min -p x  s.t.  W x <= tightness * W 1,  x binary."""
    rng = np.random.default_rng(rng)
    W = rng.integers(1, 30, size=(m, n)).astype(float)
    p = W.mean(axis=0) + rng.integers(1, 15, size=n)
    cap = np.floor(tightness * W.sum(axis=1))
    variables = tuple(Variable(f"x{j}", VarKind.BINARY, 0.0, 1.0, -float(p[j])) for j in range(n))
    return MipModel(name, variables, _rows(W, [Sense.LE] * m, cap))


def random_binary(n: int, rng, m: int | None = None, name: str = "rb") -> MipModel:
    """Random pure-binary model mixing packing, covering and (rarely) equality rows.

    The mix means some draws are infeasible, which is intended: solvers must agree on that too.
    """
    rng = np.random.default_rng(rng)
    m = m if m is not None else int(rng.integers(1, 5))
    c = rng.integers(-20, 10, size=n).astype(float)
    W, senses, rhs = [], [], []
    for _ in range(m):
        row = rng.integers(-3, 10, size=n).astype(float)
        row[rng.random(n) < 0.3] = 0.0
        u = rng.random()
        if u < 0.6:
            senses.append(Sense.LE)
            rhs.append(np.floor(0.5 * np.abs(row).sum()))
        elif u < 0.9:
            senses.append(Sense.GE)
            rhs.append(np.floor(0.25 * row.clip(min=0).sum()))
        else:
            senses.append(Sense.EQ)
            pick = rng.random(n) < 0.5
            rhs.append(float(row[pick].sum()))
        W.append(row)
    variables = tuple(Variable(f"x{j}", VarKind.BINARY, 0.0, 1.0, float(c[j])) for j in range(n))
    return MipModel(name, variables, _rows(W, senses, rhs))


def planted_family(count: int, n: int, seed: int, m: int = 4, name: str = "planted") -> list[MipModel]:
    """Multi-knapsack instances sharing one planted structure.

    In every member a hidden subset of items gets profits far above their
    weights, so the optimum tends to pick that subset and the relaxation and
    early incumbents carry the signal a classifier can learn across instances.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        W = rng.integers(5, 30, size=(m, n)).astype(float)
        good = rng.random(n) < 0.35
        base = W.mean(axis=0)
        p = np.where(good, 1.6 * base, 0.8 * base) + rng.normal(0.0, 2.0, size=n)
        p = np.round(np.maximum(p, 1.0))
        cap = np.floor(0.45 * W.sum(axis=1))
        variables = tuple(Variable(f"x{j}", VarKind.BINARY, 0.0, 1.0, -float(p[j])) for j in range(n))
        out.append(MipModel(f"{name}{k:02d}", variables, _rows(W, [Sense.LE] * m, cap)))
    return out


def mixed_instance(rng, n_bin: int = 6, n_int: int = 2, n_cont: int = 2, name: str = "mixed") -> MipModel:
    """Small model with all three variable kinds (facility-style linking rows)."""
    rng = np.random.default_rng(rng)
    variables = []
    for j in range(n_bin):
        variables.append(Variable(f"y{j}", VarKind.BINARY, 0.0, 1.0, float(rng.integers(5, 20))))
    for j in range(n_int):
        variables.append(Variable(f"z{j}", VarKind.INTEGER, 0.0, float(rng.integers(3, 8)), float(rng.integers(1, 6))))
    for j in range(n_cont):
        variables.append(Variable(f"w{j}", VarKind.CONTINUOUS, 0.0, 10.0, float(rng.uniform(0.5, 3.0))))
    n = len(variables)
    cons = []
    demand = float(rng.integers(8, 15))
    cap = rng.integers(2, 6, size=n_bin).astype(float)
    # enough capacity and production to meet demand
    terms = [(j, float(cap[j])) for j in range(n_bin)] + [(n_bin + j, 1.0) for j in range(n_int)]
    cons.append(LinearConstraint(tuple(terms), Sense.GE, demand, "cover"))
    terms = [(n_bin + j, 1.0) for j in range(n_int)] + [(n_bin + n_int + j, 1.0) for j in range(n_cont)]
    cons.append(LinearConstraint(tuple(terms), Sense.GE, demand / 2, "produce"))
    for j in range(n_cont):
        cons.append(LinearConstraint(((n_bin + n_int + j, 1.0), (j % n_bin, -10.0)), Sense.LE, 0.0, f"link{j}"))
    return MipModel(name, tuple(variables), tuple(cons))
