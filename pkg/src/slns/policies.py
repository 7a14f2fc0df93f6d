"""Destroy operators: each policy turns the search context into a neighbourhood cut.

Fixing-set policies return a :class:`HardFix` of exactly ``k_f`` binaries, each
fixed to its incumbent value, so the incumbent always survives the cut. Local
branching returns a :class:`SoftLB` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .backend.base import Backend, BackendConfig, SolveStatus
from .model import HardFix, MipModel, NeighbourhoodCut, Solution, SoftLB, apply_cut, l1_distance, relax

MATCH_TOL = 1e-6


class PolicyError(RuntimeError):
    """The policy cannot build a neighbourhood this iteration; the engine falls back to random."""


class PolicyExhausted(RuntimeError):
    """The policy has nothing left to propose; the engine stops."""


@dataclass
class PolicyContext:
    model: MipModel
    incumbent: Solution
    rng: np.random.Generator
    root_relaxation: Optional[Solution] = None
    pool: list[Solution] = field(default_factory=list)
    # Both vectors are aligned with ``model.binary_indices``.
    predictions: Optional[np.ndarray] = None
    oracle_labels: Optional[np.ndarray] = None
    lp_backend: Optional[Backend] = None
    lp_time_limit: float = 5.0

    def __post_init__(self):
        nb = len(self.model.binary_indices)
        for label in ("predictions", "oracle_labels"):
            vec = getattr(self, label)
            if vec is not None:
                vec = np.asarray(vec, dtype=int)
                if vec.shape != (nb,):
                    raise ValueError(f"{label} must have one entry per binary variable ({nb})")
                setattr(self, label, vec)

    @property
    def incumbent_binaries(self) -> np.ndarray:
        return np.round(self.incumbent.values[self.model.binary_indices]).astype(int)


@dataclass(frozen=True)
class OracleNoise:
    error_rate: float
    flipped: np.ndarray

    @classmethod
    def draw(cls, error_rate: float, n_binaries: int, rng) -> "OracleNoise":
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError("error rate must lie in [0, 1]")
        rng = np.random.default_rng(rng)
        return cls(error_rate, rng.random(n_binaries) < error_rate)

    @classmethod
    def none(cls, n_binaries: int) -> "OracleNoise":
        return cls(0.0, np.zeros(n_binaries, dtype=bool))

    def apply(self, labels) -> np.ndarray:
        return np.asarray(labels, dtype=int) ^ self.flipped.astype(int)


def _fix(ctx: PolicyContext, positions) -> HardFix:
    """HardFix over binary ordinals ``positions`` at incumbent values."""
    b = ctx.model.binary_indices
    inc = ctx.incumbent_binaries
    return HardFix({int(b[p]): int(inc[p]) for p in positions})


def weighted_sample(weights, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` distinct positions, each draw proportional to the remaining weights."""
    w = np.array(weights, dtype=float)
    if k > len(w):
        raise ValueError("cannot draw more items than available")
    out = np.empty(k, dtype=int)
    for t in range(k):
        cum = np.cumsum(w)
        # first position whose cumulative weight exceeds u * total; never a zero-weight slot
        j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        out[t] = j
        w[j] = 0.0
    return out


def correct_fixing_set(raw: HardFix, k_f: int, ctx: PolicyContext) -> HardFix:
    """Pad or trim ``raw`` uniformly at random to exactly ``k_f`` entries."""
    nb = len(ctx.model.binary_indices)
    if not 0 <= k_f <= nb:
        raise ValueError("k_f out of range")
    entries = dict(raw.entries)
    if len(entries) == k_f:
        return HardFix(entries)
    if len(entries) > k_f:
        keys = np.array(sorted(entries))
        drop = ctx.rng.choice(len(keys), size=len(keys) - k_f, replace=False)
        for i in keys[drop]:
            del entries[int(i)]
        return HardFix(entries)
    b = ctx.model.binary_indices
    inc = ctx.incumbent_binaries
    free = np.array([p for p, i in enumerate(b) if int(i) not in entries], dtype=int)
    add = ctx.rng.choice(free, size=k_f - len(entries), replace=False)
    for p in add:
        entries[int(b[p])] = int(inc[p])
    return HardFix(entries)


def _matching(ctx: PolicyContext, other: np.ndarray) -> HardFix:
    """HardFix over binaries where ``other`` (aligned with binaries) equals the incumbent."""
    inc = ctx.incumbent.values[ctx.model.binary_indices]
    return _fix(ctx, np.flatnonzero(np.abs(np.asarray(other, dtype=float) - inc) <= MATCH_TOL))


def random_policy(ctx: PolicyContext, k_f: int) -> HardFix:
    nb = len(ctx.model.binary_indices)
    return _fix(ctx, ctx.rng.choice(nb, size=k_f, replace=False))


def rins_policy(ctx: PolicyContext, k_f: int) -> HardFix:
    if ctx.root_relaxation is None:
        raise PolicyError("RINS needs the root relaxation")
    raw = _matching(ctx, ctx.root_relaxation.values[ctx.model.binary_indices])
    return correct_fixing_set(raw, k_f, ctx)


def crossover_policy(ctx: PolicyContext, k_f: int) -> HardFix:
    b = ctx.model.binary_indices
    pair: list[Solution] = []
    for sol in sorted(ctx.pool, key=lambda s: s.objective):
        if all(np.any(np.round(sol.values[b]) != np.round(p.values[b])) for p in pair):
            pair.append(sol)
        if len(pair) == 2:
            break
    if len(pair) < 2:
        raise PolicyError("crossover needs two distinct feasible solutions")
    first, second = pair
    # The matching set between the two best is fixed at incumbent values.
    agree = np.flatnonzero(np.round(first.values[b]) == np.round(second.values[b]))
    inc = ctx.incumbent_binaries
    agree = agree[np.round(first.values[b][agree]) == inc[agree]]
    return correct_fixing_set(_fix(ctx, agree), k_f, ctx)


def lb_radius(ctx: PolicyContext, ratio: float, reference: Optional[Solution] = None) -> int:
    if ctx.root_relaxation is None:
        raise PolicyError("local branching needs the root relaxation")
    ref = reference if reference is not None else ctx.incumbent
    k_max = l1_distance(ref, ctx.root_relaxation, ctx.model.binary_indices)
    return max(1, int(math.floor((1.0 - ratio) * k_max + 1e-9)))


def lb_policy(ctx: PolicyContext, ratio: float) -> SoftLB:
    return SoftLB(ctx.incumbent, lb_radius(ctx, ratio))


def lb_relax_policy(ctx: PolicyContext, ratio: float, k_f: int) -> HardFix:
    if ctx.lp_backend is None:
        raise PolicyError("LB-RELAX needs an LP backend")
    cut = SoftLB(ctx.incumbent, lb_radius(ctx, ratio))
    lp = relax(apply_cut(ctx.model, cut))
    out = ctx.lp_backend.solve_lp(lp, BackendConfig(time_limit=ctx.lp_time_limit))
    if out.status is not SolveStatus.OPTIMAL or out.best is None:
        raise PolicyError(f"LB-RELAX relaxation ended with {out.status.value}")
    raw = _matching(ctx, out.best.values[ctx.model.binary_indices])
    return correct_fixing_set(raw, k_f, ctx)


def slns_policy(ctx: PolicyContext, m_w: float, k_f: int, predictions=None) -> HardFix:
    pred = ctx.predictions if predictions is None else np.asarray(predictions, dtype=int)
    if pred is None:
        raise PolicyError("SLNS needs predictions")
    if m_w < 1:
        raise ValueError("weight multiplier must be >= 1")
    w = np.where(ctx.incumbent_binaries == pred, float(m_w), 1.0)
    return _fix(ctx, weighted_sample(w, k_f, ctx.rng))


def oracle_policy(ctx: PolicyContext, noise: OracleNoise, k_f: int, m_w: Optional[float] = None) -> HardFix:
    """Deterministic matching when ``m_w`` is None, weighted sampling otherwise."""
    if ctx.oracle_labels is None:
        raise ValueError("oracle policy needs label values")
    labels = noise.apply(ctx.oracle_labels)
    if m_w is None:
        raw = _fix(ctx, np.flatnonzero(ctx.incumbent_binaries == labels))
        return correct_fixing_set(raw, k_f, ctx)
    return slns_policy(ctx, m_w, k_f, predictions=labels)


# Engine-facing policy objects ------------------------------------------------

@dataclass
class Policy:
    """A named destroy operator callable as ``policy(ctx, ratio, k_f)``."""

    name: str
    build: Callable[[PolicyContext, float, int], NeighbourhoodCut]
    needs_relaxation: bool = False

    def __call__(self, ctx: PolicyContext, ratio: float, k_f: int) -> NeighbourhoodCut:
        return self.build(ctx, ratio, k_f)


POLICY_NAMES = ("random", "rins", "crossover", "lb", "lb-relax", "olns", "dolns", "slns")


def make_policy(name: str, m_w: float = 2.0, noise: Optional[OracleNoise] = None) -> Policy:
    if name == "random":
        return Policy(name, lambda ctx, r, k: random_policy(ctx, k))
    if name == "rins":
        return Policy(name, lambda ctx, r, k: rins_policy(ctx, k), needs_relaxation=True)
    if name == "crossover":
        return Policy(name, lambda ctx, r, k: crossover_policy(ctx, k))
    if name == "lb":
        return Policy(name, lambda ctx, r, k: lb_policy(ctx, r), needs_relaxation=True)
    if name == "lb-relax":
        return Policy(name, lambda ctx, r, k: lb_relax_policy(ctx, r, k), needs_relaxation=True)
    if name in ("olns", "dolns"):
        weight = None if name == "dolns" else m_w

        def build(ctx, r, k):
            nz = noise if noise is not None else OracleNoise.none(len(ctx.model.binary_indices))
            return oracle_policy(ctx, nz, k, weight)

        return Policy(name, build)
    if name == "slns":
        return Policy(name, lambda ctx, r, k: slns_policy(ctx, m_w, k))
    raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
