"""Threshold (tau) dominance, tau-Pareto sets and Pareto-based candidate filtering."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricPoint:
    item: object
    coords: tuple

    @property
    def total(self) -> float:
        return float(sum(self.coords))


def tau_dominates(a: MetricPoint, b: MetricPoint, tau: Sequence[float]) -> bool:
    """a tau-dominates b: a + tau >= b everywhere and a > b somewhere.

    A negative tau demands a margin before ``a`` dominates, so lowering tau
    only ever grows the tau-Pareto set; tau = 0 is plain Pareto dominance.
    """
    if not (len(a.coords) == len(b.coords) == len(tau)):
        raise ValueError("dimension mismatch")
    return (all(x + t >= y for x, y, t in zip(a.coords, b.coords, tau))
            and any(x > y for x, y in zip(a.coords, b.coords)))


def _sfs(coords: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Sort-filter skyline; exact when tau <= 0 (dominance is then transitive
    and implies a strictly larger coordinate sum)."""
    order = np.lexsort((np.arange(len(coords)), -coords.sum(axis=1)))
    window: list[int] = []
    for k in order:
        p = coords[k]
        if window:
            w = coords[window]
            if np.any(np.all(w + tau >= p, axis=1) & np.any(w > p, axis=1)):
                continue
        window.append(k)
    keep = np.zeros(len(coords), dtype=bool)
    keep[window] = True
    return keep


def _pairwise(coords: np.ndarray, tau: np.ndarray, block: int = 256) -> np.ndarray:
    """Non-tau-dominated mask by blocked all-pairs comparison (any tau)."""
    n = len(coords)
    keep = np.ones(n, dtype=bool)
    for lo in range(0, n, block):
        b = coords[lo:lo + block]  # candidates being tested
        ge = np.all(coords[:, None, :] + tau >= b[None, :, :], axis=2)
        gt = np.any(coords[:, None, :] > b[None, :, :], axis=2)
        keep[lo:lo + block] = ~np.any(ge & gt, axis=0)
    return keep


def tau_pareto_mask(coords, tau) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2:
        raise ValueError("coords must be a 2-d array")
    if len(coords) == 0:
        return np.zeros(0, dtype=bool)
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != (coords.shape[1],):
        raise ValueError("dimension mismatch")
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau entries must be finite")
    if np.all(tau <= 0):
        return _sfs(coords, tau)
    return _pairwise(coords, tau)


def tau_pareto_set(points: Sequence[MetricPoint], tau) -> list[MetricPoint]:
    """Points not tau-dominated by any point of ``points``, in input order."""
    if not points:
        return []
    mask = tau_pareto_mask([p.coords for p in points], tau)
    return [p for p, k in zip(points, mask) if k]


@dataclass
class ParetoIteration:
    iteration: int
    tau: tuple
    size: int
    cf_found: bool


def pareto_filtering(points: Sequence[MetricPoint], all_items, is_cf, max_iters: int = 25,
                     diagnostics: list | None = None):
    """Grow a tau-Pareto candidate set until removing it is a counterfactual.

    Iteration ``it`` uses tau = -it * sigma, sigma being the per-dimension
    population standard deviation over all points. ``is_cf`` is called once
    per iteration with the current item set. Returns that item set as a
    frozenset, or None when every item was examined or ``max_iters`` ran out.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be positive")
    all_items = frozenset(all_items)
    if not points:
        return None
    coords = np.asarray([p.coords for p in points], dtype=np.float64)
    sigma = coords.std(axis=0)
    found = frozenset()
    for it in range(max_iters):
        if found == all_items:
            break
        tau = -it * sigma
        mask = tau_pareto_mask(coords, tau)
        found = frozenset(p.item for p, k in zip(points, mask) if k)
        ok = is_cf(found)
        if diagnostics is not None:
            diagnostics.append(ParetoIteration(it, tuple(float(x) for x in tau), len(found), ok))
        log.debug("pareto iter=%d |PS|=%d cf=%s", it, len(found), ok)
        if ok:
            return found
    return None
