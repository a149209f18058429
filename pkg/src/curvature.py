"""Exact Ollivier-Ricci curvature with uniform 1-step walk measures."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import ot

from src.decomposition import triadic_support
from src.errors import IsolatedNodeError, NotAnEdgeError, UnboundedTransportError
from src.graph import UNREACHABLE, Graph, bfs_distance

logger = logging.getLogger(__name__)

SIGN_TOLERANCE = 1e-9


class EdgeSelection(StrEnum):
    ALL = 'all'
    ZERO_SUPPORT = 'zero-support'


@dataclass(frozen=True, slots=True)
class WalkMeasure:
    """Probability mass on ``support`` (sorted node ids)."""

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self) -> None:
        if self.support.shape != self.mass.shape:
            raise ValueError('support and mass must align')
        if self.mass.size == 0 or np.any(self.mass <= 0):
            raise ValueError('masses must be positive')
        if abs(float(self.mass.sum()) - 1.0) > 1e-12:
            raise ValueError(f'masses sum to {float(self.mass.sum())}, expected 1')


@dataclass(frozen=True, slots=True)
class CurvatureResult:
    edge: tuple[int, int]
    w1: float
    kappa: float
    support: int


@dataclass(frozen=True)
class TheoremReport:
    """Curvature of every edge whose endpoints share no neighbor."""

    results: list[CurvatureResult] = field(default_factory=list)
    violations: list[CurvatureResult] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations


def walk_measure(g: Graph, u: int) -> WalkMeasure:
    """Uniform mass ``1 / deg(u)`` on each neighbor of ``u``."""
    nbrs = g.neighbors(u)
    if nbrs.size == 0:
        raise IsolatedNodeError(u)
    return WalkMeasure(support=nbrs.copy(), mass=np.full(nbrs.size, 1.0 / nbrs.size))


def transport_cost_matrix(g: Graph, a: WalkMeasure, b: WalkMeasure) -> np.ndarray:
    """Hop distances between the two supports; raises if any pair is disconnected."""
    cost = np.empty((a.support.size, b.support.size), dtype=np.float64)
    for i, p in enumerate(a.support.tolist()):
        dist = bfs_distance(g, p)[b.support]
        unreachable = np.flatnonzero(dist == UNREACHABLE)
        if unreachable.size:
            raise UnboundedTransportError(p, int(b.support[unreachable[0]]))
        cost[i] = dist
    return cost


def wasserstein1(g: Graph, a: WalkMeasure, b: WalkMeasure) -> float:
    """Exact W1 between two measures under hop distance (network simplex)."""
    cost = transport_cost_matrix(g, a, b)
    return float(ot.emd2(a.mass, b.mass, cost))


def ollivier_ricci(g: Graph, u: int, v: int) -> CurvatureResult:
    """``kappa(u, v) = 1 - W1(mu_u, mu_v)`` for adjacent ``u, v``."""
    if not g.has_edge(u, v):
        raise NotAnEdgeError(u, v)
    w1 = wasserstein1(g, walk_measure(g, u), walk_measure(g, v))
    lo, hi = min(u, v), max(u, v)
    return CurvatureResult(
        edge=(lo, hi), w1=w1, kappa=1.0 - w1, support=triadic_support(g, u, v)
    )


def curvature_table(
    g: Graph, edges: EdgeSelection = EdgeSelection.ALL
) -> list[CurvatureResult]:
    rows = []
    for u, v in g.edge_list():
        if edges is EdgeSelection.ZERO_SUPPORT and triadic_support(g, u, v) != 0:
            continue
        rows.append(ollivier_ricci(g, u, v))
    return rows


def verify_no_common_neighbor_theorem(g: Graph) -> TheoremReport:
    """Check ``kappa <= 0`` on every edge with disjoint endpoint neighborhoods."""
    report = TheoremReport()
    for result in curvature_table(g, EdgeSelection.ZERO_SUPPORT):
        report.results.append(result)
        if result.kappa > SIGN_TOLERANCE:
            logger.warning(
                'edge %s: kappa=%.12f with empty common neighborhood', result.edge, result.kappa
            )
            report.violations.append(result)
    return report
