"""0/1 programs of the form ``min c.x  s.t.  A x >= b (cover rows),  L x >= r (linking rows)``."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


def _as_rows(a, n, dtype):
    a = np.asarray(a, dtype=dtype)
    if n == 0:
        return a.reshape(a.shape[0] if a.ndim == 2 else 0, 0)
    return a.reshape(-1, n)


class SolverStatus(str, enum.Enum):
    EXACT_OPTIMAL = "ExactOptimal"
    GREEDY_FEASIBLE = "GreedyFeasible"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True, eq=False)
class BinaryProgram:
    costs: np.ndarray  # (n,) float, >= 0
    cover: np.ndarray  # (m, n) bool
    cover_rhs: np.ndarray  # (m,) int
    link: np.ndarray  # (k, n) int
    link_rhs: np.ndarray  # (k,) int

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=np.float64).ravel()
        n = c.shape[0]
        A = _as_rows(self.cover, n, bool)
        b = np.asarray(self.cover_rhs, dtype=np.int64).ravel()
        L = _as_rows(self.link, n, np.int64)
        r = np.asarray(self.link_rhs, dtype=np.int64).ravel()
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("objective coefficients must be finite and non-negative")
        if b.shape[0] != A.shape[0] or r.shape[0] != L.shape[0]:
            raise ValueError("right-hand side length does not match the constraint rows")
        for name, v in (("costs", c), ("cover", A), ("cover_rhs", b), ("link", L), ("link_rhs", r)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def build(cls, costs, cover=None, cover_rhs=None, link=None, link_rhs=None):
        costs = np.asarray(costs, dtype=np.float64).ravel()
        n = costs.shape[0]
        cover = np.zeros((0, n), dtype=bool) if cover is None else _as_rows(cover, n, bool)
        if cover_rhs is None:
            cover_rhs = np.ones(cover.shape[0], dtype=np.int64)
        link = np.zeros((0, n), dtype=np.int64) if link is None else _as_rows(link, n, np.int64)
        if link_rhs is None:
            link_rhs = np.zeros(link.shape[0], dtype=np.int64)
        return cls(costs, cover, cover_rhs, link, link_rhs)

    @property
    def n_vars(self):
        return self.costs.shape[0]

    def rows(self):
        """All constraints stacked as ``G x >= h`` with integer G."""
        G = np.vstack([self.cover.astype(np.int64), self.link])
        h = np.concatenate([self.cover_rhs, self.link_rhs])
        return G, h

    def is_feasible(self, x) -> bool:
        x = np.asarray(x, dtype=np.int64)
        G, h = self.rows()
        return bool(np.all(G @ x >= h))

    def objective(self, x) -> float:
        return float(self.costs @ np.asarray(x, dtype=np.float64))

    def violated_cover_rows(self, x):
        x = np.asarray(x, dtype=np.int64)
        return np.flatnonzero(self.cover.astype(np.int64) @ x < self.cover_rhs)


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: Optional[np.ndarray]  # bool assignment, None when infeasible
    objective: float
    status: SolverStatus
    gap: float = 0.0
    lower_bound: float = 0.0
    nodes: int = 0

    @property
    def feasible(self):
        return self.status is not SolverStatus.INFEASIBLE


def activation_links(n_groups, members_per_group):
    """Linking rows ``N_B x_c(g) - sum_{j in g} x_j >= 0`` for a block layout.

    Member variables are ``[g * N_B, (g + 1) * N_B)``; the activation variable of
    group g sits at ``n_groups * N_B + g``.
    """
    nb = members_per_group
    n = n_groups * nb + n_groups
    L = np.zeros((n_groups, n), dtype=np.int64)
    for g in range(n_groups):
        L[g, g * nb : (g + 1) * nb] = -1
        L[g, n_groups * nb + g] = nb
    return L
