"""Branch-and-bound for :class:`BinaryProgram`.

Each node propagates variable bounds through every row, then bounds the
subproblem by the larger of the LP relaxation (HiGHS via scipy) and the
combinatorial bound ``ceil(uncovered / max column coverage) * min cost``.
Nodes are expanded best-bound first; branching picks the most fractional LP
variable, lowest index on ties, and explores ``x_j = 1`` before ``x_j = 0``.

The root is reduced before branching. Reductions only remove points that a
no-worse solution can replace:

* duplicate and dominated cover rows (a superset row is implied);
* dominated columns: same linking column with no positive entries, a subset
  of another column's cover set, and no cheaper;
* forced values found by propagation.

The LP also carries the variable upper bounds ``x_j <= x_p`` implied by
linking rows such as ``N_B x_c >= sum x_b``, and for each cover row whose
variables all have such a parent, the projected row ``sum of parents >= 1``
(some covering cell must be on). Neither cuts off an integer point, but both
make the relaxation of activation-linked programs far tighter.
"""
from __future__ import annotations

import heapq
import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .greedy import solve_greedy
from .program import BinaryProgram, SolveResult, SolverStatus

DEFAULT_NODE_LIMIT = 1_000_000
_LP_SAFETY = 1e-7


class _Infeasible(Exception):
    pass


class _Node:
    __slots__ = ("lb", "ub", "bound")

    def __init__(self, lb, ub, bound):
        self.lb = lb
        self.ub = ub
        self.bound = bound


class _Solver:
    def __init__(self, program: BinaryProgram, use_lp=True):
        self.program = program
        self.c = program.costs
        self.n = program.n_vars
        G, h = program.rows()
        self.G = G
        self.h = h
        self.n_cover = program.cover.shape[0]
        self.use_lp = use_lp
        self.integral_costs = bool(np.all(self.c == np.round(self.c)))
        vals, counts = np.unique(self.c[self.c > 0], return_counts=True)
        self.cost_values = list(zip(vals.tolist(), counts.tolist()))
        self._prepare_rows(np.ones(len(h), dtype=bool))

    def _prepare_rows(self, keep):
        self.G = self.G[keep]
        self.h = self.h[keep]
        self.n_cover = int(keep[: self.n_cover].sum())
        self.Gpos = np.where(self.G > 0, self.G, 0)
        self.Gneg = np.where(self.G < 0, self.G, 0)
        self.rowmax = np.abs(self.G).max(axis=1) if self.G.shape[0] else np.zeros(0, dtype=np.int64)
        self.vub = self._implied_upper_bounds()
        self.P = self._projected_covers()

    # -- propagation -------------------------------------------------------

    def propagate(self, lb, ub):
        if self.G.shape[0] == 0:
            return
        while True:
            slack = self.Gpos @ ub + self.Gneg @ lb - self.h
            if np.any(slack < 0):
                raise _Infeasible
            tight = np.flatnonzero(slack < self.rowmax)
            if tight.size == 0:
                return
            Gt = self.G[tight]
            st = slack[tight][:, None]
            free = lb != ub
            up = free & np.any(Gt > st, axis=0)
            down = free & np.any(-Gt > st, axis=0)
            if np.any(up & down):
                raise _Infeasible
            if not (up.any() or down.any()):
                return
            lb[up] = 1
            ub[down] = 0

    def _implied_upper_bounds(self):
        pairs = []
        for G_r, h_r in zip(self.G[self.n_cover :], self.h[self.n_cover :]):
            pos = np.flatnonzero(G_r > 0)
            if len(pos) != 1:
                continue
            p = pos[0]
            for j in np.flatnonzero(G_r < 0):
                # with x_p = 0 and x_j = 1 the row cannot reach its rhs
                if G_r[j] < h_r:
                    pairs.append((int(j), int(p)))
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def _projected_covers(self):
        # a cover row whose every variable needs some x_p on implies sum of those x_p >= 1
        if self.vub.size == 0 or self.n_cover == 0:
            return np.zeros((0, self.n), dtype=np.int64)
        parent = np.full(self.n, -1)
        for j, p in self.vub[::-1]:
            parent[j] = p
        A = self.G[: self.n_cover] > 0
        ok = ~(A & (parent < 0)[None, :]).any(axis=1)
        if not ok.any():
            return np.zeros((0, self.n), dtype=np.int64)
        rows = np.zeros((int(ok.sum()), self.n), dtype=bool)
        r_idx, j_idx = np.nonzero(A[ok])
        rows[r_idx, parent[j_idx]] = True
        return np.unique(rows, axis=0).astype(np.int64)

    # -- root reductions ---------------------------------------------------

    def reduce(self, lb, ub):
        for _ in range(20):
            self.propagate(lb, ub)
            changed = self._drop_rows(lb, ub)
            changed |= self._dominated_columns(lb, ub)
            if not changed:
                self.propagate(lb, ub)
                return

    def _drop_rows(self, lb, ub):
        # satisfied rows go; among unit-rhs cover rows keep one per distinct free support and drop supersets
        minact = self.Gpos @ lb + self.Gneg @ ub
        keep = minact < self.h
        cover_idx = np.flatnonzero(keep[: self.n_cover] & (self.h[: self.n_cover] == 1))
        if cover_idx.size > 1:
            free = lb != ub
            R = (self.G[cover_idx][:, free] > 0).astype(np.float32)
            _, first = np.unique(R, axis=0, return_index=True)
            uniq = np.zeros(cover_idx.size, dtype=bool)
            uniq[first] = True
            Ru = R[uniq]
            size = Ru.sum(axis=1)
            inter = Ru @ Ru.T
            sub = (inter == size[:, None]) & ~np.eye(len(Ru), dtype=bool)  # sub[s, r]: row s within row r
            dominated = sub.any(axis=0)
            kept_local = np.zeros(cover_idx.size, dtype=bool)
            kept_local[np.flatnonzero(uniq)[~dominated]] = True
            keep[cover_idx[~kept_local]] = False
        if keep.all():
            return False
        self._prepare_rows(keep)
        return True

    def _dominated_columns(self, lb, ub):
        if np.any(self.h[: self.n_cover] > 1):
            return False
        free = np.flatnonzero(lb != ub)
        if free.size == 0:
            return False
        A = self.G[: self.n_cover] > 0
        link = self.G[self.n_cover :]
        changed = False
        groups = {}
        for j in free:
            col = link[:, j]
            if np.any(col > 0):
                continue
            groups.setdefault(col.tobytes(), []).append(j)
        for members in groups.values():
            members = np.array(members)
            C = A[:, members].astype(np.float32)
            size = C.sum(axis=0)
            cost = self.c[members]
            empty = size == 0
            # a column covering nothing, with no positive link entry, is never needed
            kill = empty.copy()
            live = np.flatnonzero(~empty)
            if live.size > 1:
                Cl = C[:, live]
                inter = Cl.T @ Cl
                sl, cl = size[live], cost[live]
                sub = inter == sl[:, None]  # sub[j, k]: column j within column k
                cheaper = cl[None, :] < cl[:, None]
                same_cost = cl[None, :] == cl[:, None]
                proper = sl[None, :] > sl[:, None]
                idx = members[live]
                earlier = idx[None, :] < idx[:, None]
                dom = sub & (cheaper | (same_cost & (proper | earlier)))
                np.fill_diagonal(dom, False)
                kill[live[dom.any(axis=1)]] = True
            if kill.any():
                ub[members[kill]] = 0
                changed = True
        return changed

    # -- bounds --------------------------------------------------------------

    def combinatorial_bound(self, lb, ub):
        fixed = float(self.c @ lb)
        if self.n_cover == 0:
            return fixed
        A = self.G[: self.n_cover] > 0
        act = A.astype(np.int64) @ lb
        unc = (act < 1) & (self.h[: self.n_cover] >= 1)
        u = int(unc.sum())
        if u == 0:
            return fixed
        free = lb != ub
        cov = A[unc][:, free].sum(axis=0)
        if cov.size == 0 or cov.max() == 0:
            raise _Infeasible
        mincost = float(self.c[free][cov > 0].min())
        return fixed + math.ceil(u / int(cov.max())) * mincost

    def lp_bound(self, lb, ub):
        free = np.flatnonzero(lb != ub)
        fixed = float(self.c @ lb)
        if free.size == 0:
            return fixed, lb.astype(np.float64)
        rhs = self.h - self.G @ lb
        Gf = self.G[:, free]
        minact = np.where(Gf < 0, Gf, 0).sum(axis=1)
        active = minact < rhs
        pos = np.full(self.n, -1)
        pos[free] = np.arange(free.size)
        rows = [sp.csr_matrix(-Gf[active].astype(np.float64))]
        b = [-rhs[active].astype(np.float64)]
        if self.P.shape[0]:
            prhs = 1 - self.P @ lb
            live = prhs > 0
            if live.any():
                rows.append(sp.csr_matrix(-self.P[live][:, free].astype(np.float64)))
                b.append(-prhs[live].astype(np.float64))
        if self.vub.size:
            vj, vp = self.vub[:, 0], self.vub[:, 1]
            sel = (pos[vj] >= 0) & (pos[vp] >= 0)
            if sel.any():
                k = int(sel.sum())
                V = sp.coo_matrix(
                    (
                        np.concatenate([np.ones(k), -np.ones(k)]),
                        (np.concatenate([np.arange(k), np.arange(k)]), np.concatenate([pos[vj[sel]], pos[vp[sel]]])),
                    ),
                    shape=(k, free.size),
                ).tocsr()
                rows.append(V)
                b.append(np.zeros(k))
        A_ub = sp.vstack(rows).tocsr()
        b_ub = np.concatenate(b)
        if A_ub.shape[0] == 0:
            return fixed, lb.astype(np.float64)
        res = linprog(self.c[free], A_ub=A_ub, b_ub=b_ub, bounds=(0.0, 1.0), method="highs")
        if res.status == 2:
            raise _Infeasible
        if res.status != 0:
            return None, None
        x = lb.astype(np.float64)
        x[free] = res.x
        val = fixed + float(res.fun)
        self.reduced_costs = np.zeros(self.n)
        self.reduced_costs[free] = res.lower.marginals + res.upper.marginals
        return val - _LP_SAFETY * max(1.0, abs(val)), x

    def fix_by_reduced_cost(self, bound, best, lb, ub):
        """Fix free variables whose flip alone would push the LP bound past ``best``."""
        rc = self.reduced_costs
        free = lb != ub
        gap = best - bound
        margin = _LP_SAFETY * max(1.0, abs(best))
        to_zero = free & (rc > 0) & (rc - margin >= gap)
        to_one = free & (rc < 0) & (-rc - margin >= gap)
        ub[to_zero] = 0
        lb[to_one] = 1
        return bool(to_zero.any() or to_one.any())

    def next_achievable(self, v):
        """Smallest objective value a 0/1 point can take that is >= ``v`` (or ``v`` itself).

        Exact when the positive costs take one or two distinct values, as in
        cell + beam programs; plain ceiling for other integral costs.
        """
        if not math.isfinite(v) or v <= 0:
            return v
        eps = 1e-9
        if len(self.cost_values) == 1:
            d, cnt = self.cost_values[0]
            k = math.ceil(v / d - eps)
            return max(k * d - eps * max(1.0, k * d), v) if k <= cnt else math.inf
        if len(self.cost_values) == 2:
            (a, ca), (b, cb) = sorted(self.cost_values, key=lambda t: t[1])
            best = math.inf
            for k in range(ca + 1):
                rest = v - k * a
                n = max(0, math.ceil(rest / b - eps))
                if n <= cb:
                    best = min(best, k * a + n * b)
                if rest <= 0:
                    break
            return max(best - eps * max(1.0, abs(best)), v)
        if self.integral_costs:
            return math.ceil(v - 1e-6)
        return v

    # -- incumbent heuristics -------------------------------------------------

    def polish(self, x, lb):
        """Drop selected variables, most expensive first, while feasibility holds."""
        x = x.astype(np.int64).copy()
        act = self.G @ x
        if np.any(act < self.h):
            return None
        order = sorted(np.flatnonzero((x == 1) & (lb == 0)), key=lambda j: (-self.c[j], -j))
        changed = True
        while changed:
            changed = False
            for j in order:
                if x[j] == 0:
                    continue
                col = self.G[:, j]
                nz = col != 0
                if np.all(act[nz] - col[nz] >= self.h[nz]):
                    act -= col
                    x[j] = 0
                    changed = True
        return x.astype(bool)

    def round_up(self, xlp, lb, ub):
        x = (lb == 1) | ((xlp > 1e-6) & (ub == 1))
        return self.polish(x, lb)


def solve_exact(program: BinaryProgram, node_limit=DEFAULT_NODE_LIMIT, use_lp=True) -> SolveResult:
    """Minimise ``program`` exactly.

    Returns ``ExactOptimal`` with gap 0, ``Infeasible``, or, when the node
    budget runs out, the best incumbent as ``GreedyFeasible`` with
    ``gap = objective - lower_bound``.
    """
    s = _Solver(program, use_lp=use_lp)
    n = s.n
    lb = np.zeros(n, dtype=np.int64)
    ub = np.ones(n, dtype=np.int64)
    infeasible = SolveResult(None, float("inf"), SolverStatus.INFEASIBLE)
    try:
        s.reduce(lb, ub)
    except _Infeasible:
        return infeasible

    best_x, best = None, math.inf
    try:
        g = solve_greedy(program)
        if g.feasible:
            best_x, best = g.x.copy(), g.objective
    except ValueError:
        pass

    def tol(v):
        return 1e-9 * max(1.0, abs(v)) if math.isfinite(v) else 0.0

    def finish_bound(v):
        return s.next_achievable(v)

    G_all, h_all = program.rows()
    G_all = sp.csr_matrix(G_all)

    def consider(x):
        nonlocal best_x, best
        if x is None:
            return
        val = program.objective(x)
        if val < best - tol(best) and np.all(G_all @ x.astype(np.int64) >= h_all):
            best_x, best = x.copy(), val

    heap = []
    counter = 0
    heapq.heappush(heap, (-math.inf, counter, _Node(lb, ub, -math.inf)))
    nodes = 0
    root_bound = None
    while heap:
        if nodes >= node_limit:
            break
        bound0, _, node = heapq.heappop(heap)
        if bound0 >= best - tol(best):
            continue
        nodes += 1
        lb, ub = node.lb.copy(), node.ub.copy()
        try:
            s.propagate(lb, ub)
            bound = finish_bound(s.combinatorial_bound(lb, ub))
            if np.all(lb == ub):
                consider(lb.astype(bool))
                continue
            if bound >= best - tol(best):
                continue
            xlp = None
            if s.use_lp:
                lpv, xlp = s.lp_bound(lb, ub)
                if lpv is not None:
                    bound = max(bound, finish_bound(lpv))
        except _Infeasible:
            continue
        if root_bound is None:
            root_bound = bound
        if bound >= best - tol(best):
            continue
        if xlp is None:
            # no relaxation: branch on the free variable covering most uncovered rows
            free = np.flatnonzero(lb != ub)
            A = s.G[: s.n_cover] > 0
            unc = (A.astype(np.int64) @ lb) < 1
            score = A[unc][:, free].sum(axis=0) if unc.any() else np.zeros(free.size)
            j = int(free[int(np.argmax(score))])
        else:
            consider(s.round_up(xlp, lb, ub))
            frac = np.abs(xlp - np.round(xlp))
            if np.all(frac < 1e-6):
                consider(np.round(xlp).astype(bool))
                continue
            if math.isfinite(best) and s.fix_by_reduced_cost(bound, best, lb, ub):
                try:
                    s.propagate(lb, ub)
                except _Infeasible:
                    continue
                frac[lb == ub] = 0.0
                if np.all(frac < 1e-6):
                    # every fractional variable got fixed; re-solve this node
                    counter += 1
                    heapq.heappush(heap, (bound, counter, _Node(lb, ub, bound)))
                    continue
            cand = np.flatnonzero((lb != ub) & (frac >= 1e-6))
            j = int(cand[int(np.argmin(np.abs(xlp[cand] - 0.5)))])
            if bound >= best - tol(best):
                continue
        # x_j = 1 gets the smaller counter so it pops first on equal bounds
        for val in (1, 0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            counter += 1
            heapq.heappush(heap, (bound, counter, _Node(clb, cub, bound)))

    if best_x is None:
        if heap and nodes >= node_limit:
            return SolveResult(None, float("inf"), SolverStatus.INFEASIBLE, gap=math.inf, nodes=nodes)
        return SolveResult(None, float("inf"), SolverStatus.INFEASIBLE, nodes=nodes)
    open_bounds = [b for b, _, _ in heap if b < best - tol(best)]
    if open_bounds and nodes >= node_limit:
        lower = max(min(open_bounds), root_bound if root_bound is not None else -math.inf)
        lower = min(lower, best)
        return SolveResult(
            best_x, best, SolverStatus.GREEDY_FEASIBLE, gap=max(0.0, best - lower), lower_bound=lower, nodes=nodes
        )
    return SolveResult(best_x, best, SolverStatus.EXACT_OPTIMAL, gap=0.0, lower_bound=best, nodes=nodes)
