"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public entry points (:func:`link_snr_matrix`, :func:`enumerate_binary`)
dispatch on :data:`idlenes._accel.USE_NUMBA`. Both paths are kept in step by
``tests/test_kernels.py``.

Geometry conventions: azimuth is measured counter-clockwise from the +x axis,
elevation is positive above the horizon, all angles in degrees.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

NO_PATH_DB = -999.0
_EPS = 1e-9


# ---------------------------------------------------------------------------
# link budget: numba path
# ---------------------------------------------------------------------------


@njit
def _slab(x0, y0, x1, y1, rx0, ry0, rx1, ry1):
    # Parametric overlap [t_lo, t_hi] of segment p0->p1 with the open rectangle.
    t_lo = 0.0
    t_hi = 1.0
    dx = x1 - x0
    if abs(dx) < 1e-12:
        if not (rx0 < x0 < rx1):
            return 1.0, 0.0
    else:
        a = (rx0 - x0) / dx
        b = (rx1 - x0) / dx
        if a > b:
            a, b = b, a
        t_lo = max(t_lo, a)
        t_hi = min(t_hi, b)
    dy = y1 - y0
    if abs(dy) < 1e-12:
        if not (ry0 < y0 < ry1):
            return 1.0, 0.0
    else:
        a = (ry0 - y0) / dy
        b = (ry1 - y0) / dy
        if a > b:
            a, b = b, a
        t_lo = max(t_lo, a)
        t_hi = min(t_hi, b)
    return t_lo, t_hi


@njit
def _leg_clear(x0, y0, z0, x1, y1, z1, bld):
    for k in range(bld.shape[0]):
        t_lo, t_hi = _slab(x0, y0, x1, y1, bld[k, 0], bld[k, 1], bld[k, 2], bld[k, 3])
        if t_lo < t_hi - _EPS:
            z_lo = z0 + t_lo * (z1 - z0)
            z_hi = z0 + t_hi * (z1 - z0)
            if min(z_lo, z_hi) < bld[k, 4]:
                return False
    return True


@njit
def _foliage_len(x0, y0, z0, x1, y1, z1, fol):
    seg = math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2 + (z1 - z0) ** 2)
    total = 0.0
    for k in range(fol.shape[0]):
        t_lo, t_hi = _slab(x0, y0, x1, y1, fol[k, 0], fol[k, 1], fol[k, 2], fol[k, 3])
        if t_lo < t_hi:
            total += (t_hi - t_lo) * seg
    return total


@njit
def _wrap180(a):
    return (a + 180.0) % 360.0 - 180.0


@njit
def _paths_one(cx, cy, cz, tx, ty, tz, bld, fol, fspl_const, refl_db, fol_db, az_out, el_out, loss_out):
    """Fill path arrays for one (cell, TP) pair; return the number of paths."""
    npath = 0
    d2 = math.hypot(tx - cx, ty - cy)
    if _leg_clear(cx, cy, cz, tx, ty, tz, bld):
        d3 = math.hypot(d2, tz - cz)
        az_out[npath] = math.degrees(math.atan2(ty - cy, tx - cx))
        el_out[npath] = math.degrees(math.atan2(tz - cz, d2))
        loss_out[npath] = (
            20.0 * math.log10(d3) + fspl_const + fol_db * _foliage_len(cx, cy, cz, tx, ty, tz, fol)
        )
        npath += 1
    for k in range(bld.shape[0]):
        bx0 = bld[k, 0]
        by0 = bld[k, 1]
        bx1 = bld[k, 2]
        by1 = bld[k, 3]
        for w in range(4):
            # mirror the TP across the wall's supporting line
            if w == 0:
                if not (cx < bx0 and tx < bx0):
                    continue
                mx = 2.0 * bx0 - tx
                my = ty
            elif w == 1:
                if not (cx > bx1 and tx > bx1):
                    continue
                mx = 2.0 * bx1 - tx
                my = ty
            elif w == 2:
                if not (cy < by0 and ty < by0):
                    continue
                mx = tx
                my = 2.0 * by0 - ty
            else:
                if not (cy > by1 and ty > by1):
                    continue
                mx = tx
                my = 2.0 * by1 - ty
            if w < 2:
                wall = bx0 if w == 0 else bx1
                s = (wall - cx) / (mx - cx)
                rx = wall
                ry = cy + s * (my - cy)
                if ry < by0 or ry > by1:
                    continue
            else:
                wall = by0 if w == 2 else by1
                s = (wall - cy) / (my - cy)
                ry = wall
                rx = cx + s * (mx - cx)
                if rx < bx0 or rx > bx1:
                    continue
            rz = cz + s * (tz - cz)
            if not _leg_clear(cx, cy, cz, rx, ry, rz, bld):
                continue
            if not _leg_clear(rx, ry, rz, tx, ty, tz, bld):
                continue
            l2 = math.hypot(mx - cx, my - cy)
            d3 = math.hypot(l2, tz - cz)
            fl = _foliage_len(cx, cy, cz, rx, ry, rz, fol) + _foliage_len(rx, ry, rz, tx, ty, tz, fol)
            az_out[npath] = math.degrees(math.atan2(my - cy, mx - cx))
            el_out[npath] = math.degrees(math.atan2(tz - cz, l2))
            loss_out[npath] = 20.0 * math.log10(d3) + fspl_const + refl_db + fol_db * fl
            npath += 1
    return npath


@njit
def _link_snr_numba(cell_xyz, cell_bore, cell_tx, beams, tp_xy, tp_z, bld, fol, budget):
    n_cells = cell_xyz.shape[0]
    n_beams = beams.shape[1]
    n_tp = tp_xy.shape[0]
    fspl_const, refl_db, fol_db, const_db, sidelobe_db = budget[0], budget[1], budget[2], budget[3], budget[4]
    out = np.full((n_cells * n_beams, n_tp), NO_PATH_DB)
    max_paths = 1 + 4 * bld.shape[0]
    az = np.empty(max_paths)
    el = np.empty(max_paths)
    loss = np.empty(max_paths)
    for c in range(n_cells):
        cx = cell_xyz[c, 0]
        cy = cell_xyz[c, 1]
        cz = cell_xyz[c, 2]
        for t in range(n_tp):
            npath = _paths_one(
                cx, cy, cz, tp_xy[t, 0], tp_xy[t, 1], tp_z, bld, fol, fspl_const, refl_db, fol_db, az, el, loss
            )
            for p in range(npath):
                a = _wrap180(az[p] - cell_bore[c])
                e = el[p]
                base = cell_tx[c] + const_db - loss[p]
                for b in range(n_beams):
                    g = beams[c, b, 4]
                    if abs(a - beams[c, b, 0]) > 0.5 * beams[c, b, 2] or abs(e - beams[c, b, 1]) > 0.5 * beams[c, b, 3]:
                        g -= sidelobe_db
                    v = base + g
                    row = c * n_beams + b
                    if v > out[row, t]:
                        out[row, t] = v
    return out


# ---------------------------------------------------------------------------
# link budget: numpy path
# ---------------------------------------------------------------------------


def _slab_np(x0, y0, x1, y1, rects):
    """Vectorised :func:`_slab`: segments (N,) against rectangles (K,4) -> (N,K) pairs."""
    x0 = x0[:, None]
    y0 = y0[:, None]
    x1 = x1[:, None]
    y1 = y1[:, None]
    t_lo = np.zeros((x0.shape[0], rects.shape[0]))
    t_hi = np.ones_like(t_lo)
    for lo_col, hi_col, p0, p1 in ((0, 2, x0, x1), (1, 3, y0, y1)):
        lo = rects[None, :, lo_col]
        hi = rects[None, :, hi_col]
        d = p1 - p0
        flat = np.abs(d) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (lo - p0) / d
            b = (hi - p0) / d
        a, b = np.minimum(a, b), np.maximum(a, b)
        inside = (lo < p0) & (p0 < hi)
        a = np.where(flat, np.where(inside, 0.0, 1.0), a)
        b = np.where(flat, np.where(inside, 1.0, 0.0), b)
        t_lo = np.maximum(t_lo, a)
        t_hi = np.minimum(t_hi, b)
    return t_lo, t_hi


def _leg_clear_np(x0, y0, z0, x1, y1, z1, bld):
    if bld.shape[0] == 0:
        return np.ones(x0.shape[0], dtype=bool)
    t_lo, t_hi = _slab_np(x0, y0, x1, y1, bld[:, :4])
    z_lo = z0[:, None] + t_lo * (z1 - z0)[:, None]
    z_hi = z0[:, None] + t_hi * (z1 - z0)[:, None]
    hit = (t_lo < t_hi - _EPS) & (np.minimum(z_lo, z_hi) < bld[None, :, 4])
    return ~hit.any(axis=1)


def _foliage_len_np(x0, y0, z0, x1, y1, z1, fol):
    if fol.shape[0] == 0:
        return np.zeros(x0.shape[0])
    seg = np.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2 + (z1 - z0) ** 2)
    t_lo, t_hi = _slab_np(x0, y0, x1, y1, fol)
    return (np.where(t_lo < t_hi, t_hi - t_lo, 0.0)).sum(axis=1) * seg


def _link_snr_numpy(cell_xyz, cell_bore, cell_tx, beams, tp_xy, tp_z, bld, fol, budget):
    n_cells = cell_xyz.shape[0]
    n_beams = beams.shape[1]
    n_tp = tp_xy.shape[0]
    fspl_const, refl_db, fol_db, const_db, sidelobe_db = budget
    out = np.full((n_cells * n_beams, n_tp), NO_PATH_DB)
    tx = tp_xy[:, 0]
    ty = tp_xy[:, 1]
    tz = np.full(n_tp, tp_z)
    for c in range(n_cells):
        cx, cy, cz = cell_xyz[c]
        cxv = np.full(n_tp, cx)
        cyv = np.full(n_tp, cy)
        czv = np.full(n_tp, cz)
        paths = []

        d2 = np.hypot(tx - cx, ty - cy)
        ok = _leg_clear_np(cxv, cyv, czv, tx, ty, tz, bld)
        loss = 20.0 * np.log10(np.hypot(d2, tz - cz)) + fspl_const
        loss = loss + fol_db * _foliage_len_np(cxv, cyv, czv, tx, ty, tz, fol)
        paths.append((ok, np.degrees(np.arctan2(ty - cy, tx - cx)), np.degrees(np.arctan2(tz - cz, d2)), loss))

        for bx0, by0, bx1, by1, _h in bld:
            for w in range(4):
                if w == 0:
                    ok = (cx < bx0) & (tx < bx0)
                    mx, my = 2.0 * bx0 - tx, ty
                elif w == 1:
                    ok = (cx > bx1) & (tx > bx1)
                    mx, my = 2.0 * bx1 - tx, ty
                elif w == 2:
                    ok = (cy < by0) & (ty < by0)
                    mx, my = tx, 2.0 * by0 - ty
                else:
                    ok = (cy > by1) & (ty > by1)
                    mx, my = tx, 2.0 * by1 - ty
                if not ok.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    if w < 2:
                        wall = bx0 if w == 0 else bx1
                        s = (wall - cx) / (mx - cx)
                        rx = np.full(n_tp, wall)
                        ry = cy + s * (my - cy)
                        ok &= (ry >= by0) & (ry <= by1)
                    else:
                        wall = by0 if w == 2 else by1
                        s = (wall - cy) / (my - cy)
                        ry = np.full(n_tp, wall)
                        rx = cx + s * (mx - cx)
                        ok &= (rx >= bx0) & (rx <= bx1)
                idx = np.flatnonzero(ok)
                if idx.size == 0:
                    continue
                rz = cz + s[idx] * (tz[idx] - cz)
                rxi, ryi = rx[idx], ry[idx]
                clear = _leg_clear_np(cxv[idx], cyv[idx], czv[idx], rxi, ryi, rz, bld)
                clear &= _leg_clear_np(rxi, ryi, rz, tx[idx], ty[idx], tz[idx], bld)
                idx = idx[clear]
                if idx.size == 0:
                    continue
                rxi, ryi, rz = rxi[clear], ryi[clear], rz[clear]
                mxi, myi = mx[idx], my[idx]
                l2 = np.hypot(mxi - cx, myi - cy)
                fl = _foliage_len_np(cxv[idx], cyv[idx], czv[idx], rxi, ryi, rz, fol)
                fl = fl + _foliage_len_np(rxi, ryi, rz, tx[idx], ty[idx], tz[idx], fol)
                full_loss = np.full(n_tp, np.inf)
                full_loss[idx] = 20.0 * np.log10(np.hypot(l2, tz[idx] - cz)) + fspl_const + refl_db + fol_db * fl
                az = np.zeros(n_tp)
                el = np.zeros(n_tp)
                az[idx] = np.degrees(np.arctan2(myi - cy, mxi - cx))
                el[idx] = np.degrees(np.arctan2(tz[idx] - cz, l2))
                mask = np.zeros(n_tp, dtype=bool)
                mask[idx] = True
                paths.append((mask, az, el, full_loss))

        block = out[c * n_beams : (c + 1) * n_beams]
        bm = beams[c]
        for mask, az, el, loss in paths:
            if not mask.any():
                continue
            a = (az - cell_bore[c] + 180.0) % 360.0 - 180.0
            inside = (np.abs(a[None, :] - bm[:, 0:1]) <= 0.5 * bm[:, 2:3]) & (
                np.abs(el[None, :] - bm[:, 1:2]) <= 0.5 * bm[:, 3:4]
            )
            gain = np.where(inside, bm[:, 4:5], bm[:, 4:5] - sidelobe_db)
            val = cell_tx[c] + const_db - loss[None, :] + gain
            val = np.where(mask[None, :], val, NO_PATH_DB)
            np.maximum(block, val, out=block)
    return out


def link_snr_matrix(cell_xyz, cell_bore, cell_tx, beams, tp_xy, tp_z, bld, fol, budget, use_numba=None):
    """Best-path SNR in dB for every (cell beam, traffic point) pair.

    Parameters
    ----------
    cell_xyz : (C, 3) array
        Antenna positions in meters.
    cell_bore : (C,) array
        Boresight azimuth per cell, degrees.
    cell_tx : (C,) array
        Transmit power per cell, dBm.
    beams : (C, B, 5) array
        Per-beam ``(az_center, el_center, az_width, el_width, peak_gain)`` in
        the cell-local frame.
    tp_xy : (N, 2) array
    tp_z : float
        UE antenna height.
    bld : (K, 5) array
        Buildings ``(x0, y0, x1, y1, height)``.
    fol : (F, 4) array
        Foliage rectangles ``(x0, y0, x1, y1)``.
    budget : sequence of 5 floats
        ``(fspl_const_db, reflection_loss_db, foliage_db_per_m, const_db,
        sidelobe_drop_db)``; ``const_db`` collects every gain and loss that
        does not depend on geometry.

    Returns
    -------
    (C*B, N) float64 array, cell-major rows, ``NO_PATH_DB`` where no path exists.
    """
    args = (
        np.ascontiguousarray(cell_xyz, dtype=np.float64),
        np.ascontiguousarray(cell_bore, dtype=np.float64),
        np.ascontiguousarray(cell_tx, dtype=np.float64),
        np.ascontiguousarray(beams, dtype=np.float64),
        np.ascontiguousarray(tp_xy, dtype=np.float64).reshape(-1, 2),
        float(tp_z),
        np.ascontiguousarray(bld, dtype=np.float64).reshape(-1, 5),
        np.ascontiguousarray(fol, dtype=np.float64).reshape(-1, 4),
    )
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _link_snr_numba(*args, np.asarray(budget, dtype=np.float64))
    return _link_snr_numpy(*args, tuple(float(v) for v in budget))


# ---------------------------------------------------------------------------
# exhaustive 0/1 enumeration
# ---------------------------------------------------------------------------


@njit
def _enumerate_numba(costs, G, h, group, group_cost):
    n = costs.shape[0]
    m = G.shape[0]
    n_groups = group_cost.shape[0]
    act = np.zeros(m, dtype=np.int64)
    viol = 0
    for r in range(m):
        if act[r] < h[r]:
            viol += 1
    gcount = np.zeros(n_groups, dtype=np.int64)
    x = np.zeros(n, dtype=np.int64)
    cost = 0.0
    code = 0
    best_cost = np.inf
    best_code = -1
    if viol == 0:
        best_cost = 0.0
        best_code = 0
    total = 1 << n
    for i in range(1, total):
        j = 0
        while ((i >> j) & 1) == 0:
            j += 1
        sign = 1 - 2 * x[j]
        x[j] = 1 - x[j]
        code ^= 1 << j
        cost += sign * costs[j]
        g = group[j]
        if g >= 0:
            if sign > 0:
                if gcount[g] == 0:
                    cost += group_cost[g]
                gcount[g] += 1
            else:
                gcount[g] -= 1
                if gcount[g] == 0:
                    cost -= group_cost[g]
        for r in range(m):
            coef = G[r, j]
            if coef != 0:
                before = act[r] >= h[r]
                act[r] += sign * coef
                after = act[r] >= h[r]
                if before and not after:
                    viol += 1
                elif after and not before:
                    viol -= 1
        if viol == 0:
            if cost < best_cost - 1e-9 or (abs(cost - best_cost) <= 1e-9 and code < best_code):
                best_cost = cost
                best_code = code
    return best_code


def _enumerate_numpy(costs, G, h, group, group_cost, chunk=1 << 15):
    n = costs.shape[0]
    bits = np.arange(n, dtype=np.int64)
    best_cost = np.inf
    best_code = -1
    for start in range(0, 1 << n, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        X = ((codes[:, None] >> bits[None, :]) & 1).astype(np.int64)
        feas = np.all(X @ G.T >= h[None, :], axis=1) if G.shape[0] else np.ones(len(codes), dtype=bool)
        if not feas.any():
            continue
        cost = X @ costs
        if group_cost.shape[0]:
            onehot = np.zeros((n, group_cost.shape[0]))
            member = group >= 0
            onehot[np.flatnonzero(member), group[member]] = 1.0
            cost = cost + ((X @ onehot) > 0) @ group_cost
        cost = np.where(feas, cost, np.inf)
        k = int(np.argmin(cost))  # first minimum -> smallest code within chunk
        if cost[k] < best_cost - 1e-9:
            best_cost = float(cost[k])
            best_code = int(codes[k])
    return best_code


def enumerate_binary(costs, G, h, group=None, group_cost=None, use_numba=None):
    """Exhaustively minimise over x in {0,1}^n subject to ``G x >= h``.

    The objective is ``costs @ x`` plus, for every group g with at least one
    member set, ``group_cost[g]``. Ties are broken toward the assignment with
    the smallest binary code (bit j = x_j). Returns the code, or -1 when no
    assignment is feasible.
    """
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    n = costs.shape[0]
    G = np.ascontiguousarray(G, dtype=np.int64).reshape(-1, n)
    h = np.ascontiguousarray(h, dtype=np.int64)
    if group is None:
        group = np.full(n, -1, dtype=np.int64)
        group_cost = np.zeros(0)
    group = np.ascontiguousarray(group, dtype=np.int64)
    group_cost = np.ascontiguousarray(group_cost, dtype=np.float64)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return int(_enumerate_numba(costs, G, h, group, group_cost))
    return _enumerate_numpy(costs, G, h, group, group_cost)
