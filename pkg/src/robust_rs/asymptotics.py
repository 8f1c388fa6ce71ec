"""Large-deviation rates, optimality conditions and the optimal allocation ratios.

The optimal ratios maximize ``min_{l,i} G(l, i)`` over the simplex, where

    G(l, i) = gap(l, i)**2 / (2 * (var[b, l] / a[b, l] + var[i, d_i] / a[i, d_i]))

Stationarity of this max-min problem gives the three balance conditions checked
by :func:`optimality_residuals`: equal minimum rate across best-side scenarios,
equal minimum rate across competitors, and

    sum_l a[b, l]**2 / var[b, l] == sum_i a[i, d_i]**2 / var[i, d_i].

Solver
------
Writing ``x_l = var[b, l] / a[b, l]`` and ``y_i = var[i, d_i] / a[i, d_i]`` the
problem becomes ``min sum p/x + sum q/y`` subject to ``x_l + y_i <= gap**2``,
a convex program over a bipartite graph. At the optimum the tight constraints
form a forest; on a known forest every node value is affine in one scalar per
tree, fixed by that tree's balance equation. ``_forest_solve`` does that exactly
and verifies the KKT conditions. A log-barrier method supplies the forest when
no valid one is known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .problem import DegenerateStateError, PosteriorState, Ranking, compute_ranking

RESIDUAL_TOL = 1e-8
MAX_ITER = 100_000
REPAIR_TRIES = 4

EXACT = 0
APPROXIMATE = 1
DEGENERATE = 2


class NonConvergenceError(RuntimeError):
    """Solver gave up; carries the best iterate and its residuals."""

    def __init__(self, message, ratios=None, residuals=None):
        super().__init__(message)
        self.ratios = ratios
        self.residuals = residuals


@dataclass(frozen=True)
class AllocationRatios:
    """Budget shares alpha[k][m] supported on the candidate set ``omega``."""

    alpha: np.ndarray
    omega: np.ndarray
    off_omega: float = 0.0

    def on_omega(self) -> np.ndarray:
        return self.alpha[self.omega]


def g_function(gap: float, var1: float, var2: float, a1: float, a2: float) -> float:
    """Large-deviation rate of one best-vs-competitor comparison."""
    if not (a1 > 0 and a2 > 0):
        raise ValueError("allocation ratios must be positive")
    return gap * gap / (2.0 * (var1 / a1 + var2 / a2))


def omega_from_ranking(ranking: Ranking, m: int) -> np.ndarray:
    k = len(ranking.worst_scenario)
    mask = np.zeros((k, m), dtype=bool)
    mask[ranking.best, :] = True
    for i in range(k):
        if i != ranking.best:
            mask[i, ranking.worst_scenario[i]] = True
    return mask


def rate_matrix(alpha, means, variances, ranking: Ranking) -> np.ndarray:
    """G[l, c] for best-side scenario l and the c-th competitor (ascending index)."""
    alpha = np.asarray(alpha, dtype=float)
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    b = ranking.best
    comps = [i for i in range(means.shape[0]) if i != b]
    w = np.asarray(ranking.worst_scenario)[comps]
    gap = means[b, :, None] - means[comps, w][None, :]
    a_c = alpha[comps, w]
    if np.any(alpha[b] <= 0) or np.any(a_c <= 0):
        raise DegenerateStateError("zero allocation ratio on a candidate pair")
    noise = variances[b, :, None] / alpha[b, :, None] + (variances[comps, w] / a_c)[None, :]
    return gap**2 / (2.0 * noise)


def _spread(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    worst = 0.0
    for a in range(values.size):
        for b in range(a + 1, values.size):
            mid = 0.5 * (values[a] + values[b])
            diff = abs(values[a] - values[b])
            if diff > 0:
                worst = max(worst, diff / mid if mid > 0 else np.inf)
    return worst


def optimality_residuals(ratios, means, variances, ranking: Ranking) -> tuple[float, float, float]:
    """Relative violations of the three balance conditions, in this order:

    spread across best-side scenarios of the per-scenario minimum rate;
    spread across competitors of the per-competitor minimum rate;
    relative gap between the two sums of squared ratio over variance.
    """
    alpha = ratios.alpha if isinstance(ratios, AllocationRatios) else np.asarray(ratios, dtype=float)
    variances = np.asarray(variances, dtype=float)
    g = rate_matrix(alpha, means, variances, ranking)
    scenario_spread = _spread(g.min(axis=1))
    competitor_spread = _spread(g.min(axis=0))
    b = ranking.best
    comps = [i for i in range(alpha.shape[0]) if i != b]
    w = np.asarray(ranking.worst_scenario)[comps]
    lhs = float(np.sum(alpha[b] ** 2 / variances[b]))
    rhs = float(np.sum(alpha[comps, w] ** 2 / variances[comps, w]))
    sum_gap = abs(lhs - rhs) / max(lhs, rhs)
    return scenario_spread, competitor_spread, sum_gap


# ----------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True)
def _reduced_problem(means, var, best, worst):
    k, m = means.shape
    nc = k - 1
    comps = np.empty(nc, dtype=np.int64)
    c = 0
    for i in range(k):
        if i != best:
            comps[c] = i
            c += 1
    p = np.empty(m)
    q = np.empty(nc)
    gap2 = np.empty((m, nc))
    for l in range(m):
        p[l] = var[best, l]
    for c in range(nc):
        i = comps[c]
        q[c] = var[i, worst[i]]
        for l in range(m):
            g = means[best, l] - means[i, worst[i]]
            gap2[l, c] = g * g
    return comps, p, q, gap2


@njit(cache=True, nogil=True)
def _balance_root(lo, hi, nodes, const, p, q, m):
    # h(s) = sum_L p/(c - s)^2 - sum_I q/(c + s)^2 is increasing on (lo, hi)
    a = lo
    b = hi
    s = 0.5 * (a + b)
    for _ in range(400):
        h = 0.0
        dh = 0.0
        scale = 0.0
        for u in nodes:
            if u < m:
                z = const[u] - s
                t = p[u] / (z * z)
                h += t
                dh += 2.0 * t / z
            else:
                z = const[u] + s
                t = q[u - m] / (z * z)
                h -= t
                dh += 2.0 * t / z
            scale += t
        if h > 0:
            b = s
        elif h < 0:
            a = s
        else:
            return s
        if abs(h) <= 1e-15 * scale:
            return s
        sn = s - h / dh
        if not (a < sn < b):
            sn = 0.5 * (a + b)
        if sn == s or b - a <= 1e-16 * (abs(a) + abs(b)):
            return s
        s = sn
    return s


@njit(cache=True, nogil=True)
def _forest_solve(p, q, gap2, edge):
    """Exact optimum for a given set of tight edges, or ok=False if that set
    is not a forest or violates the KKT conditions.

    Each tree is first rooted at an I-node; if the checks fail, it is re-rooted
    at its smallest node, which avoids cancellation on near-tied pairs.
    """
    m, nc = gap2.shape
    n = m + nc
    roots = np.empty(n, dtype=np.int64)
    for u in range(nc):
        roots[u] = m + u
    for u in range(m):
        roots[nc + u] = u
    ok, x, y = _forest_solve_rooted(p, q, gap2, edge, roots)
    if ok:
        return ok, x, y
    vals = np.concatenate((x, y))
    if not np.all(vals > 0):
        return ok, x, y
    perm = np.argsort(vals)
    return _forest_solve_rooted(p, q, gap2, edge, perm)


@njit(cache=True, nogil=True)
def _forest_solve_rooted(p, q, gap2, edge, roots):
    m, nc = gap2.shape
    n = m + nc
    x = np.zeros(m)
    y = np.zeros(nc)
    visited = np.zeros(n, dtype=np.bool_)
    parent = np.full(n, -1, dtype=np.int64)
    const = np.zeros(n)
    order = np.empty(n, dtype=np.int64)
    pos = 0
    balanced = True
    for root in roots:
        if visited[root]:
            continue
        start = pos
        visited[root] = True
        order[pos] = root
        pos += 1
        head = start
        while head < pos:
            u = order[head]
            head += 1
            if u < m:
                for c in range(nc):
                    if edge[u, c]:
                        v = m + c
                        if v == parent[u]:
                            continue
                        if visited[v]:
                            return False, x, y
                        visited[v] = True
                        parent[v] = u
                        const[v] = gap2[u, c] - const[u]
                        order[pos] = v
                        pos += 1
            else:
                c = u - m
                for l in range(m):
                    if edge[l, c]:
                        if l == parent[u]:
                            continue
                        if visited[l]:
                            return False, x, y
                        visited[l] = True
                        parent[l] = u
                        const[l] = gap2[l, c] - const[u]
                        order[pos] = l
                        pos += 1
        nodes = order[start:pos]
        lo = -np.inf
        hi = np.inf
        for u in nodes:
            if u < m:
                hi = min(hi, const[u])
            else:
                lo = max(lo, -const[u])
        if not (lo < hi) or hi == np.inf:
            return False, x, y
        s = _balance_root(lo, hi, nodes, const, p, q, m)
        scale = 0.0
        rem = np.empty(nodes.size)
        for idx in range(nodes.size):
            u = nodes[idx]
            if u < m:
                x[u] = const[u] - s
                if not x[u] > 0:
                    return False, x, y
                rem[idx] = p[u] / (x[u] * x[u])
            else:
                y[u - m] = const[u] + s
                if not y[u - m] > 0:
                    return False, x, y
                rem[idx] = q[u - m] / (y[u - m] * y[u - m])
            scale += rem[idx]
        # peel leaves: the edge to the parent carries the node's residual demand
        local = np.full(n, -1, dtype=np.int64)
        for idx in range(nodes.size):
            local[nodes[idx]] = idx
        for idx in range(nodes.size - 1, 0, -1):
            flow = rem[idx]
            if flow < -1e-10 * scale:
                balanced = False
            rem[local[parent[nodes[idx]]]] -= flow
        if abs(rem[0]) > 1e-9 * scale:
            balanced = False
    if pos < n or not balanced:
        return False, x, y
    tol = 1e-12 * gap2.max()
    for l in range(m):
        for c in range(nc):
            if not edge[l, c] and x[l] + y[c] > gap2[l, c] + tol:
                return False, x, y
    return True, x, y


@njit(cache=True, nogil=True)
def _barrier_objective(v, t, p, q, gap2, m):
    nc = q.size
    f = 0.0
    for l in range(m):
        if v[l] <= 0:
            return np.inf
        f += t * p[l] / v[l] - np.log(v[l])
    for c in range(nc):
        if v[m + c] <= 0:
            return np.inf
        f += t * q[c] / v[m + c] - np.log(v[m + c])
    for l in range(m):
        for c in range(nc):
            s = gap2[l, c] - v[l] - v[m + c]
            if s <= 0:
                return np.inf
            f -= np.log(s)
    return f


@njit(cache=True, nogil=True)
def _barrier_solve(p, q, gap2, rel_gap, max_iter):
    """Log-barrier Newton method; returns (x, y, dual weights, iterations)."""
    m, nc = gap2.shape
    n = m + nc
    ne = m * nc
    v = np.empty(n)
    for l in range(m):
        v[l] = 0.45 * gap2[l, :].min()
    for c in range(nc):
        v[m + c] = 0.45 * gap2[:, c].min()
    obj = 0.0
    for l in range(m):
        obj += p[l] / v[l]
    for c in range(nc):
        obj += q[c] / v[m + c]
    t = (ne + n) / obj
    grad = np.empty(n)
    hess = np.empty((n, n))
    iters = 0
    while iters < max_iter:
        for _ in range(100):
            iters += 1
            grad[:] = 0.0
            hess[:, :] = 0.0
            for l in range(m):
                xl = v[l]
                grad[l] = -t * p[l] / (xl * xl) - 1.0 / xl
                hess[l, l] = 2.0 * t * p[l] / (xl * xl * xl) + 1.0 / (xl * xl)
            for c in range(nc):
                yc = v[m + c]
                grad[m + c] = -t * q[c] / (yc * yc) - 1.0 / yc
                hess[m + c, m + c] = 2.0 * t * q[c] / (yc * yc * yc) + 1.0 / (yc * yc)
            for l in range(m):
                for c in range(nc):
                    s = gap2[l, c] - v[l] - v[m + c]
                    g1 = 1.0 / s
                    g2 = g1 * g1
                    grad[l] += g1
                    grad[m + c] += g1
                    hess[l, l] += g2
                    hess[m + c, m + c] += g2
                    hess[l, m + c] += g2
                    hess[m + c, l] += g2
            step = np.linalg.solve(hess, -grad)
            dec = -np.dot(grad, step)
            if dec < 1e-10:
                break
            f0 = _barrier_objective(v, t, p, q, gap2, m)
            alpha = 1.0
            while alpha > 1e-12:
                f1 = _barrier_objective(v + alpha * step, t, p, q, gap2, m)
                if f1 <= f0 - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            if alpha <= 1e-12:
                break
            v += alpha * step
        obj = 0.0
        for l in range(m):
            obj += p[l] / v[l]
        for c in range(nc):
            obj += q[c] / v[m + c]
        if (ne + n) / t <= rel_gap * obj:
            break
        t *= 20.0
    w = np.empty((m, nc))
    for l in range(m):
        for c in range(nc):
            w[l, c] = 1.0 / (t * (gap2[l, c] - v[l] - v[m + c]))
    return v[:m].copy(), v[m:].copy(), w, iters


@njit(cache=True, nogil=True)
def _gauss_solve(a, b):
    """Gaussian elimination with partial pivoting; ok=False on a zero pivot."""
    n = b.size
    a = a.copy()
    x = b.copy()
    for col in range(n):
        piv = col
        for r in range(col + 1, n):
            if abs(a[r, col]) > abs(a[piv, col]):
                piv = r
        if not abs(a[piv, col]) > 0.0:
            return False, x
        if piv != col:
            for j in range(n):
                a[col, j], a[piv, j] = a[piv, j], a[col, j]
            x[col], x[piv] = x[piv], x[col]
        for r in range(col + 1, n):
            f = a[r, col] / a[col, col]
            if f != 0.0:
                for j in range(col, n):
                    a[r, j] -= f * a[col, j]
                x[r] -= f * x[col]
    for col in range(n - 1, -1, -1):
        acc = x[col]
        for j in range(col + 1, n):
            acc -= a[col, j] * x[j]
        x[col] = acc / a[col, col]
    return np.all(np.isfinite(x)), x


@njit(cache=True, nogil=True)
def _pd_solve(p, q, gap2, tol, max_iter):
    """Primal-dual interior point method; returns (x, y, edge duals, iterations)."""
    m, nc = gap2.shape
    n = m + nc
    ne = m * nc
    v = np.empty(n)
    for l in range(m):
        v[l] = 0.45 * gap2[l, :].min()
    for c in range(nc):
        v[m + c] = 0.45 * gap2[:, c].min()
    slack = np.empty((m, nc))
    lam = np.empty((m, nc))
    grad = np.empty(n)
    rhs = np.empty(n)
    hess = np.empty((n, n))
    obj = 0.0
    for l in range(m):
        obj += p[l] / v[l]
    for c in range(nc):
        obj += q[c] / v[m + c]
    for l in range(m):
        for c in range(nc):
            slack[l, c] = gap2[l, c] - v[l] - v[m + c]
            lam[l, c] = obj / (ne * slack[l, c])
    iters = 0
    while iters < max_iter:
        iters += 1
        gap_sum = 0.0
        for l in range(m):
            for c in range(nc):
                gap_sum += lam[l, c] * slack[l, c]
        mu = gap_sum / ne
        obj = 0.0
        for l in range(m):
            grad[l] = -p[l] / (v[l] * v[l])
            obj += p[l] / v[l]
        for c in range(nc):
            grad[m + c] = -q[c] / (v[m + c] * v[m + c])
            obj += q[c] / v[m + c]
        # per-node stationarity and complementarity, relative to the node's
        # own demand so that nodes of very different scale all converge
        done = True
        for u in range(n):
            r = grad[u]
            comp = 0.0
            if u < m:
                for c in range(nc):
                    r += lam[u, c]
                    comp += lam[u, c] * slack[u, c]
            else:
                for l in range(m):
                    r += lam[l, u - m]
                    comp += lam[l, u - m] * slack[l, u - m]
            if abs(r) > tol * abs(grad[u]) or comp > tol * abs(grad[u]) * v[u]:
                done = False
                break
        if done:
            break
        tau = 0.1 * mu
        hess[:, :] = 0.0
        for l in range(m):
            hess[l, l] = 2.0 * p[l] / (v[l] * v[l] * v[l])
            rhs[l] = -grad[l]
        for c in range(nc):
            yc = v[m + c]
            hess[m + c, m + c] = 2.0 * q[c] / (yc * yc * yc)
            rhs[m + c] = -grad[m + c]
        rp = np.empty((m, nc))
        for l in range(m):
            for c in range(nc):
                # slack is carried as its own variable; rp is its roundoff drift
                rp[l, c] = gap2[l, c] - v[l] - v[m + c] - slack[l, c]
                dw = lam[l, c] / slack[l, c]
                hess[l, l] += dw
                hess[m + c, m + c] += dw
                hess[l, m + c] += dw
                hess[m + c, l] += dw
                g1 = (tau - lam[l, c] * rp[l, c]) / slack[l, c]
                rhs[l] -= g1
                rhs[m + c] -= g1
        ok, dv = _gauss_solve(hess, rhs)
        if not ok:
            break
        # step to boundary for x, y > 0, slack > 0, lam > 0
        step = 1.0
        for u in range(n):
            if dv[u] < 0:
                step = min(step, -0.99 * v[u] / dv[u])
        ds = np.empty((m, nc))
        dlam = np.empty((m, nc))
        for l in range(m):
            for c in range(nc):
                ds[l, c] = rp[l, c] - dv[l] - dv[m + c]
                if ds[l, c] < 0:
                    step = min(step, -0.99 * slack[l, c] / ds[l, c])
                dlam[l, c] = (tau - lam[l, c] * slack[l, c] - lam[l, c] * ds[l, c]) / slack[l, c]
                if dlam[l, c] < 0:
                    step = min(step, -0.99 * lam[l, c] / dlam[l, c])
        if not step > 0.0:
            break
        v += step * dv
        slack += step * ds
        lam += step * dlam
    return v[:m].copy(), v[m:].copy(), lam, iters


@njit(cache=True, nogil=True)
def _find(root, a):
    while root[a] != a:
        a = root[a]
    return a


@njit(cache=True, nogil=True)
def _forest_from_duals(x, y, w, gap2):
    """Greedy forest over the (nearly) tight edges from an interior iterate.

    Edge weight is its dual relative to the smaller total dual of its two end
    nodes, so that nodes of very different scale are treated alike. A node left
    uncovered is attached through its tightest edge.
    """
    m, nc = w.shape
    n = m + nc
    demand = np.zeros(n)
    for l in range(m):
        for c in range(nc):
            demand[l] += w[l, c]
            demand[m + c] += w[l, c]
    rel = np.empty((m, nc))
    for l in range(m):
        for c in range(nc):
            rel[l, c] = w[l, c] / max(min(demand[l], demand[m + c]), 1e-300)
    root = np.arange(n)
    edge = np.zeros((m, nc), dtype=np.bool_)
    covered = np.zeros(n, dtype=np.bool_)
    flat = np.argsort(-rel.ravel())
    for e in flat:
        l = e // nc
        c = e % nc
        tight = gap2[l, c] - x[l] - y[c] <= 1e-6 * gap2[l, c]
        if rel[l, c] < 1e-6 and not tight:
            continue
        a = _find(root, l)
        b = _find(root, m + c)
        if a != b:
            root[a] = b
            edge[l, c] = True
            covered[l] = True
            covered[m + c] = True
    for u in range(n):
        if covered[u]:
            continue
        best_j = 0
        best_slack = np.inf
        if u < m:
            for c in range(nc):
                sl = (gap2[u, c] - x[u] - y[c]) / gap2[u, c]
                if sl < best_slack:
                    best_slack = sl
                    best_j = c
            a = _find(root, u)
            b = _find(root, m + best_j)
            if a != b:
                root[a] = b
            edge[u, best_j] = True
        else:
            for l in range(m):
                sl = (gap2[l, u - m] - x[l] - y[u - m]) / gap2[l, u - m]
                if sl < best_slack:
                    best_slack = sl
                    best_j = l
            a = _find(root, u)
            b = _find(root, best_j)
            if a != b:
                root[a] = b
            edge[best_j, u - m] = True
    return edge


@njit(cache=True, nogil=True)
def _solve_from_duals(p, q, gap2, x, y, w):
    """Forest solve on the edges suggested by an interior iterate. Near a
    degenerate optimum an edge can look tight while carrying no flow, so on
    failure the weakest few edges are dropped one at a time."""
    edge = _forest_from_duals(x, y, w, gap2)
    ok, xf, yf = _forest_solve(p, q, gap2, edge)
    if ok:
        return ok, xf, yf, edge
    m, nc = gap2.shape
    weight = np.full(m * nc, np.inf)
    for l in range(m):
        for c in range(nc):
            if edge[l, c]:
                weight[l * nc + c] = w[l, c] / max(w[l, :].sum(), w[:, c].sum())
    order = np.argsort(weight)
    for idx in range(min(REPAIR_TRIES, order.size)):
        e = order[idx]
        if weight[e] == np.inf:
            break
        l = e // nc
        c = e % nc
        edge[l, c] = False
        ok, xf, yf = _forest_solve(p, q, gap2, edge)
        if ok:
            return ok, xf, yf, edge
        edge[l, c] = True
    return False, x, y, edge


@njit(cache=True, nogil=True)
def optimal_ratios_kernel(means, var, best, worst, warm, use_warm, max_iter):
    """Return (status, alpha[k, m], tight-edge matrix[m, k]).

    ``warm`` is a tight-edge matrix indexed by (best-side scenario, alternative)
    from an earlier solve; it is tried before the interior point methods.
    """
    k, m = means.shape
    alpha = np.zeros((k, m))
    edges_out = np.zeros((m, k), dtype=np.bool_)
    comps, p, q, gap2 = _reduced_problem(means, var, best, worst)
    nc = comps.size
    if nc == 0 or gap2.min() <= 0.0:
        return DEGENERATE, alpha, edges_out
    gscale = gap2.max()
    vscale = max(p.max(), q.max())
    gap2 = gap2 / gscale
    p = p / vscale
    q = q / vscale
    ok = False
    x = np.empty(m)
    y = np.empty(nc)
    edge = np.zeros((m, nc), dtype=np.bool_)
    if use_warm:
        for c in range(nc):
            for l in range(m):
                edge[l, c] = warm[l, comps[c]]
        ok, x, y = _forest_solve(p, q, gap2, edge)
    status = EXACT
    if not ok:
        x, y, w, _ = _pd_solve(p, q, gap2, 1e-9, 100)
        ok, x, y, edge = _solve_from_duals(p, q, gap2, x, y, w)
    tol = 1e-8
    while not ok and tol >= 1e-13:
        x, y, w, _ = _barrier_solve(p, q, gap2, tol, max_iter)
        ok, x, y, edge = _solve_from_duals(p, q, gap2, x, y, w)
        tol *= 1e-5
    if not ok:
        status = APPROXIMATE
    total = 0.0
    for l in range(m):
        alpha[best, l] = p[l] / x[l]
        total += alpha[best, l]
    for c in range(nc):
        i = comps[c]
        alpha[i, worst[i]] = q[c] / y[c]
        total += alpha[i, worst[i]]
    alpha /= total
    for c in range(nc):
        for l in range(m):
            edges_out[l, comps[c]] = edge[l, c]
    return status, alpha, edges_out


# ----------------------------------------------------------------------------
# public API


def solve_optimal_ratios(means, variances, ranking: Ranking) -> AllocationRatios:
    """Optimal budget shares for plug-in means and variances.

    ``ranking`` fixes the best alternative and each competitor's worst
    scenario. Raises :class:`NonConvergenceError` if the balance residuals of
    the returned point exceed ``RESIDUAL_TOL``.
    """
    means = np.ascontiguousarray(means, dtype=float)
    variances = np.ascontiguousarray(variances, dtype=float)
    k, m = means.shape
    if k < 2:
        raise DegenerateStateError("optimal ratios need k >= 2")
    worst = np.asarray(ranking.worst_scenario, dtype=np.int64)
    status, alpha, _ = optimal_ratios_kernel(
        means, variances, ranking.best, worst, np.zeros((m, k), dtype=np.bool_), False, MAX_ITER
    )
    if status == DEGENERATE:
        raise DegenerateStateError("zero worst-case gap between the best and a competitor")
    ratios = AllocationRatios(alpha, omega_from_ranking(ranking, m))
    res = optimality_residuals(ratios, means, variances, ranking)
    if max(res) >= RESIDUAL_TOL:
        raise NonConvergenceError(f"residuals {res} above {RESIDUAL_TOL}", ratios, res)
    return ratios


def empirical_ratios(state: PosteriorState, ranking: Ranking | None = None) -> AllocationRatios:
    """Observed shares count / t restricted to the candidate set of ``ranking``
    (the posterior ranking by default); mass elsewhere goes to ``off_omega``."""
    if state.total_steps < 1:
        raise DegenerateStateError("no observations yet")
    if ranking is None:
        ranking = compute_ranking(state)
    full = state.count / state.total_steps
    omega = omega_from_ranking(ranking, state.shape[1])
    return AllocationRatios(np.where(omega, full, 0.0), omega, float(full[~omega].sum()))
