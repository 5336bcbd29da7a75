"""Compiled numerical kernels.

Everything latency-critical lives here as nopython numba functions: compensated
cumulative sums, the greedy charging fold, run-structure extrema and the
max-cost-path recursion, and a deterministic bounded-variable primal simplex
with analytic crash bases for both objectives. Public modules wrap these in
typed containers; nothing in here validates inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# simplex return codes
OPTIMAL = 0
ITER_CAP = 1
NUMERIC = 2

# objective codes
OBJ_AVG = 0
OBJ_PEAK = 1


# ---------------------------------------------------------------------------
# summation and cumulative series
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def kahan_cumsum(values):
    """Running partial sums with a leading zero, compensated (Kahan)."""
    n = values.size
    out = np.empty(n + 1, np.float64)
    out[0] = 0.0
    s = 0.0
    comp = 0.0
    for i in range(n):
        y = values[i] - comp
        t = s + y
        comp = (t - s) - y
        s = t
        out[i + 1] = s
    return out


@njit(cache=True, nogil=True)
def kahan_cumsum_pos(values):
    """Like kahan_cumsum but summing only positive entries."""
    n = values.size
    out = np.empty(n + 1, np.float64)
    out[0] = 0.0
    s = 0.0
    comp = 0.0
    for i in range(n):
        v = values[i]
        if v < 0.0:
            v = 0.0
        y = v - comp
        t = s + y
        comp = (t - s) - y
        s = t
        out[i + 1] = s
    return out


@njit(cache=True, nogil=True)
def kahan_total(values):
    s = 0.0
    comp = 0.0
    for i in range(values.size):
        y = values[i] - comp
        t = s + y
        comp = (t - s) - y
        s = t
    return s


# ---------------------------------------------------------------------------
# greedy charging protocol
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def greedy_fold(w, d, B, P, alpha, delta, x0):
    """Fold the greedy step over the series; returns (x, g, l) arrays.

    x has length N+1 with x[0] = x0. Each step clamps the free evolution
    f = alpha*x_prev + (w - d) to the box and rate window, then books the
    residual as peaker draw (deficit) or spilled wind (surplus).
    """
    n = w.size
    dp = delta * P
    x = np.empty(n + 1, np.float64)
    g = np.zeros(n, np.float64)
    l = np.zeros(n, np.float64)
    x[0] = x0
    xp = x0
    for i in range(n):
        ax = alpha * xp
        f = ax + (w[i] - d[i])
        lo = ax - dp
        if lo < 0.0:
            lo = 0.0
        hi = ax + dp
        if hi > B:
            hi = B
        xi = f
        if xi < lo:
            xi = lo
        elif xi > hi:
            xi = hi
        diff = xi - f
        if diff > 0.0:
            g[i] = diff
        elif diff < 0.0:
            l[i] = -diff
        x[i + 1] = xi
        xp = xi
    return x, g, l


@njit(cache=True, nogil=True)
def greedy_totals(w, d, B, P, alpha, delta, x0):
    """Allocation-free greedy pass; returns (total_g, max_g, total_l)."""
    n = w.size
    dp = delta * P
    xp = x0
    tg = 0.0
    cg = 0.0
    tl = 0.0
    cl = 0.0
    mg = 0.0
    for i in range(n):
        ax = alpha * xp
        f = ax + (w[i] - d[i])
        lo = ax - dp
        if lo < 0.0:
            lo = 0.0
        hi = ax + dp
        if hi > B:
            hi = B
        xi = f
        if xi < lo:
            xi = lo
        elif xi > hi:
            xi = hi
        diff = xi - f
        if diff > 0.0:
            y = diff - cg
            t = tg + y
            cg = (t - tg) - y
            tg = t
            if diff > mg:
                mg = diff
        elif diff < 0.0:
            y = -diff - cl
            t = tl + y
            cl = (t - tl) - y
            tl = t
        xp = xi
    return tg, mg, tl


# ---------------------------------------------------------------------------
# run structure: extrema of the cumulative excess demand and the DP bound
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def extrema_kernel(R):
    """Alternating local extrema of R, zero steps absorbed into runs.

    Returns (minima, maxima) position arrays. The endpoints 0 and N are
    always classified; an interior extremum sits at the last index of its
    plateau. For identically flat R the convention is maximum at 0 and
    minimum at N.
    """
    n = R.size - 1
    mins = np.empty(n + 1, np.int64)
    maxs = np.empty(n + 1, np.int64)
    km = 0
    kx = 0
    cur = 0
    for i in range(1, n + 1):
        diff = R[i] - R[i - 1]
        s = 0
        if diff > 0.0:
            s = 1
        elif diff < 0.0:
            s = -1
        if s == 0:
            continue
        if cur == 0:
            if s > 0:
                mins[km] = 0
                km += 1
            else:
                maxs[kx] = 0
                kx += 1
        elif s != cur:
            if cur > 0:
                maxs[kx] = i - 1
                kx += 1
            else:
                mins[km] = i - 1
                km += 1
        cur = s
    if cur > 0:
        maxs[kx] = n
        kx += 1
    elif cur < 0:
        mins[km] = n
        km += 1
    else:
        maxs[kx] = 0
        kx += 1
        mins[km] = n
        km += 1
    return mins[:km].copy(), maxs[:kx].copy()


@njit(cache=True, nogil=True)
def dp_nodes(R, mins, maxs, B, seed):
    """Max-cost-path recursion over maxima; returns (G, pred).

    Node 0 is the source (the maximum at position 0 when one exists there,
    otherwise virtual), nodes 1..L are the remaining maxima in order. Edge
    j -> i costs max(R[m_i] - R[n_j] - B, 0) where n_j is the j-th minimum.
    pred[i] is the argmax j (0 for the source-only path). seed is the
    source's value; chaining a segment's final value into the next
    segment's seed reproduces the unsplit recursion's additions in the
    same order, keeping split and unsplit results bit-identical.
    """
    swm = maxs.size > 0 and maxs[0] == 0
    if swm:
        off = 1
        L = maxs.size - 1
    else:
        off = 0
        L = maxs.size
    G = np.full(L + 1, seed, np.float64)
    pred = np.zeros(L + 1, np.int64)
    for i in range(1, L + 1):
        rmi = R[maxs[off + i - 1]]
        best = seed
        arg = 0
        for j in range(1, i + 1):
            edge = rmi - R[mins[j - 1]] - B
            if edge < 0.0:
                edge = 0.0
            v = G[j - 1] + edge
            if v > best:
                best = v
                arg = j
        G[i] = best
        pred[i] = arg
    return G, pred


@njit(cache=True, nogil=True)
def dp_total(R, mins, maxs, B, seed):
    """Total of the max-cost-path recursion (last node's value)."""
    G, _ = dp_nodes(R, mins, maxs, B, seed)
    return G[G.size - 1]


# ---------------------------------------------------------------------------
# bounded-variable primal simplex
# ---------------------------------------------------------------------------
# Variable status codes: 0 nonbasic at lower bound, 1 nonbasic at upper
# bound, 2 basic, 3 fixed (lb == ub, never priced).

@njit(cache=True, nogil=True)
def _reduced_cost(A, c, y, j, m):
    dj = c[j]
    for k in range(m):
        akj = A[k, j]
        if akj != 0.0:
            dj -= y[k] * akj
    return dj


@njit(cache=True, nogil=True)
def simplex_core(A, b, c, lb, ub, basis, stat, Binv, z, max_iter, dtol):
    """Primal simplex from a feasible basis; mutates state in place.

    Pricing is most-negative reduced cost with lowest-index ties; after 40
    consecutive degenerate pivots it switches to lowest-index (anti-cycling)
    until progress resumes. Returns (code, iterations).
    """
    m, n = A.shape
    piv_tol = 1e-10
    tie_tol = 1e-10
    degen_tol = 1e-12
    it = 0
    stall = 0
    bland = False
    y = np.empty(m, np.float64)
    w = np.empty(m, np.float64)
    nzk = np.empty(m, np.int64)
    while True:
        # dual vector y = c_B' Binv
        for k in range(m):
            y[k] = 0.0
        for i in range(m):
            cb = c[basis[i]]
            if cb != 0.0:
                for k in range(m):
                    y[k] += cb * Binv[i, k]
        # entering variable
        q = -1
        if bland:
            for j in range(n):
                sj = stat[j]
                if sj >= 2:
                    continue
                dj = _reduced_cost(A, c, y, j, m)
                if (sj == 0 and dj < -dtol) or (sj == 1 and dj > dtol):
                    q = j
                    break
        else:
            best = dtol
            for j in range(n):
                sj = stat[j]
                if sj >= 2:
                    continue
                dj = _reduced_cost(A, c, y, j, m)
                viol = -dj if sj == 0 else dj
                if viol > best:
                    best = viol
                    q = j
        if q == -1:
            return OPTIMAL, it
        if it >= max_iter:
            return ITER_CAP, it
        it += 1
        dirn = 1.0 if stat[q] == 0 else -1.0
        # w = Binv @ A[:, q], exploiting column sparsity
        nnz = 0
        for k in range(m):
            if A[k, q] != 0.0:
                nzk[nnz] = k
                nnz += 1
        for i in range(m):
            s = 0.0
            for t in range(nnz):
                k = nzk[t]
                s += Binv[i, k] * A[k, q]
            w[i] = s
        # ratio test: entering moves by theta >= 0 from its bound
        theta = ub[q] - lb[q]
        leave = -1
        leave_to_ub = False
        for i in range(m):
            wi = w[i] * dirn
            bi = basis[i]
            if wi > piv_tol:
                t = (z[bi] - lb[bi]) / wi
                to_ub = False
            elif wi < -piv_tol:
                t = (z[bi] - ub[bi]) / wi
                to_ub = True
            else:
                continue
            if t < 0.0:
                t = 0.0
            if t < theta - tie_tol:
                theta = t
                leave = i
                leave_to_ub = to_ub
            elif t <= theta + tie_tol:
                if leave == -1:
                    if t < theta:
                        theta = t
                    leave = i
                    leave_to_ub = to_ub
                elif bland and bi < basis[leave]:
                    if t < theta:
                        theta = t
                    leave = i
                    leave_to_ub = to_ub
        if leave == -1 and not np.isfinite(theta):
            return NUMERIC, it
        # move the entering variable and shift the basics
        if theta > 0.0:
            z[q] = z[q] + dirn * theta
            for i in range(m):
                if w[i] != 0.0:
                    z[basis[i]] -= dirn * theta * w[i]
        if theta <= degen_tol:
            stall += 1
            if stall >= 40:
                bland = True
        else:
            stall = 0
            bland = False
        if leave == -1:
            # bound flip, basis unchanged
            if stat[q] == 0:
                stat[q] = 1
                z[q] = ub[q]
            else:
                stat[q] = 0
                z[q] = lb[q]
            continue
        lv = basis[leave]
        if leave_to_ub:
            stat[lv] = 1
            z[lv] = ub[lv]
        else:
            stat[lv] = 0
            z[lv] = lb[lv]
        basis[leave] = q
        stat[q] = 2
        piv = w[leave]
        invp = 1.0 / piv
        for k in range(m):
            Binv[leave, k] *= invp
        for i in range(m):
            if i != leave:
                wi = w[i]
                if wi != 0.0:
                    for k in range(m):
                        Binv[i, k] -= wi * Binv[leave, k]


@njit(cache=True, nogil=True)
def refresh_basics(A, b, basis, stat, Binv, z):
    """Recompute basic values z_B = Binv (b - A_N z_N) from scratch."""
    m, n = A.shape
    rhs = b.copy()
    for j in range(n):
        if stat[j] != 2:
            zj = z[j]
            if zj != 0.0:
                for k in range(m):
                    akj = A[k, j]
                    if akj != 0.0:
                        rhs[k] -= akj * zj
    for i in range(m):
        s = 0.0
        for k in range(m):
            bik = Binv[i, k]
            if bik != 0.0:
                s += bik * rhs[k]
        z[basis[i]] = s


@njit(cache=True, nogil=True)
def primal_residual(A, b, z, lb, ub):
    """Max violation of equalities and bounds at z."""
    m, n = A.shape
    res = 0.0
    for k in range(m):
        s = -b[k]
        for j in range(n):
            akj = A[k, j]
            if akj != 0.0:
                s += akj * z[j]
        if abs(s) > res:
            res = abs(s)
    for j in range(n):
        v = lb[j] - z[j]
        if v > res:
            res = v
        v = z[j] - ub[j]
        if v > res:
            res = v
    return res


# ---------------------------------------------------------------------------
# alignment LP: build, crash, solve
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _pow2_scale(r):
    """Power-of-two scale near max|r|; exact to divide by in binary."""
    m = 0.0
    for i in range(r.size):
        a = abs(r[i])
        if a > m:
            m = a
    if m == 0.0 or not np.isfinite(m):
        return 1.0
    return 2.0 ** np.rint(np.log2(m))


@njit(cache=True, nogil=True)
def solve_alignment(r, B, P, alpha, delta, objective):
    """Build and solve the dispatch LP for one (B, P) point.

    Variables are x(0..N), g(1..N), l(1..N) plus slacks (and the peak bound
    t for objective OBJ_PEAK). Rate rows are dropped when delta*P >= B since
    the box on x already implies them. Data is solved at a power-of-two
    scale and unscaled on return.

    Returns (code, iterations, x, g, l, total_g_mwh, peak_step_mwh) with
    arrays in MWh. peak_step_mwh is the certified bound t for the peak
    objective and max(g) otherwise.
    """
    N = r.size
    peak = objective == OBJ_PEAK
    s = _pow2_scale(r)
    rs = r / s
    Bs = B / s
    dPs = delta * P / s
    drop_rate = delta * P >= B
    nrate = 0 if drop_rate else N

    nx = N + 1
    i_g = nx                      # g(1..N) at i_g + n
    i_l = nx + N                  # l(1..N) at i_l + n
    i_t = nx + 2 * N              # peak bound
    n_struct = nx + 2 * N + (1 if peak else 0)
    i_u = n_struct                # rate-up slacks
    i_v = n_struct + nrate        # rate-down slacks
    i_p = n_struct + 2 * nrate    # peak-row slacks
    n = n_struct + 2 * nrate + (N if peak else 0)
    m = N + 2 * nrate + (N if peak else 0)
    r_up = N                      # first rate-up row
    r_dn = N + nrate              # first rate-down row
    r_pk = N + 2 * nrate          # first peak row

    A = np.zeros((m, n), np.float64)
    b = np.zeros(m, np.float64)
    c = np.zeros(n, np.float64)
    lb = np.zeros(n, np.float64)
    ub = np.full(n, np.inf, np.float64)

    for i in range(nx):
        ub[i] = Bs
    if peak:
        c[i_t] = 1.0
    else:
        for k in range(N):
            c[i_g + k] = 1.0

    for k in range(N):
        row = k
        A[row, k + 1] = 1.0
        A[row, k] = -alpha
        A[row, i_g + k] = -1.0
        A[row, i_l + k] = 1.0
        b[row] = -rs[k]
    if nrate > 0:
        for k in range(N):
            A[r_up + k, k + 1] = 1.0
            A[r_up + k, k] = -alpha
            A[r_up + k, i_u + k] = 1.0
            b[r_up + k] = dPs
            A[r_dn + k, k + 1] = -1.0
            A[r_dn + k, k] = alpha
            A[r_dn + k, i_v + k] = 1.0
            b[r_dn + k] = dPs
    if peak:
        for k in range(N):
            A[r_pk + k, i_g + k] = 1.0
            A[r_pk + k, i_t] = -1.0
            A[r_pk + k, i_p + k] = 1.0

    # crash basis: x at zero; per equality row the deficit (g) or surplus
    # (l) absorber is basic, rate slacks basic, and for the peak objective
    # t is basic in the row of the largest starting deficit
    basis = np.empty(m, np.int64)
    stat = np.zeros(n, np.int8)
    z = np.zeros(n, np.float64)
    Binv = np.zeros((m, m), np.float64)
    for j in range(n):
        if ub[j] - lb[j] <= 0.0:
            stat[j] = 3
    nstar = 0
    gmax = 0.0
    for k in range(N):
        if rs[k] > gmax:
            gmax = rs[k]
            nstar = k
    for k in range(N):
        if rs[k] > 0.0:
            basis[k] = i_g + k
            Binv[k, k] = -1.0
            z[i_g + k] = rs[k]
        else:
            basis[k] = i_l + k
            Binv[k, k] = 1.0
            z[i_l + k] = -rs[k]
        stat[basis[k]] = 2
    for k in range(nrate):
        basis[r_up + k] = i_u + k
        Binv[r_up + k, r_up + k] = 1.0
        z[i_u + k] = dPs
        stat[i_u + k] = 2
        basis[r_dn + k] = i_v + k
        Binv[r_dn + k, r_dn + k] = 1.0
        z[i_v + k] = dPs
        stat[i_v + k] = 2
    if peak:
        for k in range(N):
            if k == nstar:
                basis[r_pk + k] = i_t
                stat[i_t] = 2
                z[i_t] = gmax
            else:
                basis[r_pk + k] = i_p + k
                stat[i_p + k] = 2
                z[i_p + k] = gmax - (rs[k] if rs[k] > 0.0 else 0.0)
        # peak blocks of Binv: coupling to the equality rows through the
        # g-basic columns, and the inverse of the p/t block (identity with
        # the nstar column replaced by -1s)
        gstar = 1.0 if rs[nstar] > 0.0 else 0.0
        for k in range(N):
            if k != nstar:
                if rs[k] > 0.0:
                    Binv[r_pk + k, k] = 1.0
                Binv[r_pk + k, r_pk + k] = 1.0
            Binv[r_pk + k, nstar] -= gstar
            Binv[r_pk + k, r_pk + nstar] = -1.0

    max_iter = 50 * n
    code, iters = simplex_core(A, b, c, lb, ub, basis, stat, Binv, z,
                               max_iter, 1e-9)
    refresh_basics(A, b, basis, stat, Binv, z)
    if code == OPTIMAL:
        res = primal_residual(A, b, z, lb, ub)
        if res > 1e-9:
            # refactorize and re-polish once
            M = np.empty((m, m), np.float64)
            for i in range(m):
                for k in range(m):
                    M[k, i] = A[k, basis[i]]
            Binv2 = np.linalg.inv(M)
            for i in range(m):
                for k in range(m):
                    Binv[i, k] = Binv2[i, k]
            refresh_basics(A, b, basis, stat, Binv, z)
            code, it2 = simplex_core(A, b, c, lb, ub, basis, stat, Binv, z,
                                     max_iter, 1e-9)
            iters += it2
            refresh_basics(A, b, basis, stat, Binv, z)
            if code == OPTIMAL and primal_residual(A, b, z, lb, ub) > 1e-9:
                code = NUMERIC

    x = np.empty(N + 1, np.float64)
    g = np.empty(N, np.float64)
    l = np.empty(N, np.float64)
    for i in range(N + 1):
        x[i] = z[i] * s
    for k in range(N):
        g[k] = z[i_g + k] * s
        l[k] = z[i_l + k] * s
    # cancel simultaneous draw and spill (degenerate peak optima); keeps
    # g - l and therefore conservation and x untouched
    for k in range(N):
        mn = g[k] if g[k] < l[k] else l[k]
        if mn > 0.0:
            g[k] -= mn
            l[k] -= mn
    tot = kahan_total(g)
    if peak:
        pk = z[i_t] * s
    else:
        pk = 0.0
        for k in range(N):
            if g[k] > pk:
                pk = g[k]
    return code, iters, x, g, l, tot, pk


# ---------------------------------------------------------------------------
# acceptance drivers: tight loops over many instances
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def cross_engine_sweep(r, delta):
    """LP vs greedy (x0 = B) vs DP over every integer B in [0, max R - min R].

    Lossless, rate-inactive regime (alpha = 1, P = B/delta). Returns
    (points, max_rel_diff, fail_b) where fail_b >= 0 flags a solver failure
    at that B and the relative difference is |a-b| / max(1, |a|, |b|).
    """
    R = kahan_cumsum(r)
    mins, maxs = extrema_kernel(R)
    rmax = 0.0
    rmin = 0.0
    for i in range(R.size):
        if R[i] > rmax:
            rmax = R[i]
        if R[i] < rmin:
            rmin = R[i]
    nb = int(np.rint(rmax - rmin)) + 1
    n = r.size
    w = np.empty(n, np.float64)
    d = np.empty(n, np.float64)
    for i in range(n):
        if r[i] > 0.0:
            d[i] = r[i]
            w[i] = 0.0
        else:
            d[i] = 0.0
            w[i] = -r[i]
    maxrel = 0.0
    for bi in range(nb):
        B = float(bi)
        P = B / delta
        code, _, _, _, _, lp_tot, _ = solve_alignment(r, B, P, 1.0, delta,
                                                      OBJ_AVG)
        if code != OPTIMAL:
            return bi, maxrel, bi
        gr_tot, _, _ = greedy_totals(w, d, B, P, 1.0, delta, B)
        dp_val = dp_total(R, mins, maxs, B, 0.0)
        sc = 1.0
        if abs(lp_tot) > sc:
            sc = abs(lp_tot)
        if abs(gr_tot) > sc:
            sc = abs(gr_tot)
        if abs(dp_val) > sc:
            sc = abs(dp_val)
        d1 = abs(lp_tot - gr_tot) / sc
        d2 = abs(lp_tot - dp_val) / sc
        d3 = abs(gr_tot - dp_val) / sc
        if d1 > maxrel:
            maxrel = d1
        if d2 > maxrel:
            maxrel = d2
        if d3 > maxrel:
            maxrel = d3
    return nb, maxrel, -1


@njit(cache=True, nogil=True)
def exhaustive_dp_lp(N, bmax):
    """DP vs LP total over every r in {-2,-1,1,2}^N and integer B in [0, bmax].

    Returns (pairs, mismatches, max_abs_diff). Equality is exact: the data
    is dyadic at the internal scale so both routes compute in exact binary
    arithmetic.
    """
    vals = np.array([-2.0, -1.0, 1.0, 2.0])
    digits = np.zeros(N, np.int64)
    r = np.empty(N, np.float64)
    total = 4 ** N
    pairs = 0
    mismatches = 0
    maxdiff = 0.0
    for _ in range(total):
        for i in range(N):
            r[i] = vals[digits[i]]
        R = kahan_cumsum(r)
        mins, maxs = extrema_kernel(R)
        for bi in range(bmax + 1):
            B = float(bi)
            dp_val = dp_total(R, mins, maxs, B, 0.0)
            code, _, _, _, _, lp_tot, _ = solve_alignment(r, B, B, 1.0, 1.0,
                                                          OBJ_AVG)
            pairs += 1
            if code != OPTIMAL or lp_tot != dp_val:
                mismatches += 1
                diff = abs(lp_tot - dp_val)
                if diff > maxdiff:
                    maxdiff = diff
        k = 0
        while k < N:
            digits[k] += 1
            if digits[k] < 4:
                break
            digits[k] = 0
            k += 1
    return pairs, mismatches, maxdiff
