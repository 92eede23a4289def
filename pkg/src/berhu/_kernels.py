"""Compiled inner loops.

Everything here works on plain float arrays and integer codes so numba can
compile it; the public modules wrap these with validation and result types.
"""

import math

import numpy as np
from numba import njit

LOSS_LS = 0
LOSS_HUBER = 1

PEN_NONE = 0
PEN_RIDGE = 1
PEN_LASSO = 2
PEN_ENET = 3
PEN_BERHU = 4

STATUS_CONVERGED = 1
STATUS_MAX_SWEEPS = 2

AA_DEPTH = 5


@njit(cache=True)
def berhu(z, L):
    a = abs(z)
    if a <= L:
        return a
    return (z * z + L * L) / (2.0 * L)


@njit(cache=True)
def huber(z, M):
    a = abs(z)
    if a <= M:
        return z * z
    return 2.0 * M * a - M * M


@njit(cache=True)
def huber_deriv(z, M):
    if z > M:
        return 2.0 * M
    if z < -M:
        return -2.0 * M
    return 2.0 * z


# ------------------------------------------------------------ concomitant scans


@njit(cache=True)
def _pow2_scale(a):
    """Power of two near max|a|; dividing by it is exact and keeps squares
    away from underflow and overflow."""
    top = 0.0
    for i in range(a.shape[0]):
        top = max(top, abs(a[i]))
    if top == 0.0 or not np.isfinite(top):
        return 1.0
    _, e = math.frexp(top)
    return math.ldexp(1.0, e)


@njit(cache=True)
def tau_scan(absb, w, L):
    """Exact minimizer of tau -> tau*(sum 1/w + sum w*B_L(b/tau)) over tau >= 0,
    returned as (tau, value). Both scale linearly with |b|, so the scan runs
    on |b| divided by a power of two near its maximum."""
    c = _pow2_scale(absb)
    tau, value = _tau_scan_unit(absb / c, w, L)
    return tau * c, value * c


@njit(cache=True)
def _tau_scan_unit(absb, w, L):
    """Exact minimizer of tau -> tau*(sum 1/w + sum w*B_L(b/tau)) over tau >= 0.

    Returns (tau, value). The derivative in tau is continuous and increasing,
    so walking the breakpoints |b|/L downward finds the unique sign change.
    """
    p = absb.shape[0]
    S = 0.0
    for j in range(p):
        S += 1.0 / w[j]
    order = np.argsort(-absb)
    if p == 0 or absb[order[0]] == 0.0:
        return 0.0, 0.0
    cum_wa2 = 0.0
    cum_w = 0.0
    prev_bp = np.inf
    tau = -1.0
    k = 0
    while k < p:
        a = absb[order[k]]
        if a == 0.0:
            break
        bp = a / L
        # derivative at tau = bp with active set {|b| > L*bp}, times bp^2
        d = (S + 0.5 * L * cum_w) * bp * bp - cum_wa2 / (2.0 * L)
        if d == 0.0:
            tau = bp
            break
        if d < 0.0:
            t2 = cum_wa2 / (2.0 * L * S + L * L * cum_w)
            tau = min(max(np.sqrt(t2), bp), prev_bp)
            break
        # absorb the whole group of ties at this breakpoint
        while k < p and absb[order[k]] == a:
            wj = w[order[k]]
            cum_wa2 += wj * a * a
            cum_w += wj
            k += 1
        prev_bp = bp
    if tau < 0.0:
        t2 = cum_wa2 / (2.0 * L * S + L * L * cum_w)
        tau = min(np.sqrt(t2), prev_bp)
    value = tau * S
    for j in range(p):
        if absb[j] != 0.0:
            value += w[j] * tau * berhu(absb[j] / tau, L)
    return tau, value


@njit(cache=True)
def huber_concomitant_value(r, M, s):
    n = r.shape[0]
    if s == 0.0:
        tot = 0.0
        for i in range(n):
            tot += abs(r[i])
        return 2.0 * M * tot
    # s * H(r / s) without forming r / s, which overflows for tiny s
    tot = n * s
    for i in range(n):
        a = abs(r[i])
        if a <= M * s:
            tot += (a / s) * a
        else:
            tot += 2.0 * M * a - M * M * s
    return tot


@njit(cache=True)
def s_scan(r, M):
    """Exact minimizer of s -> n*s + s*sum H_M(r/s) over s >= 0, returned as
    (s, value); computed on rescaled residuals like ``tau_scan``."""
    c = _pow2_scale(r)
    s, value = _s_scan_unit(r / c, M)
    return s * c, value * c


@njit(cache=True)
def _s_scan_unit(r, M):
    """Exact minimizer of s -> n*s + s*sum H_M(r/s) over s >= 0.

    Returns (s, value); s = 0 is the least-absolute-deviation branch. If the
    minimizer is not unique (a flat stretch, possible when M^2 * k = n for
    an integer k) the largest one is returned.
    """
    n = r.shape[0]
    absr = np.abs(r)
    order = np.argsort(-absr)
    if n == 0 or absr[order[0]] == 0.0:
        return 0.0, 0.0
    # tail[k] = sum of squares of the k-th largest |r| and all smaller ones,
    # accumulated from the small end to avoid cancellation
    tail = np.zeros(n + 1)
    for k in range(n - 1, -1, -1):
        a = absr[order[k]]
        tail[k] = tail[k + 1] + a * a
    cnt = 0
    prev_bp = np.inf
    s = -1.0
    k = 0
    while k < n:
        a = absr[order[k]]
        if a == 0.0:
            break
        bp = a / M
        small = tail[k]
        d = (n - M * M * cnt) * bp * bp - small
        if d == 0.0:
            s = bp
            break
        if d < 0.0:
            den = n - M * M * cnt
            if den > 0.0:
                s = min(max(np.sqrt(small / den), bp), prev_bp)
            else:
                s = bp
            break
        while k < n and absr[order[k]] == a:
            cnt += 1
            k += 1
        prev_bp = bp
    if s < 0.0:
        # below the smallest breakpoint the derivative is n - M^2 * (#nonzero);
        # when it is exactly zero the criterion is flat down to s = 0 and the
        # largest minimizer is returned
        if n - M * M * cnt > 0.0:
            s = 0.0
        else:
            s = prev_bp
    best = huber_concomitant_value(r, M, s)
    # the criterion is convex: neighbouring points guard against rounding in
    # the scan, but only a decrease beyond rounding of the value moves s
    if s > 0.0:
        for cand in (s * (1.0 - 1e-15), s * (1.0 + 1e-15)):
            v = huber_concomitant_value(r, M, cand)
            if v < best - 8.0 * np.finfo(np.float64).eps * best:
                best = v
                s = cand
    return s, best


# ------------------------------------------------------------- penalty pieces


@njit(cache=True)
def berhu_prox(v, step, weight, L, tau):
    """argmin_b (b - v)^2 / 2 + step*weight*tau*B_L(b/tau)."""
    kappa = step * weight
    a = abs(v)
    if a <= kappa:
        return 0.0
    sgn = 1.0 if v > 0 else -1.0
    if a - kappa <= L * tau:
        return sgn * (a - kappa)
    return v / (1.0 + kappa / (L * tau))


@njit(cache=True)
def penalty_value(beta, pen, lam, lam2, w, L, tau):
    p = beta.shape[0]
    if pen == PEN_NONE or lam == 0.0 and lam2 == 0.0:
        return 0.0
    tot = 0.0
    if pen == PEN_RIDGE:
        for j in range(p):
            tot += beta[j] * beta[j]
        return lam * tot
    if pen == PEN_LASSO:
        for j in range(p):
            tot += w[j] * abs(beta[j])
        return lam * tot
    if pen == PEN_ENET:
        sq = 0.0
        for j in range(p):
            tot += w[j] * abs(beta[j])
            sq += beta[j] * beta[j]
        return lam * tot + lam2 * sq
    # BerHu with concomitant tau
    if tau == 0.0:
        for j in range(p):
            if beta[j] != 0.0:
                return np.inf
        return 0.0
    S = 0.0
    for j in range(p):
        S += 1.0 / w[j]
        if beta[j] != 0.0:
            tot += w[j] * tau * berhu(beta[j] / tau, L)
    return lam * (tau * S + tot)


@njit(cache=True)
def loss_value(r, loss, M, s):
    if loss == LOSS_LS:
        tot = 0.0
        for i in range(r.shape[0]):
            tot += r[i] * r[i]
        return tot
    return huber_concomitant_value(r, M, s)


@njit(cache=True)
def slice_params(pen, lam, lam2, wj, L, tau):
    """Penalty restricted to one coordinate b, as kink kappa, ridge q, and an
    extra curvature h beyond threshold T: pen'(b>0) = kappa + 2qb + h*(b-T)+."""
    kappa = 0.0
    q = 0.0
    h = 0.0
    T = np.inf
    if pen == PEN_RIDGE:
        q = lam
    elif pen == PEN_LASSO:
        kappa = lam * wj
    elif pen == PEN_ENET:
        kappa = lam * wj
        q = lam2
    elif pen == PEN_BERHU:
        kappa = lam * wj
        T = L * tau
        h = lam * wj / T
    return kappa, q, h, T


# ------------------------------------------------------- one-dimensional solves


@njit(cache=True)
def _slice_deriv(c, u, sgn, b, s, M, kappa, q, h, T):
    """Right derivative and slope at b > 0 (or at 0+) of the Huber slice in the
    variable b' = sgn*b, i.e. coordinate direction u' = sgn*u."""
    d = kappa + 2.0 * q * b
    slope = 2.0 * q
    if b > T or (b == T and h > 0.0):
        d += h * (b - T)
        slope += h
    inv = 1.0 / s
    thr = M * s
    for i in range(c.shape[0]):
        ui = sgn * u[i]
        if ui == 0.0:
            continue
        e = c[i] - ui * b
        if e > thr:
            d -= ui * 2.0 * M
        elif e < -thr:
            d += ui * 2.0 * M
        else:
            d -= ui * 2.0 * e * inv
            slope += 2.0 * ui * ui * inv
    return d, slope


@njit(cache=True)
def _lad_right_deriv(c, u, sgn, b, M, kappa, q, h, T):
    """Right derivative at b >= 0 of the s = 0 slice in the variable sgn*b."""
    d = kappa + 2.0 * q * b
    if b >= T:
        d += h * (b - T)
    for i in range(c.shape[0]):
        ui = sgn * u[i]
        if ui == 0.0:
            continue
        e = c[i] - ui * b
        if e > 0.0:
            d -= 2.0 * M * ui
        elif e < 0.0:
            d += 2.0 * M * ui
        else:
            d += 2.0 * M * abs(ui)
    return d


@njit(cache=True)
def coord_min_huber(c, u, s, M, kappa, q, h, T, b_init, allow_negative):
    """Minimize b -> s*sum H_M((c - u*b)/s) + pen(b) exactly.

    pen has a kink of half-width kappa at 0, ridge part q*b^2 and an extra
    quadratic h/2*(|b|-T)^2 beyond T. The derivative is monotone and
    piecewise linear in b, so a safeguarded Newton iteration lands on the
    root in a few steps; s == 0 (absolute-deviation loss) uses an exact
    breakpoint search.
    """
    n = c.shape[0]
    if s == 0.0:
        return _coord_min_lad(c, u, M, kappa, q, h, T, allow_negative)
    g0 = 0.0
    for i in range(n):
        g0 += u[i] * huber_deriv(c[i] / s, M)
    # derivative at 0+ is kappa - g0, at 0- is -kappa - g0
    if kappa - g0 >= 0.0 and -kappa - g0 <= 0.0:
        return 0.0
    if kappa - g0 < 0.0:
        sgn = 1.0
    else:
        if not allow_negative:
            return 0.0
        sgn = -1.0
    umax = 0.0
    cmax = 0.0
    for i in range(n):
        umax = max(umax, abs(u[i]))
        cmax = max(cmax, abs(c[i]))
    if umax == 0.0:
        return 0.0
    scale = (cmax + M * s) / umax + 1e-300
    lo = 0.0
    hi = np.inf
    b = sgn * b_init if sgn * b_init > 0.0 else 0.0
    for _ in range(200):
        d, slope = _slice_deriv(c, u, sgn, b, s, M, kappa, q, h, T)
        if d == 0.0:
            return sgn * b
        if d < 0.0:
            lo = b
        else:
            hi = b
        bn = np.nan
        if slope > 0.0:
            bn = b - d / slope
        if not (bn > lo and bn < hi):
            if hi < np.inf:
                bn = 0.5 * (lo + hi)
            else:
                bn = max(2.0 * lo, lo + scale)
        if abs(bn - b) <= 1e-15 * (1.0 + abs(b)) or hi - lo <= 1e-14 * (1.0 + lo):
            b = bn
            break
        b = bn
    return sgn * b


@njit(cache=True)
def _coord_min_lad(c, u, M, kappa, q, h, T, allow_negative):
    """Exact minimizer of 2M sum|c - u b| + pen(b): the right derivative is a
    nondecreasing step-plus-linear function, so binary search over its
    breakpoints locates the interval holding the root."""
    n = c.shape[0]
    for sgn in (1.0, -1.0):
        if sgn < 0.0 and not allow_negative:
            break
        if _lad_right_deriv(c, u, sgn, 0.0, M, kappa, q, h, T) >= 0.0:
            continue
        pts = np.empty(n + 1)
        m = 0
        for i in range(n):
            ui = sgn * u[i]
            if ui != 0.0 and c[i] / ui > 0.0:
                pts[m] = c[i] / ui
                m += 1
        if T > 0.0 and T < np.inf:
            pts[m] = T
            m += 1
        pts = np.sort(pts[:m])
        # first breakpoint with a nonnegative right derivative
        lo_k = 0
        hi_k = m
        while lo_k < hi_k:
            mid = (lo_k + hi_k) // 2
            if _lad_right_deriv(c, u, sgn, pts[mid], M, kappa, q, h, T) >= 0.0:
                hi_k = mid
            else:
                lo_k = mid + 1
        left = pts[lo_k - 1] if lo_k > 0 else 0.0
        if lo_k < m:
            right = pts[lo_k]
            mid_b = 0.5 * (left + right)
        else:
            right = np.inf
            mid_b = left + 1.0
        # the derivative is linear strictly inside (left, right)
        d = _lad_right_deriv(c, u, sgn, mid_b, M, kappa, q, h, T)
        slope = 2.0 * q + (h if mid_b > T else 0.0)
        if slope > 0.0:
            b = mid_b - d / slope
            b = min(max(b, left), right)
        elif d >= 0.0:
            b = left
        else:
            b = right
        return sgn * b
    return 0.0


@njit(cache=True)
def coord_min_ls(v, colsq, pen, lam, lam2, wj, L, tau):
    """Exact minimizer of colsq*(b - v)^2 + pen(b) for one coordinate."""
    if colsq == 0.0:
        return 0.0
    if pen == PEN_NONE:
        return v
    if pen == PEN_RIDGE:
        return colsq * v / (colsq + lam)
    if pen == PEN_LASSO or pen == PEN_ENET:
        k = 0.5 * lam * wj
        a = abs(colsq * v)
        if a <= k:
            return 0.0
        sh = a - k
        if v < 0:
            sh = -sh
        den = colsq + (lam2 if pen == PEN_ENET else 0.0)
        return sh / den
    return berhu_prox(v, lam / (2.0 * colsq), wj, L, tau)


# ----------------------------------------------------------------- gradients


@njit(cache=True)
def loss_grad(X, r, loss, M, s, g):
    """g_j = -d loss / d beta_j; returns -d loss / d alpha."""
    n, p = X.shape
    psi = np.empty(n)
    if loss == LOSS_LS:
        for i in range(n):
            psi[i] = 2.0 * r[i]
    elif s > 0.0:
        for i in range(n):
            psi[i] = huber_deriv(r[i] / s, M)
    else:
        for i in range(n):
            psi[i] = 2.0 * M * (1.0 if r[i] > 0 else (-1.0 if r[i] < 0 else 0.0))
    ga = 0.0
    for i in range(n):
        ga += psi[i]
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * psi[i]
        g[j] = acc
    return ga


@njit(cache=True)
def zero_excess(g, lam, w, L):
    """How far beta = 0 is from optimal for the BerHu penalty, given the
    negative loss gradient g at beta = 0. Positive means a descent direction
    exists and ``_escape`` follows it."""
    S = 0.0
    tot = 0.0
    for j in range(g.shape[0]):
        S += 1.0 / w[j]
        v = abs(g[j]) / (lam * w[j])
        if v > 1.0:
            tot += lam * w[j] * 0.5 * L * (v * v - 1.0)
    return tot - lam * S


@njit(cache=True)
def _interval_gap(lo, hi, a, b):
    """Distance between the intervals [lo, hi] and [a, b]."""
    if hi < a:
        return a - hi
    if lo > b:
        return lo - b
    return 0.0


@njit(cache=True)
def kkt_max(X, y, alpha, beta, s, tau, loss, M, pen, lam, lam2, w, L, r, s_floor=0.0):
    """Largest normalized stationarity residual (stopping rule).

    With the Huber scale at zero the loss is 2M*sum|r|; residuals that are
    (numerically) zero contribute a full subgradient interval, so each
    coordinate is checked against the widened interval.
    """
    n, p = X.shape
    g = np.empty(p)
    rmax = 0.0
    for i in range(n):
        rmax = max(rmax, abs(r[i]))
    ztol = 1e-9 * (1.0 + rmax + np.max(np.abs(y)))
    # a scale below the residual tolerance is the s = 0 branch up to rounding
    lad = loss == LOSS_HUBER and M * s <= ztol
    ga = loss_grad(X, r, loss, M, 0.0 if lad else s, g)
    zmask = np.zeros(n, dtype=np.bool_)
    if lad:
        for i in range(n):
            if abs(r[i]) <= ztol:
                zmask[i] = True
                ga -= 2.0 * M * (1.0 if r[i] > 0 else (-1.0 if r[i] < 0 else 0.0))
        for j in range(p):
            for i in range(n):
                if zmask[i] and r[i] != 0.0:
                    g[j] -= X[i, j] * 2.0 * M * (1.0 if r[i] > 0 else -1.0)
    slack_a = 0.0
    if lad:
        for i in range(n):
            if zmask[i]:
                slack_a += 2.0 * M
    worst = _interval_gap(ga - slack_a, ga + slack_a, 0.0, 0.0)
    if loss == LOSS_HUBER:
        if not lad:
            sc = float(n)
            # H(z) - z H'(z) is -z^2 inside the threshold and -M^2 beyond
            for i in range(n):
                a = abs(r[i])
                if a <= M * s:
                    z = a / s
                    sc -= z * z
                else:
                    sc -= M * M
            if s_floor > 0.0 and s <= s_floor:
                sc = min(sc, 0.0)
            worst = max(worst, abs(sc) / n)
        else:
            nz = 0
            for i in range(n):
                if not zmask[i]:
                    nz += 1
            worst = max(worst, max(0.0, M * M * nz - n) / n)
    S = 0.0
    for j in range(p):
        S += 1.0 / w[j]
    if pen == PEN_BERHU and lam > 0.0 and tau == 0.0:
        ex = zero_excess(g, lam, w, L)
        return max(worst, max(0.0, ex) / (1.0 + lam * S))
    if pen == PEN_BERHU and lam > 0.0:
        sc = 0.0
        for j in range(p):
            z = abs(beta[j]) / tau
            if z > L:
                sc += w[j] * (L * L - z * z) / (2.0 * L)
        worst = max(worst, lam * abs(S + sc) / (1.0 + lam * S))
    for j in range(p):
        kappa, q, h, T = slice_params(pen, lam, lam2, w[j], L, tau if tau > 0 else 1.0)
        slack = 0.0
        if lad:
            for i in range(n):
                if zmask[i]:
                    slack += 2.0 * M * abs(X[i, j])
        b = beta[j]
        ab = abs(b)
        if b == 0.0:
            res = _interval_gap(g[j] - slack, g[j] + slack, -kappa, kappa)
        else:
            d = kappa + 2.0 * q * ab
            if ab > T:
                d += h * (ab - T)
            if b < 0:
                d = -d
            res = _interval_gap(g[j] - slack, g[j] + slack, d, d)
        norm = 1.0 + kappa if pen != PEN_RIDGE else 1.0 + lam
        worst = max(worst, res / norm)
    return worst


# ------------------------------------------------------------ coordinate descent


@njit(cache=True)
def _residuals(X, y, alpha, beta, r):
    n, p = X.shape
    for i in range(n):
        r[i] = y[i] - alpha
    for j in range(p):
        b = beta[j]
        if b != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * b


@njit(cache=True)
def _objective(r, beta, loss, M, s, pen, lam, lam2, w, L, tau):
    return loss_value(r, loss, M, s) + penalty_value(beta, pen, lam, lam2, w, L, tau)


@njit(cache=True)
def _escape(X, r, beta, s, loss, M, lam, w, L, g):
    """From beta = 0, tau = 0 move along the steepest ray (t*d, t) of the
    joint penalty cone with an exact line search. Returns tau (= t)."""
    n, p = X.shape
    d = np.zeros(p)
    S = 0.0
    cpen = 0.0
    for j in range(p):
        S += 1.0 / w[j]
        v = abs(g[j]) / (lam * w[j])
        if v > 1.0:
            d[j] = (L * v) if g[j] > 0 else -(L * v)
            cpen += w[j] * berhu(d[j], L)
    cpen += S
    u = np.zeros(n)
    for j in range(p):
        if d[j] != 0.0:
            for i in range(n):
                u[i] += X[i, j] * d[j]
    if loss == LOSS_LS:
        gd = 0.0
        uu = 0.0
        for i in range(n):
            gd += 2.0 * r[i] * u[i]
            uu += u[i] * u[i]
        if uu == 0.0:
            return 0.0
        t = (gd - lam * cpen) / (2.0 * uu)
    else:
        t = coord_min_huber(r, u, s, M, lam * cpen, 0.0, 0.0, np.inf, 0.0, False)
    if t <= 0.0:
        return 0.0
    for j in range(p):
        beta[j] = t * d[j]
    for i in range(n):
        r[i] -= t * u[i]
    return t


@njit(cache=True)
def _solve_small(A, b):
    """Gaussian elimination with partial pivoting for a tiny dense system.
    Returns False when the matrix is numerically singular."""
    m = A.shape[0]
    for k in range(m):
        piv = k
        for i in range(k + 1, m):
            if abs(A[i, k]) > abs(A[piv, k]):
                piv = i
        if abs(A[piv, k]) < 1e-300:
            return False
        if piv != k:
            for jj in range(m):
                tmp = A[k, jj]
                A[k, jj] = A[piv, jj]
                A[piv, jj] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, m):
            f = A[i, k] / A[k, k]
            for jj in range(k, m):
                A[i, jj] -= f * A[k, jj]
            b[i] -= f * b[k]
    for k in range(m - 1, -1, -1):
        acc = b[k]
        for jj in range(k + 1, m):
            acc -= A[k, jj] * b[jj]
        b[k] = acc / A[k, k]
    return True


@njit(cache=True)
def _anderson_point(hist, head, out):
    """Anderson extrapolation from the last K+1 sweep iterates stored in the
    ring buffer ``hist`` (row ``head`` is the newest). Writes into ``out``."""
    k1, m = hist.shape
    K_ = k1 - 1
    U = np.empty((m, K_))
    for i in range(K_):
        a = (head - K_ + i + k1) % k1
        b = (a + 1) % k1
        for t in range(m):
            U[t, i] = hist[b, t] - hist[a, t]
    G = U.T @ U
    reg = 0.0
    for i in range(K_):
        reg += G[i, i]
    reg = 1e-10 * reg + 1e-300
    for i in range(K_):
        G[i, i] += reg
    z = np.ones(K_)
    if not _solve_small(G, z):
        return False
    tot = 0.0
    for i in range(K_):
        tot += z[i]
    if tot == 0.0 or not np.isfinite(tot):
        return False
    for t in range(m):
        out[t] = 0.0
    for i in range(K_):
        ci = z[i] / tot
        row = (head - K_ + 1 + i + k1) % k1
        for t in range(m):
            out[t] += ci * hist[row, t]
    return True


@njit(cache=True)
def cd_solve(X, y, loss, M, pen, lam, lam2, w, L, beta, state, s_floor,
             max_sweeps, obj_tol, kkt_tol, trace, accelerate=True):
    """Cyclic exact block-coordinate minimization.

    Order per sweep: alpha, beta_1..beta_p, s (Huber), tau (BerHu). Every
    AA_DEPTH sweeps an Anderson-extrapolated (alpha, beta), with s and tau
    re-optimized exactly, replaces the iterate if it has a lower objective,
    so the objective still decreases monotonically.
    ``state`` holds [alpha, s, tau] on entry and is updated in place together
    with ``beta``. Returns (sweeps, status, kkt, monotone).
    """
    n, p = X.shape
    alpha = state[0]
    s = state[1]
    tau = state[2]
    colsq = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * X[i, j]
        colsq[j] = acc
    r = np.empty(n)
    _residuals(X, y, alpha, beta, r)
    g = np.empty(p)
    ones = np.ones(n)
    col = np.empty(n)
    c = np.empty(n)
    berhu_on = pen == PEN_BERHU and lam > 0.0
    if berhu_on:
        tau, _ = tau_scan(np.abs(beta), w, L)
    obj = _objective(r, beta, loss, M, s, pen, lam, lam2, w, L, tau)
    hist = np.zeros((AA_DEPTH + 1, p + 1))
    cand = np.empty(p + 1)
    cand_beta = np.empty(p)
    cand_r = np.empty(n)
    n_hist = 0
    monotone = True
    status = STATUS_MAX_SWEEPS
    kkt = np.inf
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        # intercept
        if loss == LOSS_LS:
            m = 0.0
            for i in range(n):
                m += r[i]
            delta = m / n
        else:
            delta = coord_min_huber(r, ones, s, M, 0.0, 0.0, 0.0, np.inf, 0.0, True)
        if delta != 0.0:
            alpha += delta
            for i in range(n):
                r[i] -= delta
        # coefficients
        if berhu_on and tau == 0.0:
            loss_grad(X, r, loss, M, s, g)
            if zero_excess(g, lam, w, L) > 0.0:
                tau = _escape(X, r, beta, s, loss, M, lam, w, L, g)
        else:
            for j in range(p):
                bj = beta[j]
                if loss == LOSS_LS:
                    acc = 0.0
                    for i in range(n):
                        acc += X[i, j] * r[i]
                    v = bj + acc / colsq[j] if colsq[j] > 0.0 else 0.0
                    nb = coord_min_ls(v, colsq[j], pen, lam, lam2, w[j], L, tau)
                else:
                    for i in range(n):
                        col[i] = X[i, j]
                        c[i] = r[i] + col[i] * bj
                    kappa, q, h, T = slice_params(pen, lam, lam2, w[j], L, tau)
                    nb = coord_min_huber(c, col, s, M, kappa, q, h, T, bj, True)
                if nb != bj:
                    dlt = nb - bj
                    for i in range(n):
                        r[i] -= X[i, j] * dlt
                    beta[j] = nb
        # scales
        if loss == LOSS_HUBER:
            s, _ = s_scan(r, M)
            if s < s_floor:
                s = s_floor
        if berhu_on:
            tau, _ = tau_scan(np.abs(beta), w, L)
        # safeguarded Anderson extrapolation over the last sweeps
        slot = n_hist % (AA_DEPTH + 1)
        hist[slot, 0] = alpha
        for j in range(p):
            hist[slot, j + 1] = beta[j]
        n_hist += 1
        if accelerate and n_hist > AA_DEPTH and n_hist % AA_DEPTH == 0:
            if _anderson_point(hist, slot, cand):
                cur = _objective(r, beta, loss, M, s, pen, lam, lam2, w, L, tau)
                for j in range(p):
                    cand_beta[j] = cand[j + 1]
                _residuals(X, y, cand[0], cand_beta, cand_r)
                cs = s
                if loss == LOSS_HUBER:
                    cs, _ = s_scan(cand_r, M)
                    if cs < s_floor:
                        cs = s_floor
                ct = tau
                if berhu_on:
                    ct, _ = tau_scan(np.abs(cand_beta), w, L)
                cobj = _objective(cand_r, cand_beta, loss, M, cs, pen, lam, lam2, w, L, ct)
                if cobj < cur:
                    alpha = cand[0]
                    for j in range(p):
                        beta[j] = cand_beta[j]
                    for i in range(n):
                        r[i] = cand_r[i]
                    s = cs
                    tau = ct
                    hist[slot, 0] = alpha
                    for j in range(p):
                        hist[slot, j + 1] = beta[j]
        # the point beta = 0, tau = 0 is a corner that sweeps only approach
        # geometrically; try it directly every few sweeps
        if berhu_on and tau > 0.0 and n_hist % AA_DEPTH == 0:
            for j in range(p):
                cand_beta[j] = 0.0
            _residuals(X, y, alpha, cand_beta, cand_r)
            cs = s
            if loss == LOSS_HUBER:
                cs, _ = s_scan(cand_r, M)
                if cs < s_floor:
                    cs = s_floor
            cobj = _objective(cand_r, cand_beta, loss, M, cs, pen, lam, lam2, w, L, 0.0)
            if cobj < _objective(r, beta, loss, M, s, pen, lam, lam2, w, L, tau):
                for j in range(p):
                    beta[j] = 0.0
                for i in range(n):
                    r[i] = cand_r[i]
                s = cs
                tau = 0.0
        if sweep % 64 == 63:
            _residuals(X, y, alpha, beta, r)
        new_obj = _objective(r, beta, loss, M, s, pen, lam, lam2, w, L, tau)
        trace[sweep] = new_obj
        if new_obj > obj + 1e-11 * (1.0 + abs(obj)):
            monotone = False
        decrease = obj - new_obj
        obj = new_obj
        if decrease <= obj_tol * (1.0 + abs(obj)):
            _residuals(X, y, alpha, beta, r)
            kkt = kkt_max(X, y, alpha, beta, s, tau, loss, M, pen, lam, lam2, w, L, r, s_floor)
            if kkt <= kkt_tol:
                status = STATUS_CONVERGED
                break
    if status != STATUS_CONVERGED:
        _residuals(X, y, alpha, beta, r)
        kkt = kkt_max(X, y, alpha, beta, s, tau, loss, M, pen, lam, lam2, w, L, r, s_floor)
    state[0] = alpha
    state[1] = s
    state[2] = tau
    return sweeps, status, kkt, monotone
