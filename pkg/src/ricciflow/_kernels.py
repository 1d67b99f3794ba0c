"""Compiled per-node kernels for lattice metrics.

Each kernel factory closes over the dimension so numba sees every tensor
loop with compile-time bounds and unrolls them; that, plus fusing the whole
per-node computation (inverse, stencils, connection, contraction) into one
pass, is what makes ten-thousand-step runs affordable on one core. Kernels
are memoized per dimension for the life of the process; closure-generated
dispatchers cannot use numba's on-disk cache, so callers should warm them
once before timing anything.

Index conventions used throughout: ``g`` is (nodes, n, n) row-major,
``ip``/``im`` are (nodes, n) flat indices of the forward/backward lattice
neighbors along each axis, and all derivative stencils are second-order
central differences on the periodic lattice.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_RHS_CACHE: dict = {}
_BUNDLE_CACHE: dict = {}
_GATE_CACHE: dict = {}


def get_rhs_kernel(n: int):
    """Fused evolution right-hand side: -2 Ric, plus optional gauge term.

    The returned kernel has signature
    ``kernel(g, ip, im, h, use_gauge, gamma_bg, rhs, gam, wlow)``
    and fills ``rhs`` with -2 Ric(g), adding the Lie-derivative correction
    along the gauge vector field built against the background connection
    ``gamma_bg`` when ``use_gauge`` is true. ``gam`` (per-node connection)
    and ``wlow`` (lowered gauge field) are caller-provided scratch output
    so the second pass can read neighbor values.
    """
    if n in _RHS_CACHE:
        return _RHS_CACHE[n]

    @njit(cache=False, fastmath=False)
    def ricci_rhs(g, ip, im, h, use_gauge, gamma_bg, rhs, gam, wlow):
        N = g.shape[0]
        two_h = 2.0 * h
        h2 = h * h
        work = np.empty((n, 2 * n))
        ginv = np.empty((n, n))
        dg = np.empty((n, n, n))
        d2g = np.empty((n, n, n, n))
        glow = np.empty((n, n, n))
        raised = np.empty((n, n, n))
        trg = np.empty(n)
        vlow = np.empty(n)
        econ = np.empty((n, n))
        w_up = np.empty(n)
        for x in range(N):
            # Inverse metric by Gauss-Jordan with partial pivoting. The
            # scratch is hoisted above the node loop; per-node allocation
            # costs more than the arithmetic at these sizes.
            for i in range(n):
                for j in range(n):
                    work[i, j] = g[x, i, j]
                    work[i, n + j] = 1.0 if i == j else 0.0
            for c in range(n):
                p = c
                big = abs(work[c, c])
                for r in range(c + 1, n):
                    if abs(work[r, c]) > big:
                        big = abs(work[r, c])
                        p = r
                if p != c:
                    for j in range(2 * n):
                        tmp = work[c, j]
                        work[c, j] = work[p, j]
                        work[p, j] = tmp
                piv = 1.0 / work[c, c]
                for j in range(2 * n):
                    work[c, j] *= piv
                for r in range(n):
                    if r != c:
                        f = work[r, c]
                        if f != 0.0:
                            for j in range(2 * n):
                                work[r, j] -= f * work[c, j]
            for i in range(n):
                for j in range(n):
                    ginv[i, j] = work[i, n + j]

            # First and second metric derivatives. Mixed partials use the
            # four-point cross stencil; same-axis uses the classic 3-point.
            for a in range(n):
                xp = ip[x, a]
                xm = im[x, a]
                for i in range(n):
                    for j in range(i, n):
                        v = (g[xp, i, j] - g[xm, i, j]) / two_h
                        dg[a, i, j] = v
                        dg[a, j, i] = v
                for i in range(n):
                    for j in range(i, n):
                        v = (g[xp, i, j] - 2.0 * g[x, i, j] + g[xm, i, j]) / h2
                        d2g[a, a, i, j] = v
                        d2g[a, a, j, i] = v
                for b in range(a + 1, n):
                    xpp = ip[xp, b]
                    xpm = im[xp, b]
                    xmp = ip[xm, b]
                    xmm = im[xm, b]
                    for i in range(n):
                        for j in range(i, n):
                            v = (
                                g[xpp, i, j] - g[xpm, i, j] - g[xmp, i, j] + g[xmm, i, j]
                            ) / (4.0 * h2)
                            d2g[a, b, i, j] = v
                            d2g[a, b, j, i] = v
                            d2g[b, a, i, j] = v
                            d2g[b, a, j, i] = v

            for k in range(n):
                for i in range(n):
                    for j in range(i, n):
                        s = 0.0
                        for l in range(n):
                            s += ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                        gam[x, k, i, j] = 0.5 * s
                        gam[x, k, j, i] = 0.5 * s

            # Contracted connection quantities reused by every (i, j) pair.
            for p in range(n):
                tr = 0.0
                for i in range(n):
                    for j in range(i, n):
                        s = 0.0
                        for k in range(n):
                            s += g[x, p, k] * gam[x, k, i, j]
                        glow[p, i, j] = s
                        glow[p, j, i] = s
                for l in range(n):
                    for j in range(n):
                        s = 0.0
                        for k in range(n):
                            s += ginv[l, k] * gam[x, p, k, j]
                        raised[p, l, j] = s
                for k in range(n):
                    for l in range(n):
                        tr += ginv[k, l] * gam[x, p, k, l]
                trg[p] = tr
            for m in range(n):
                s = 0.0
                for p in range(n):
                    s += g[x, m, p] * trg[p]
                vlow[m] = s
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        for l in range(n):
                            s += ginv[k, l] * d2g[i, l, k, j]
                    econ[i, j] = s
            for i in range(n):
                for j in range(i, n):
                    c = 0.0
                    d = 0.0
                    for k in range(n):
                        for l in range(n):
                            c += ginv[k, l] * d2g[i, j, k, l]
                            d += ginv[k, l] * d2g[k, l, i, j]
                    q1 = 0.0
                    for p in range(n):
                        for l in range(n):
                            q1 += glow[p, i, l] * raised[p, l, j]
                    q2 = 0.0
                    for p in range(n):
                        q2 += gam[x, p, i, j] * vlow[p]
                    ric = 0.5 * (econ[i, j] + econ[j, i] - c - d) + q1 - q2
                    rhs[x, i, j] = -2.0 * ric
                    rhs[x, j, i] = -2.0 * ric

            if use_gauge:
                for k in range(n):
                    s = 0.0
                    for p in range(n):
                        for q in range(n):
                            s += ginv[p, q] * (gam[x, k, p, q] - gamma_bg[x, k, p, q])
                    w_up[k] = s
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        s += g[x, j, k] * w_up[k]
                    wlow[x, j] = s
        if use_gauge:
            # Second pass: symmetrized covariant derivative of the lowered
            # gauge field, needing neighbor values of wlow from pass one.
            for x in range(N):
                for i in range(n):
                    for j in range(i, n):
                        s = (wlow[ip[x, i], j] - wlow[im[x, i], j]) / two_h + (
                            wlow[ip[x, j], i] - wlow[im[x, j], i]
                        ) / two_h
                        for k in range(n):
                            s -= 2.0 * gam[x, k, i, j] * wlow[x, k]
                        rhs[x, i, j] += s
                        if j != i:
                            rhs[x, j, i] += s
        return 0

    _RHS_CACHE[n] = ricci_rhs
    return ricci_rhs


def get_bundle_kernel(n: int):
    """Full curvature assembly for lattice metrics.

    Signature: ``kernel(g, ip, im, h, gam, rm, ric, scal, nrm, nric, sdet)``.
    Outputs per node: the connection, the fully lowered curvature tensor,
    its Ricci trace, the scalar trace, both tensor norms (all indices
    raised and lowered with g), and sqrt(det g) for volume weighting.
    """
    if n in _BUNDLE_CACHE:
        return _BUNDLE_CACHE[n]

    @njit(cache=False, fastmath=False)
    def bundle(g, ip, im, h, gam, rm, ric, scal, nrm, nric, sdet):
        N = g.shape[0]
        two_h = 2.0 * h
        h2 = h * h
        work = np.empty((n, 2 * n))
        ginv = np.empty((n, n))
        dg = np.empty((n, n, n))
        d2g = np.empty((n, n, n, n))
        a1 = np.empty((n, n, n, n))
        a2 = np.empty((n, n, n, n))
        ric_up = np.empty((n, n))
        for x in range(N):
            det = 1.0
            for i in range(n):
                for j in range(n):
                    work[i, j] = g[x, i, j]
                    work[i, n + j] = 1.0 if i == j else 0.0
            for c in range(n):
                p = c
                big = abs(work[c, c])
                for r in range(c + 1, n):
                    if abs(work[r, c]) > big:
                        big = abs(work[r, c])
                        p = r
                if p != c:
                    det = -det
                    for j in range(2 * n):
                        tmp = work[c, j]
                        work[c, j] = work[p, j]
                        work[p, j] = tmp
                det *= work[c, c]
                piv = 1.0 / work[c, c]
                for j in range(2 * n):
                    work[c, j] *= piv
                for r in range(n):
                    if r != c:
                        f = work[r, c]
                        if f != 0.0:
                            for j in range(2 * n):
                                work[r, j] -= f * work[c, j]
            for i in range(n):
                for j in range(n):
                    ginv[i, j] = work[i, n + j]
            sdet[x] = np.sqrt(det)

            for a in range(n):
                xp = ip[x, a]
                xm = im[x, a]
                for i in range(n):
                    for j in range(i, n):
                        v = (g[xp, i, j] - g[xm, i, j]) / two_h
                        dg[a, i, j] = v
                        dg[a, j, i] = v
                for i in range(n):
                    for j in range(i, n):
                        v = (g[xp, i, j] - 2.0 * g[x, i, j] + g[xm, i, j]) / h2
                        d2g[a, a, i, j] = v
                        d2g[a, a, j, i] = v
                for b in range(a + 1, n):
                    xpp = ip[xp, b]
                    xpm = im[xp, b]
                    xmp = ip[xm, b]
                    xmm = im[xm, b]
                    for i in range(n):
                        for j in range(i, n):
                            v = (
                                g[xpp, i, j] - g[xpm, i, j] - g[xmp, i, j] + g[xmm, i, j]
                            ) / (4.0 * h2)
                            d2g[a, b, i, j] = v
                            d2g[a, b, j, i] = v
                            d2g[b, a, i, j] = v
                            d2g[b, a, j, i] = v

            for k in range(n):
                for i in range(n):
                    for j in range(i, n):
                        s = 0.0
                        for l in range(n):
                            s += ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                        gam[x, k, i, j] = 0.5 * s
                        gam[x, k, j, i] = 0.5 * s

            # Lowered curvature from second derivatives plus the quadratic
            # connection terms, contracted with the lowered connection.
            for i in range(n):
                for k in range(n):
                    for l in range(n):
                        for m in range(n):
                            v = 0.5 * (
                                d2g[k, l, i, m]
                                + d2g[i, m, k, l]
                                - d2g[k, m, i, l]
                                - d2g[i, l, k, m]
                            )
                            q = 0.0
                            for a in range(n):
                                for b in range(n):
                                    q += g[x, a, b] * (
                                        gam[x, a, k, l] * gam[x, b, i, m]
                                        - gam[x, a, k, m] * gam[x, b, i, l]
                                    )
                            rm[x, i, k, l, m] = v + q

            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        for l in range(n):
                            s += ginv[k, l] * rm[x, k, i, l, j]
                    ric[x, i, j] = s
            s = 0.0
            for i in range(n):
                for j in range(n):
                    s += ginv[i, j] * ric[x, i, j]
            scal[x] = s

            # Norm of the curvature tensor: raise indices one at a time.
            for a in range(n):
                for j in range(n):
                    for k in range(n):
                        for l in range(n):
                            s = 0.0
                            for i in range(n):
                                s += ginv[a, i] * rm[x, i, j, k, l]
                            a1[a, j, k, l] = s
            for a in range(n):
                for b in range(n):
                    for k in range(n):
                        for l in range(n):
                            s = 0.0
                            for j in range(n):
                                s += ginv[b, j] * a1[a, j, k, l]
                            a2[a, b, k, l] = s
            for a in range(n):
                for b in range(n):
                    for c2 in range(n):
                        for l in range(n):
                            s = 0.0
                            for k in range(n):
                                s += ginv[c2, k] * a2[a, b, k, l]
                            a1[a, b, c2, l] = s
            total = 0.0
            for a in range(n):
                for b in range(n):
                    for c2 in range(n):
                        for d2 in range(n):
                            s = 0.0
                            for l in range(n):
                                s += ginv[d2, l] * a1[a, b, c2, l]
                            total += s * rm[x, a, b, c2, d2]
            nrm[x] = np.sqrt(max(total, 0.0))

            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        for l in range(n):
                            s += ginv[i, k] * ginv[j, l] * ric[x, k, l]
                    ric_up[i, j] = s
            total = 0.0
            for i in range(n):
                for j in range(n):
                    total += ric_up[i, j] * ric[x, i, j]
            nric[x] = np.sqrt(max(total, 0.0))
        return 0

    _BUNDLE_CACHE[n] = bundle
    return bundle


def get_spd_gate(n: int):
    """Cheap positivity gate: Cholesky of (g - tau I) at every node.

    Returns the first node index where the factorization fails, or -1 when
    every node certifies min eigenvalue > tau. This is the per-step safety
    check; exact eigenvalues are only computed at record times.
    """
    if n in _GATE_CACHE:
        return _GATE_CACHE[n]

    @njit(cache=False, fastmath=False)
    def gate(g, tau):
        N = g.shape[0]
        a = np.empty((n, n))
        for x in range(N):
            for i in range(n):
                for j in range(n):
                    a[i, j] = g[x, i, j]
                a[i, i] -= tau
            ok = True
            for c in range(n):
                s = a[c, c]
                for k in range(c):
                    s -= a[c, k] * a[c, k]
                if s <= 0.0 or not np.isfinite(s):
                    ok = False
                    break
                root = np.sqrt(s)
                a[c, c] = root
                for r in range(c + 1, n):
                    s = a[r, c]
                    for k in range(c):
                        s -= a[r, k] * a[c, k]
                    a[r, c] = s / root
            if not ok:
                return x
        return -1

    _GATE_CACHE[n] = gate
    return gate


def warm_kernels(n: int) -> None:
    """Force compilation of all kernels for a dimension on toy input."""
    g = np.eye(n)[None, :, :].copy()
    ip = np.zeros((1, n), dtype=np.int64)
    im = np.zeros((1, n), dtype=np.int64)
    rhs = np.empty((1, n, n))
    gam = np.empty((1, n, n, n))
    wlow = np.empty((1, n))
    gamma_bg = np.zeros((1, n, n, n))
    get_rhs_kernel(n)(g, ip, im, 0.1, True, gamma_bg, rhs, gam, wlow)
    rm = np.empty((1, n, n, n, n))
    ric = np.empty((1, n, n))
    scal = np.empty(1)
    nrm = np.empty(1)
    nric = np.empty(1)
    sdet = np.empty(1)
    get_bundle_kernel(n)(g, ip, im, 0.1, gam, rm, ric, scal, nrm, nric, sdet)
    get_spd_gate(n)(g, 1e-10)
