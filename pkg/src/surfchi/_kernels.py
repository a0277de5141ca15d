"""Compiled inner loops. Sums run over faces/nodes in a fixed order so results
are bit-reproducible."""

import numpy as np
from numba import njit

# series and closed-form branches both stay within ~1e-13 at this switch
EPS_PHASE = 3e-3


@njit(cache=True, inline="always")
def _tri_value(phi0, a, b):
    """Second divided difference of -exp(-i x) at phi0, phi0 + a, phi0 + a + b.

    A flat triangle of area A with these vertex phases integrates
    exp(-i phase) to 2 * A times this value."""
    d = a + b
    if abs(d) < EPS_PHASE:
        c = phi0 + (2.0 * a + b) / 3.0
        d0 = -(2.0 * a + b) / 3.0
        d1 = (a - b) / 3.0
        d2 = (a + 2.0 * b) / 3.0
        p2 = d0 * d0 + d1 * d1 + d2 * d2
        p3 = d0 * d0 * d0 + d1 * d1 * d1 + d2 * d2 * d2
        re = 0.5 - p2 / 48.0
        im = p3 / 360.0
        cc, sc = np.cos(c), np.sin(c)
        # exp(-ic) * (re + i im)
        return complex(cc * re + sc * im, cc * im - sc * re)
    ha = 0.5 * a
    hb = 0.5 * b
    ca, sa = np.cos(ha), np.sin(ha)
    cb, sb = np.cos(hb), np.sin(hb)
    sinc_a = sa / ha if ha != 0.0 else 1.0
    sinc_b = sb / hb if hb != 0.0 else 1.0
    # S(x) = exp(-i x/2) sinc(x/2)
    s_a = complex(ca * sinc_a, -sa * sinc_a)
    s_b = complex(cb * sinc_b, -sb * sinc_b)
    e_a = complex(ca * ca - sa * sa, -2.0 * ca * sa)
    num = e_a * s_b - s_a
    e0 = complex(np.cos(phi0), -np.sin(phi0))
    return 1j * e0 * num / d


@njit(cache=True)
def tri_value_batch(q0, d1, d2, lam):
    """Per-face divided differences at one frequency (no summation)."""
    out = np.empty(q0.shape[0], dtype=np.complex128)
    for f in range(q0.shape[0]):
        out[f] = _tri_value(lam * q0[f], lam * d1[f], lam * d2[f])
    return out


@njit(cache=True)
def tri_sum(q0, d1, d2, w2, lambdas):
    """sum_f w2[f] * dd_f(lambda) for every lambda.

    q0 is the smallest vertex phase of each face and d1, d2 the sorted gaps;
    w2 is twice the face area (or any per-face weight times 2)."""
    nl = lambdas.shape[0]
    nf = q0.shape[0]
    out = np.empty(nl, dtype=np.complex128)
    for j in range(nl):
        lam = lambdas[j]
        acc = 0.0 + 0.0j
        for f in range(nf):
            acc += w2[f] * _tri_value(lam * q0[f], lam * d1[f], lam * d2[f])
        out[j] = acc
    return out


@njit(cache=True)
def phase_sum(w, g, lambdas):
    """sum_i w[i] * exp(-i lambda g[i]) for every lambda."""
    nl = lambdas.shape[0]
    out = np.empty(nl, dtype=np.complex128)
    for j in range(nl):
        lam = lambdas[j]
        re = 0.0
        im = 0.0
        for i in range(w.shape[0]):
            ph = lam * g[i]
            re += w[i] * np.cos(ph)
            im -= w[i] * np.sin(ph)
        out[j] = complex(re, im)
    return out


@njit(cache=True)
def exp_sum_matrix(lambdas, times, weights):
    """sum_j weights[j] * exp(i lambdas[j] t) for each t in times."""
    out = np.empty(times.shape[0], dtype=np.complex128)
    for m in range(times.shape[0]):
        t = times[m]
        re = 0.0
        im = 0.0
        for j in range(lambdas.shape[0]):
            ph = lambdas[j] * t
            c = np.cos(ph)
            s = np.sin(ph)
            wr = weights[j].real
            wi = weights[j].imag
            re += wr * c - wi * s
            im += wr * s + wi * c
        out[m] = complex(re, im)
    return out


ANCHOR = 32
# below this phase span (rad) the rotated exponentials lose too many digits
# to the divided-difference cancellation
SMALL_SPAN = 0.02


@njit(cache=True)
def tri_sum_uniform(q0, d1, d2, w2, lam0, dlam, n):
    """tri_sum on the grid lam0 + j * dlam (lam0 >= 0, dlam > 0), j < n.

    Samples where the facet's phase span is below SMALL_SPAN use the direct
    formula. Beyond that the three exponentials are advanced by complex
    rotation and recomputed directly every ANCHOR steps."""
    out_re = np.zeros(n)
    out_im = np.zeros(n)
    inv_lam = np.zeros(n)
    for j in range(n):
        lam = lam0 + j * dlam
        if lam != 0.0:
            inv_lam[j] = 1.0 / lam
    for f in range(q0.shape[0]):
        q = q0[f]
        A = 0.5 * d1[f]
        B = 0.5 * d2[f]
        W = w2[f]
        span = A + B
        if A == 0.0 or B == 0.0:
            j_cut = n
        else:
            j_cut = min(n, max(0, int(np.ceil((SMALL_SPAN / span - lam0) / dlam))))
        for j in range(j_cut):
            lam = lam0 + j * dlam
            v = W * _tri_value(lam * q, 2.0 * lam * A, 2.0 * lam * B)
            out_re[j] += v.real
            out_im[j] += v.imag
        if j_cut >= n:
            continue
        inv_a = 1.0 / A
        inv_b = 1.0 / B
        scale = 0.5 * W / span
        rq_r, rq_i = np.cos(dlam * q), -np.sin(dlam * q)
        ra_r, ra_i = np.cos(dlam * A), -np.sin(dlam * A)
        rb_r, rb_i = np.cos(dlam * B), -np.sin(dlam * B)
        eq_r = eq_i = ea_r = ea_i = eb_r = eb_i = 0.0
        for j in range(j_cut, n):
            if j == j_cut or j % ANCHOR == 0:
                lam = lam0 + j * dlam
                eq_r, eq_i = np.cos(lam * q), -np.sin(lam * q)
                ea_r, ea_i = np.cos(lam * A), -np.sin(lam * A)
                eb_r, eb_i = np.cos(lam * B), -np.sin(lam * B)
            else:
                eq_r, eq_i = eq_r * rq_r - eq_i * rq_i, eq_r * rq_i + eq_i * rq_r
                ea_r, ea_i = ea_r * ra_r - ea_i * ra_i, ea_r * ra_i + ea_i * ra_r
                eb_r, eb_i = eb_r * rb_r - eb_i * rb_i, eb_r * rb_i + eb_i * rb_r
            il = inv_lam[j]
            sinc_a = -ea_i * inv_a * il
            sinc_b = -eb_i * inv_b * il
            # t = ea * eb * sinc_b - sinc_a
            t_r = (ea_r * eb_r - ea_i * eb_i) * sinc_b - sinc_a
            t_i = (ea_r * eb_i + ea_i * eb_r) * sinc_b
            # u = ea * t * eq
            u_r = ea_r * t_r - ea_i * t_i
            u_i = ea_r * t_i + ea_i * t_r
            v_r = u_r * eq_r - u_i * eq_i
            v_i = u_r * eq_i + u_i * eq_r
            c = scale * il
            # multiply by i
            out_re[j] -= v_i * c
            out_im[j] += v_r * c
    out = np.empty(n, dtype=np.complex128)
    for j in range(n):
        out[j] = complex(out_re[j], out_im[j])
    return out


LANES = 4


@njit(cache=True)
def phase_sum_uniform(w, g, lam0, dlam, n):
    """phase_sum on the grid lam0 + j * dlam, j < n, by anchored rotation.

    Nodes go through in groups of LANES so the independent rotations can
    overlap in the pipeline; padding nodes carry zero weight."""
    m = w.shape[0]
    groups = (m + LANES - 1) // LANES
    out_re = np.zeros(n)
    out_im = np.zeros(n)
    e_r = np.zeros(LANES)
    e_i = np.zeros(LANES)
    r_r = np.zeros(LANES)
    r_i = np.zeros(LANES)
    for grp in range(groups):
        for q in range(LANES):
            i = grp * LANES + q
            if i < m:
                r_r[q], r_i[q] = np.cos(dlam * g[i]), -np.sin(dlam * g[i])
            else:
                r_r[q], r_i[q] = 1.0, 0.0
        j = 0
        while j < n:
            for q in range(LANES):
                i = grp * LANES + q
                if i < m:
                    ph = (lam0 + j * dlam) * g[i]
                    e_r[q], e_i[q] = w[i] * np.cos(ph), -w[i] * np.sin(ph)
                else:
                    e_r[q], e_i[q] = 0.0, 0.0
            a0, b0, a1, b1 = e_r[0], e_i[0], e_r[1], e_i[1]
            a2, b2, a3, b3 = e_r[2], e_i[2], e_r[3], e_i[3]
            c0, s0, c1, s1 = r_r[0], r_i[0], r_r[1], r_i[1]
            c2, s2, c3, s3 = r_r[2], r_i[2], r_r[3], r_i[3]
            stop = min(n, j + ANCHOR)
            for k in range(j, stop):
                out_re[k] += (a0 + a1) + (a2 + a3)
                out_im[k] += (b0 + b1) + (b2 + b3)
                a0, b0 = a0 * c0 - b0 * s0, a0 * s0 + b0 * c0
                a1, b1 = a1 * c1 - b1 * s1, a1 * s1 + b1 * c1
                a2, b2 = a2 * c2 - b2 * s2, a2 * s2 + b2 * c2
                a3, b3 = a3 * c3 - b3 * s3, a3 * s3 + b3 * c3
            j = stop
    out = np.empty(n, dtype=np.complex128)
    for j in range(n):
        out[j] = complex(out_re[j], out_im[j])
    return out


@njit(cache=True)
def deposit_hats(q0, d1, d2, area, edge0, width, nbins, flat_tol):
    """Accumulate per-face hat densities onto bins [edge0 + j width, edge0 + (j+1) width).

    Face f spreads `area[f]` over [q0, q0 + d1 + d2] with a density rising
    linearly to q0 + d1 and falling back to zero; each bin receives the exact
    integral over it. Faces whose span is below flat_tol land in one bin.
    Returns (masses, number of flat faces, number of faces off the grid)."""
    out = np.zeros(nbins)
    flat = 0
    off = 0
    for f in range(q0.shape[0]):
        A = area[f]
        a = d1[f]
        p2 = d1[f] + d2[f]
        lo = q0[f]
        j0 = int(np.floor((lo - edge0) / width))
        j1 = int(np.floor((lo + p2 - edge0) / width))
        if j0 < 0 or j1 >= nbins:
            off += 1
            j0 = min(max(j0, 0), nbins - 1)
            j1 = min(max(j1, 0), nbins - 1)
        if p2 <= flat_tol or j0 == j1:
            if p2 <= flat_tol:
                flat += 1
            out[j0] += A
            continue
        prev = 0.0
        for j in range(j0, j1 + 1):
            if j == j1:
                F = A
            else:
                s = edge0 + (j + 1) * width - lo
                if s <= 0.0:
                    F = 0.0
                elif s <= a:
                    F = A * s * s / (a * p2)
                elif s < p2:
                    r = p2 - s
                    F = A - A * r * r / (d2[f] * p2)
                else:
                    F = A
            out[j] += F - prev
            prev = F
    return out, flat, off
