"""Compiled inner loops for the alternating SCA solver.

Element coefficients for one link end are three arrays ``kx, ky, ke`` so
that element l has phase ``kx[l]*x + ky[l]*y + ke[l]*phase``. A Hermitian
form is passed as its strict upper triangle ``bpair`` (indices ``pi < qi``)
plus the real diagonal sum.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2 * math.pi
DELTA_MIN = 1e-12
INV_SQRT2 = 1 / math.sqrt(2)


@njit(cache=True, nogil=True)
def gain_and_gradient(bpair, pi, qi, cx, cy, cp, diag, kx, ky, ke, pt, e, grad):
    """Cosine-expansion gain at ``pt``; writes the gradient into ``grad``."""
    n = kx.size
    for l in range(n):
        w = kx[l] * pt[0] + ky[l] * pt[1] + ke[l] * pt[2]
        e[l] = complex(math.cos(w), math.sin(w))
    acc = 0.0
    gx = 0.0
    gy = 0.0
    gp = 0.0
    for k in range(bpair.size):
        # |B_pq| * exp(j * varpi_pq)
        z = bpair[k] * e[pi[k]].conjugate() * e[qi[k]]
        acc += z.real
        s = z.imag
        gx += cx[k] * s
        gy += cy[k] * s
        gp += cp[k] * s
    grad[0] = -2.0 * gx
    grad[1] = -2.0 * gy
    grad[2] = -2.0 * gp
    return diag + 2.0 * acc


@njit(cache=True, nogil=True)
def inner_ascent(bpair, pi, qi, cx, cy, cp, diag, kx, ky, ke,
                 pt, lo, hi, wrap, delta, floor, max_iter, tol, trace):
    """Maximize one side's gain by repeated closed-form surrogate steps.

    ``pt`` is updated in place. ``trace[0..iters]`` receives the gain after
    each step. With ``floor < 1`` the curvature starts at ``floor*delta`` and
    doubles until the surrogate built with it lies below the true gain at the
    candidate; ``delta`` itself is a global bound, so it always passes.
    """
    e = np.empty(kx.size, dtype=np.complex128)
    grad = np.empty(3)
    grad_new = np.empty(3)
    cand = np.empty(3)
    g = gain_and_gradient(bpair, pi, qi, cx, cy, cp, diag, kx, ky, ke, pt, e, grad)
    trace[0] = g
    scale = min(floor, 1.0)
    it = 0
    while it < max_iter:
        it += 1
        while True:
            d = max(scale * delta, DELTA_MIN)
            lin = 0.0
            quad = 0.0
            for c in range(3):
                v = pt[c] + grad[c] / d
                if not (c == 2 and wrap):
                    v = min(max(v, lo[c]), hi[c])
                cand[c] = v
                step = v - pt[c]
                lin += grad[c] * step
                quad += step * step
            g_new = gain_and_gradient(bpair, pi, qi, cx, cy, cp, diag, kx, ky, ke,
                                      cand, e, grad_new)
            if scale >= 1.0 or g_new >= g + lin - 0.5 * d * quad - 1e-12 * max(1.0, abs(g)):
                break
            scale = min(1.0, 2.0 * scale)
        inc = g_new - g
        if inc < 0.0:
            trace[it] = g
            break
        for c in range(3):
            pt[c] = cand[c]
            grad[c] = grad_new[c]
        if wrap:
            pt[2] = pt[2] - TWO_PI * math.floor(pt[2] / TWO_PI)
        g = g_new
        trace[it] = g
        scale = max(floor, 0.5 * scale)
        if inc < tol:
            break
    return it, g


@njit(cache=True, nogil=True)
def steer(pt, kx, ky, ke, amp):
    n = kx.size
    out = np.empty(n, dtype=np.complex128)
    for l in range(n):
        w = kx[l] * pt[0] + ky[l] * pt[1] + ke[l] * pt[2]
        out[l] = amp * complex(math.cos(w), math.sin(w))
    return out


@njit(cache=True, nogil=True)
def direct_gain(lam, tx_pt, rx_pt, tk, rk):
    f = steer(tx_pt, tk[0], tk[1], tk[2], INV_SQRT2)
    g = steer(rx_pt, rk[0], rk[1], rk[2], 1.0)
    h = np.vdot(g, lam @ f)
    return h.real * h.real + h.imag * h.imag


@njit(cache=True, nogil=True)
def _pairs_from_vector(b, pi, qi, amp2):
    bpair = np.empty(pi.size, dtype=np.complex128)
    total = 0.0
    for k in range(pi.size):
        bpair[k] = amp2 * b[pi[k]] * b[qi[k]].conjugate()
        total += abs(bpair[k])
    diag = 0.0
    for l in range(b.size):
        diag += amp2 * (b[l].real * b[l].real + b[l].imag * b[l].imag)
    return bpair, diag, total


@njit(cache=True, nogil=True)
def solve_start(lam, tk, rk, tpairs, rpairs, tx_pt, rx_pt, tx_lo, tx_hi, rx_lo, rx_hi,
                tx_wrap, rx_wrap, snr, delta_factor, floor, eps1, eps2, t_max, i_max,
                rx_first, trace):
    """One start of the alternating SCA loop; states are updated in place.

    ``tk``/``rk`` stack (kx, ky, ke) per side, ``tpairs``/``rpairs`` stack
    (pi, qi) and the float tuple (cx, cy, cp). ``trace[0..n_outer]`` gets the
    rate before and after every outer iteration.
    """
    inner_trace = np.empty(i_max + 1)
    lam_h = lam.conj().T.copy()
    gain = direct_gain(lam, tx_pt, rx_pt, tk, rk)
    trace[0] = math.log2(1.0 + gain * snr)
    steps = 0
    converged = False
    prev_tx = tx_pt.copy()
    prev_rx = rx_pt.copy()
    t = 0
    while t < t_max:
        t += 1
        prev_tx[:] = tx_pt
        prev_rx[:] = rx_pt
        for half in range(2):
            do_rx = (half == 0) == rx_first
            if do_rx:
                f = steer(tx_pt, tk[0], tk[1], tk[2], INV_SQRT2)
                bpair, diag, total = _pairs_from_vector(lam @ f, rpairs[0], rpairs[1], 1.0)
                it, _ = inner_ascent(bpair, rpairs[0], rpairs[1], rpairs[2], rpairs[3], rpairs[4],
                                     diag, rk[0], rk[1], rk[2], rx_pt, rx_lo, rx_hi, rx_wrap,
                                     delta_factor * total, floor, i_max, eps2, inner_trace)
            else:
                g = steer(rx_pt, rk[0], rk[1], rk[2], 1.0)
                bpair, diag, total = _pairs_from_vector(lam_h @ g, tpairs[0], tpairs[1], 0.5)
                it, _ = inner_ascent(bpair, tpairs[0], tpairs[1], tpairs[2], tpairs[3], tpairs[4],
                                     diag, tk[0], tk[1], tk[2], tx_pt, tx_lo, tx_hi, tx_wrap,
                                     delta_factor * total, floor, i_max, eps2, inner_trace)
            steps += it
        new_gain = direct_gain(lam, tx_pt, rx_pt, tk, rk)
        if new_gain < gain:
            # round-off only: the side steps are monotone in their own expansion
            tx_pt[:] = prev_tx
            rx_pt[:] = prev_rx
            trace[t] = trace[t - 1]
            converged = True
            break
        gain = new_gain
        trace[t] = math.log2(1.0 + gain * snr)
        if trace[t] - trace[t - 1] < eps1:
            converged = True
            break
    return t, steps, converged, gain


@njit(cache=True, nogil=True)
def oracle_search(hflat, order, upper, tx_phasors, phi_count):
    """Exhaustive max of |q(phi)^H H p(theta)|^2 over lattice phases.

    ``hflat[k] = (H00, H01, H10, H11)`` per position pair, visited in
    ``order`` (descending ``upper``); a pair is skipped once its bound cannot
    beat the incumbent. For each theta the best phi on the lattice
    ``2*pi*m/phi_count`` is the lattice point nearest the ideal alignment.
    """
    step = TWO_PI / phi_count
    best = -1.0
    best_pair = -1
    best_theta = -1
    best_phi = -1
    for idx in range(order.size):
        k = order[idx]
        if upper[k] <= best:
            break
        h00 = hflat[k, 0]
        h01 = hflat[k, 1]
        h10 = hflat[k, 2]
        h11 = hflat[k, 3]
        for it in range(tx_phasors.size):
            c = tx_phasors[it]
            a = h00 + h01 * c
            b = h10 + h11 * c
            z = a.conjugate() * b
            absz = abs(z)
            m = 0
            if absz > 0.0:
                psi = math.atan2(z.imag, z.real)
                m = int(round(psi / step)) % phi_count
                cosd = math.cos(psi - m * step)
            else:
                cosd = 0.0
            val = 0.5 * (abs(a) ** 2 + abs(b) ** 2 + 2.0 * absz * cosd)
            if val > best:
                best = val
                best_pair = k
                best_theta = it
                best_phi = m
    return best, best_pair, best_theta, best_phi
