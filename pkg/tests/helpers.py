"""Independent reference implementations used as oracles."""

import cmath
import math

import numpy as np


def double_sum_channel(tx, rx, instance):
    """h as an explicit double sum over path pairs, no Kronecker products."""
    geo, wl, lam = instance.geometry, instance.wavelength, instance.pprm
    p = np.array([1, cmath.exp(1j * tx.phase)]) / math.sqrt(2)
    q = np.array([1, cmath.exp(1j * rx.phase)])
    total = 0j
    for i in range(geo.num_tx_paths):
        rho_t = (tx.position[0] * math.cos(geo.tx_elevation[i]) * math.sin(geo.tx_azimuth[i])
                 + tx.position[1] * math.sin(geo.tx_elevation[i]))
        for l in range(geo.num_rx_paths):
            rho_r = (rx.position[0] * math.cos(geo.rx_elevation[l]) * math.sin(geo.rx_azimuth[l])
                     + rx.position[1] * math.sin(geo.rx_elevation[l]))
            block = lam[2 * l:2 * l + 2, 2 * i:2 * i + 2]
            total += (cmath.exp(-2j * math.pi * rho_r / wl) * (q.conj() @ block @ p)
                      * cmath.exp(2j * math.pi * rho_t / wl))
    return total


def fd_gradient(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h[k]
        g[k] = (f(x + e) - f(x - e)) / (2 * h[k])
    return g


def fd_hessian(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    H = np.empty((3, 3))
    f0 = f(x)
    for i in range(3):
        for j in range(i, 3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = h
            ej[j] = h
            if i == j:
                H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h ** 2
            else:
                H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej)
                                     - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H


def projected_gradient_box_qp(center, delta, lower, upper, tol=1e-10, max_iter=100000):
    """Maximize -(delta/2)|x - center|^2 over a box by projected gradient ascent."""
    x = np.clip(np.zeros_like(center), lower, upper)
    step = 0.5 / delta
    for _ in range(max_iter):
        new = np.clip(x + step * (-delta * (x - center)), lower, upper)
        if np.max(np.abs(new - x)) < tol:
            return new
        x = new
    return x
