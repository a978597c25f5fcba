"""Compiled fourth-order Magnus propagation with Pruefer-type node counting."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def pruefer_angles(lams, ks, j0s, psi0, dpsi0, xs, qa, qb, out):  # pragma: no cover - compiled
    """Total phase ``Theta(R)`` for each ``lambda``.

    ``qa``/``qb`` hold the potential at the two Gauss points of each cell;
    ``j0s[i]`` is the first cell used for ``lams[i]`` with seed data
    ``(psi0[i], dpsi0[i])``.  ``Theta = pi * (nodes) + atan2(k psi, psi') mod pi``.
    """
    n = lams.size
    s3 = np.sqrt(3.0)
    for i in range(n):
        lam = lams[i]
        k = ks[i]
        p = psi0[i]
        d = dpsi0[i]
        nodes = 0
        if p < 0.0:
            nodes = 1
        for j in range(j0s[i], xs.size - 1):
            h = xs[j + 1] - xs[j]
            w1 = qa[j] - lam
            w2 = qb[j] - lam
            a = s3 * h * h / 12.0 * (w1 - w2)
            c = h * 0.5 * (w1 + w2)
            s2 = a * a + h * c
            if s2 > 1e-6:
                s = np.sqrt(s2)
                C = np.cosh(s)
                S = np.sinh(s) / s
            elif s2 < -1e-6:
                s = np.sqrt(-s2)
                C = np.cos(s)
                S = np.sin(s) / s
            else:
                C = 1.0 + s2 * (0.5 + s2 * (1.0 / 24.0 + s2 / 720.0))
                S = 1.0 + s2 * (1.0 / 6.0 + s2 * (1.0 / 120.0 + s2 / 5040.0))
            pn = (C + S * a) * p + S * h * d
            dn = S * c * p + (C - S * a) * d
            if (pn < 0.0) != (p < 0.0):
                nodes += 1
            nrm = abs(pn) + abs(dn)
            if nrm > 1e100 or nrm < 1e-100:
                pn /= nrm
                dn /= nrm
            p = pn
            d = dn
        ang = np.arctan2(k * p, d)
        if ang < 0.0:
            ang += np.pi
        if ang >= np.pi:
            ang -= np.pi
        # a node exactly at R is counted by the sign flip and again by ang = 0
        if p == 0.0:
            ang = 0.0
        out[i] = nodes * np.pi + ang
