"""Scalar maximization and root finding used by the equilibrium solvers.

Golden-section search assumes a unimodal objective on the bracket; bisection
assumes a sign change. Both are deliberately dependency-free so the solvers
stay pure and deterministic.
"""

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def golden_section_max(f, lo, hi, tol=1e-10, max_iter=500):
    """Return the argmax of a unimodal ``f`` on ``[lo, hi]`` to within ``tol``."""
    a, b = float(lo), float(hi)
    h = b - a
    if h <= tol:
        return 0.5 * (a + b)
    c = a + _INVPHI2 * h
    d = a + _INVPHI * h
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if h <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + _INVPHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd = f(d)
    return 0.5 * (a + b)


def bisect_root(f, lo, hi, tol=1e-12, max_iter=200):
    """Return a root of ``f`` on ``[lo, hi]``; endpoints must bracket a sign change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("bisection endpoints do not bracket a root")
    a, b = float(lo), float(hi)
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (b - a) < tol:
            return m
        if flo * fm < 0.0:
            b = m
        else:
            a, flo = m, fm
    return 0.5 * (a + b)
