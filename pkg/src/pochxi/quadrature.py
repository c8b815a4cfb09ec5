"""Adaptive composite Gauss-Legendre quadrature for vector-valued integrands.

The integrand maps a 1-D object array of nodes to a 2-D object array
(nodes x outputs). Each panel is accepted when the one-panel and two-half
estimates agree, output by output, to ``tol`` relative to the running total.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from gmpy2 import mpfr

from ._mp import gl_rule

Integrand = Callable[[np.ndarray], np.ndarray]


class QuadratureError(RuntimeError):
    """Raised when panels keep failing the error test past ``max_rounds``."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass
class QuadResult:
    values: np.ndarray  # object array of mpfr / mpc
    rel_err: np.ndarray  # float estimate per output
    panels: int


def _nodes(a, b, xs):
    h = (b - a) / 2
    m = (a + b) / 2
    return np.array([m + h * x for x in xs], dtype=object), h


def _panel(f: Integrand, a, b, xs, ws):
    pts, h = _nodes(a, b, xs)
    vals = f(pts)
    return h * np.dot(np.array(ws, dtype=object), vals)


def integrate(
    f: Integrand,
    breakpoints: Sequence,
    tol: float,
    bits: int,
    degree: int = 4,
    max_rounds: int = 40,
    abs_floor=None,
) -> QuadResult:
    """Integrate ``f`` over [breakpoints[0], breakpoints[-1]].

    Caller sets the working precision; ``bits`` selects the cached rule.
    """
    xs, ws = gl_rule(degree, bits)
    pts = [mpfr(p) for p in breakpoints]
    # each panel: (a, b, coarse) ; halves evaluated lazily
    work = []
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            work.append((a, b, _panel(f, a, b, xs, ws)))
    if not work:
        raise ValueError("empty integration range")
    done = []
    tol_m = mpfr(tol)
    for _ in range(max_rounds):
        refined = []
        for a, b, coarse in work:
            m = (a + b) / 2
            left = _panel(f, a, m, xs, ws)
            right = _panel(f, m, b, xs, ws)
            refined.append((a, b, m, left, right, abs(left + right - coarse)))
        total = sum((x[3] + x[4] for x in refined), start=0) + sum(
            (d[2] for d in done), start=0
        )
        scale = np.array([abs(v) for v in np.atleast_1d(total)], dtype=object)
        if abs_floor is not None:
            floor = mpfr(abs_floor)
        else:
            floor = max(scale) * mpfr(2) ** (-bits)
        limit = np.array([max(s * tol_m, floor) for s in scale], dtype=object)
        work = []
        for a, b, m, left, right, err in refined:
            if all(e <= lim for e, lim in zip(np.atleast_1d(err), limit)):
                done.append((a, b, left + right, err))
            else:
                work.append((a, m, left))
                work.append((m, b, right))
        if not work:
            break
    else:
        worst = max(
            float(max(e / s if s else e for e, s in zip(np.atleast_1d(w[2]), scale)))
            for w in work
        )
        raise QuadratureError("adaptive quadrature did not converge", worst)
    done.sort(key=lambda d: d[0])
    # sum in position order so the result does not depend on refinement history
    values = sum((d[2] for d in done), start=0)
    err = sum((d[3] for d in done), start=0)
    values = np.atleast_1d(values)
    rel = np.array(
        [float(e / abs(v)) if v != 0 else float(e) for e, v in zip(np.atleast_1d(err), values)]
    )
    return QuadResult(values=values, rel_err=rel, panels=len(done))
