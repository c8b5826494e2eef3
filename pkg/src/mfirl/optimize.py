"""Limited-memory BFGS ascent with a strong-Wolfe line search."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class FitReport:
    objective: float
    grad_norm: float
    iterations: int
    evaluations: int
    wall_time: float
    converged: bool
    warning: str | None = None


class LineSearchError(RuntimeError):
    pass


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga), (b, fb, gb), or None."""
    if a == b:
        return None
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _interpolate(lo, flo, glo, hi, fhi, ghi):
    left, right = min(lo, hi), max(lo, hi)
    width = right - left
    t = _cubic_min(lo, flo, glo, hi, fhi, ghi)
    if t is None or not np.isfinite(t) or t <= left + 0.1 * width or t >= right - 0.1 * width:
        t = 0.5 * (lo + hi)
    return t


def strong_wolfe(phi, f0: float, g0: float, alpha0: float = 1.0, c1: float = 1e-4,
                 c2: float = 0.9, max_evals: int = 40, alpha_max: float = 1e10,
                 refine: bool = True):
    """Line search for a descent direction (``g0 < 0``).

    ``phi(alpha)`` returns (value, slope, payload). Returns
    (alpha, value, payload, evaluations).
    """
    if g0 >= 0:
        raise LineSearchError("not a descent direction")
    prev_a, prev_f, prev_g = 0.0, f0, g0
    a = alpha0
    flat = 1e-13 * (1.0 + abs(f0))
    evals = 0

    def zoom(lo, flo, glo, plo, hi, fhi, ghi):
        nonlocal evals
        while evals < max_evals:
            t = _interpolate(lo, flo, glo, hi, fhi, ghi)
            ft, gt, pt = phi(t)
            evals += 1
            if abs(ft - f0) <= flat and abs(gt) <= -c2 * g0:
                return t, ft, pt  # values equal to roundoff: accept on slope alone
            if ft > f0 + c1 * t * g0 or ft >= flo:
                hi, fhi, ghi = t, ft, gt
            else:
                if abs(gt) <= -c2 * g0:
                    return t, ft, pt
                if gt * (hi - lo) >= 0:
                    hi, fhi, ghi = lo, flo, glo
                lo, flo, glo, plo = t, ft, gt, pt
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        if plo is not None and flo < f0:
            return lo, flo, plo
        raise LineSearchError("zoom failed to find a strong-Wolfe step")

    prev_p = None
    while evals < max_evals:
        fa, ga, pa = phi(a)
        evals += 1
        if not np.isfinite(fa):
            a = 0.5 * (prev_a + a)
            continue
        if fa > f0 + c1 * a * g0 or (evals > 1 and fa >= prev_f):
            res = zoom(prev_a, prev_f, prev_g, prev_p, a, fa, ga)
            return (*res, evals)
        if abs(ga) <= -c2 * g0:
            if refine and abs(ga) > 1e-6 * -g0:
                # one interpolation step; exact when phi is quadratic
                t = _cubic_min(0.0, f0, g0, a, fa, ga)
                if t is not None and np.isfinite(t) and t > 0:
                    ft, gt, pt = phi(t)
                    evals += 1
                    if ft < fa and ft <= f0 + c1 * t * g0 and abs(gt) <= -c2 * g0:
                        return t, ft, pt, evals
            return a, fa, pa, evals
        if ga >= 0:
            res = zoom(a, fa, ga, pa, prev_a, prev_f, prev_g)
            return (*res, evals)
        if a >= alpha_max:
            raise LineSearchError("step length unbounded (objective may be unbounded)")
        prev_a, prev_f, prev_g, prev_p = a, fa, ga, pa
        a = min(2.0 * a, alpha_max)
    raise LineSearchError("line search exceeded its evaluation budget")


def lbfgs_maximize(objective: Objective, x0, tol_grad: float = 1e-6, max_iter: int = 500,
                   memory: int = 10) -> tuple[np.ndarray, FitReport]:
    """Maximize a smooth function given ``objective(x) -> (value, gradient)``.

    Stops when the gradient max-norm drops to ``tol_grad`` or after
    ``max_iter`` iterations. A failed line search ends the run early with the
    best iterate and a warning in the report.
    """
    start = time.perf_counter()

    def neg(x):
        f, g = objective(x)
        return -float(f), -np.asarray(g, dtype=float)

    x = np.array(x0, dtype=float)
    f, g = neg(x)
    evaluations = 1
    pairs: deque = deque(maxlen=memory)
    warning = None
    it = 0
    while np.max(np.abs(g), initial=0.0) > tol_grad and it < max_iter:
        # two-loop recursion for d = -H g
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(pairs):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if pairs:
            s, y, _ = pairs[-1]
            q *= (s @ y) / (y @ y)
        for (s, y, rho), a in zip(pairs, reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        d = -q
        slope = g @ d
        if slope >= 0:  # lost descent; restart from steepest descent
            pairs.clear()
            d = -g
            slope = g @ d
        alpha0 = 1.0 if pairs else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))

        def phi(alpha):
            fx, gx = neg(x + alpha * d)
            return fx, gx @ d, gx

        try:
            alpha, f_new, g_new, n_eval = strong_wolfe(phi, f, slope, alpha0)
        except LineSearchError as exc:
            warning = f"line search failed: {exc}"
            break
        evaluations += n_eval
        step = alpha * d
        y = g_new - g
        sy = step @ y
        if sy > 1e-12 * np.sqrt((step @ step) * (y @ y)):
            pairs.append((step, y, 1.0 / sy))
        x = x + step
        f, g = f_new, g_new
        it += 1
    grad_norm = float(np.max(np.abs(g), initial=0.0))
    report = FitReport(-f, grad_norm, it, evaluations, time.perf_counter() - start,
                       grad_norm <= tol_grad, warning)
    return x, report
