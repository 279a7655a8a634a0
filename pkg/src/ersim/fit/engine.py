"""Bounded Levenberg-Marquardt least squares and RMSD-doubling intervals.

The solver minimises 0.5 * |r(x)|^2 with Marquardt's diagonal scaling and
Nielsen's damping update.  Jacobians are forward differences with a step of
sqrt(eps) times the parameter scale.  Bounds are enforced by projecting trial
points onto the box.

Uncertainty intervals follow the profile convention: for each parameter the
others are re-optimised while it is scanned outward, and the interval ends
where the RMSD reaches twice its optimal value.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import DomainError, FitError

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    open_low: bool = False
    open_high: bool = False

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high

    @property
    def width(self) -> float:
        return self.high - self.low


@dataclass
class FitResult:
    names: tuple[str, ...]
    x: np.ndarray
    rmsd: float
    iterations: int
    converged: bool
    message: str = ""
    residuals: np.ndarray | None = None
    history: list[float] = dc_field(default_factory=list)
    intervals: dict[str, Interval] = dc_field(default_factory=dict)
    warnings: list[str] = dc_field(default_factory=list)
    nfev: int = 0
    # problem definition kept so intervals can be computed later
    residual_fn: Callable | None = dc_field(default=None, repr=False)
    bounds: tuple[np.ndarray, np.ndarray] | None = dc_field(default=None, repr=False)
    scale: np.ndarray | None = dc_field(default=None, repr=False)
    jac_fn: Callable | None = dc_field(default=None, repr=False)

    @property
    def params(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.x)}

    def __getitem__(self, name: str) -> float:
        return self.params[name]


def _as_arrays(initial, bounds, names):
    if isinstance(initial, Mapping):
        names = tuple(initial) if names is None else tuple(names)
        x0 = np.array([float(initial[n]) for n in names])
    else:
        x0 = np.array(initial, dtype=float).ravel()
        names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(x0.size))
    lo = np.full(x0.size, -np.inf)
    hi = np.full(x0.size, np.inf)
    if bounds is not None:
        if isinstance(bounds, Mapping):
            for i, n in enumerate(names):
                if n in bounds:
                    lo[i], hi[i] = bounds[n]
        else:
            lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), x0.shape).copy()
            hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), x0.shape).copy()
    if np.any(lo > hi):
        raise DomainError("lower bound above upper bound")
    return names, x0, lo, hi


def fd_jacobian(fun, x, r0, lo, hi, scale):
    """Forward-difference Jacobian; steps flip sign at an upper bound."""
    jac = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = math.sqrt(EPS) * max(abs(x[j]), scale[j])
        if x[j] + h > hi[j]:
            h = -h
        xp = x.copy()
        xp[j] += h
        h = xp[j] - x[j]
        jac[:, j] = (fun(xp) - r0) / h
    return jac


def _projected_gradient(g, x, lo, hi):
    pg = g.copy()
    pg[(x <= lo) & (g > 0)] = 0.0
    pg[(x >= hi) & (g < 0)] = 0.0
    return pg


def least_squares(residual: Callable[[np.ndarray], np.ndarray], initial, bounds=None, *,
                  names: Sequence[str] | None = None, scale: Sequence[float] | None = None,
                  jac: Callable[[np.ndarray], np.ndarray] | None = None,
                  max_iter: int = 500, gtol: float = 1e-10, xtol: float = 1e-12,
                  raise_on_failure: bool = False) -> FitResult:
    """Minimise the sum of squared residuals.

    Args:
        residual: maps a parameter vector onto a residual vector.
        initial: starting point, as a sequence or a name -> value mapping.
        bounds: ``(lower, upper)`` arrays or a name -> (lo, hi) mapping.
        scale: typical magnitude per parameter, sets finite-difference steps
            for parameters that start near zero.
        jac: optional analytic Jacobian; forward differences otherwise.

    Converges when the projected gradient falls below ``gtol`` times its
    initial norm, when a step is shorter than ``xtol`` relative to the
    parameters, or when the residual vanishes.
    """
    names, x, lo, hi = _as_arrays(initial, bounds, names)
    x = np.clip(x, lo, hi)
    sc = np.ones(x.size) if scale is None else np.asarray(scale, dtype=float)
    sc = np.where(sc > 0, sc, 1.0)
    nfev = 0

    def fun(p):
        nonlocal nfev
        nfev += 1
        return np.asarray(residual(p), dtype=float).ravel()

    jac_fn = jac

    def jacobian(p, r0):
        if jac_fn is not None:
            return np.asarray(jac_fn(p), dtype=float).reshape(r0.size, p.size)
        return fd_jacobian(fun, p, r0, lo, hi, sc)

    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise DomainError("residual is not finite at the initial point")
    cost = 0.5 * float(r @ r)
    history = [cost]
    notes: list[str] = []
    jac = jacobian(x, r)
    g = jac.T @ r
    g0 = float(np.linalg.norm(_projected_gradient(g, x, lo, hi)))
    a = jac.T @ jac
    mu = 1e-3 * max(float(np.max(np.diag(a))), EPS)
    nu = 2.0
    converged = cost == 0.0 or g0 == 0.0
    message = "zero residual" if cost == 0.0 else ("zero gradient" if g0 == 0.0 else "")
    it = 0
    while not converged and it < max_iter:
        it += 1
        # variables pinned at a bound with the gradient pushing outward stay put
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        step = np.zeros_like(x)
        af = a[np.ix_(free, free)]
        gf = g[free]
        d = np.diag(af).copy()
        dmax = max(float(d.max()), EPS) if d.size else 1.0
        singular = np.any(d <= EPS * dmax)
        if singular:
            d = np.where(d <= EPS * dmax, max(dmax, 1.0), d)
        try:
            if singular:
                raise np.linalg.LinAlgError
            step[free] = np.linalg.solve(af + mu * np.diag(d), -gf)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            msg = "singular Jacobian; taking a gradient step"
            if msg not in notes:
                notes.append(msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
            step = np.zeros_like(x)
            step[free] = -gf / (mu * d + float(np.max(d)))
        x_new = np.clip(x + step, lo, hi)
        step = x_new - x
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
            converged, message = True, "step below tolerance"
            break
        r_new = fun(x_new)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
        predicted = -(step @ g + 0.5 * step @ a @ step)
        rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
        if cost_new < cost:
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            if cost == 0.0:
                converged, message = True, "zero residual"
                break
            jac = jacobian(x, r)
            g = jac.T @ r
            a = jac.T @ jac
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * max(rho, 0.0) - 1.0) ** 3)
            nu = 2.0
            if np.linalg.norm(_projected_gradient(g, x, lo, hi)) <= gtol * g0:
                converged, message = True, "gradient below tolerance"
                # one undamped Gauss-Newton polish; exact for linear models
                gn = np.linalg.lstsq(jac, -r, rcond=None)[0]
                x_gn = np.clip(x + gn, lo, hi)
                r_gn = fun(x_gn)
                if np.all(np.isfinite(r_gn)) and 0.5 * float(r_gn @ r_gn) < cost:
                    x, r, cost = x_gn, r_gn, 0.5 * float(r_gn @ r_gn)
                    history.append(cost)
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e300:
                message = "damping overflow"
                break
    if not converged and not message:
        message = "iteration cap reached"
    n = max(r.size, 1)
    result = FitResult(names, x, math.sqrt(2.0 * cost / n), it, converged, message, r, history,
                       warnings=notes, nfev=nfev, residual_fn=residual, bounds=(lo, hi), scale=sc,
                       jac_fn=jac_fn)
    if not converged and raise_on_failure:
        raise FitError(f"fit did not converge: {message}",
                       {"rmsd": result.rmsd, "iterations": it, "params": result.params})
    return result


def rmsd_at(residual, x) -> float:
    r = np.asarray(residual(x), dtype=float).ravel()
    return math.sqrt(float(r @ r) / max(r.size, 1))


def _profile(result: FitResult, residual, j: int, value: float, warm: np.ndarray) -> tuple[float, np.ndarray]:
    """RMSD with parameter j held at ``value`` and the rest re-optimised."""
    lo, hi = result.bounds
    free = [k for k in range(result.x.size) if k != j]
    full = warm.copy()
    full[j] = value
    if not free:
        return rmsd_at(residual, full), full

    def sub(p):
        y = full.copy()
        y[free] = p
        return residual(y)

    sub_jac = None
    if result.jac_fn is not None:
        def sub_jac(p):
            y = full.copy()
            y[free] = p
            return np.asarray(result.jac_fn(y))[:, free]

    fit = least_squares(sub, full[free], (lo[free], hi[free]), scale=result.scale[free], jac=sub_jac,
                        max_iter=200, gtol=1e-8)
    full[free] = fit.x
    return fit.rmsd, full


def _initial_offset(result: FitResult, j: int) -> float:
    """Distance where the linearised profile RMSD doubles."""
    r = result.residuals
    n = r.size
    if result.jac_fn is not None:
        jac = np.asarray(result.jac_fn(result.x), dtype=float)
    else:
        jac = fd_jacobian(lambda p: np.asarray(result.residual_fn(p), dtype=float).ravel(),
                          result.x, r, *result.bounds, result.scale)
    a = jac.T @ jac
    try:
        cov_jj = float(np.linalg.pinv(a)[j, j])
    except np.linalg.LinAlgError:
        cov_jj = 0.0
    guess = math.sqrt(max(3.0 * n * result.rmsd**2 * cov_jj, 0.0))
    floor = 1e-3 * max(abs(result.x[j]), result.scale[j])
    return guess if np.isfinite(guess) and guess > floor else floor


def rmsd_doubling_intervals(result: FitResult, residual: Callable | None = None, *,
                            only: Sequence[str] | None = None, rtol: float = 1e-3,
                            max_expand: int = 60) -> dict[str, Interval]:
    """Profile intervals where the RMSD reaches twice the optimum.

    The scan in each direction expands geometrically until the RMSD passes
    the target, then bisects to ``rtol`` relative to the distance from the
    optimum.  A direction that reaches a bound (or the expansion limit)
    without doubling is reported open at that point.  ``only`` restricts the
    scan to the named parameters.
    """
    residual = residual or result.residual_fn
    if residual is None:
        raise DomainError("no residual function available")
    x0 = result.x
    target = 2.0 * result.rmsd
    lo_b, hi_b = result.bounds
    out = {}
    for j, name in enumerate(result.names):
        if only is not None and name not in only:
            continue
        if result.rmsd == 0.0:
            out[name] = Interval(float(x0[j]), float(x0[j]))
            continue
        delta0 = _initial_offset(result, j)
        ends = []
        for direction in (-1.0, 1.0):
            bound = lo_b[j] if direction < 0 else hi_b[j]
            inner, warm = 0.0, x0.copy()
            outer = delta0
            is_open = True
            for _ in range(max_expand):
                v = x0[j] + direction * outer
                hit_bound = (direction < 0 and v <= bound) or (direction > 0 and v >= bound)
                if hit_bound:
                    v = bound
                    outer = abs(bound - x0[j])
                val, state = _profile(result, residual, j, v, warm)
                if val >= target:
                    is_open = False
                    break
                inner, warm = outer, state
                if hit_bound or outer == 0.0:
                    break
                outer *= 2.0
            if is_open:
                ends.append((x0[j] + direction * inner, True))
                continue
            while outer - inner > rtol * outer:
                mid = 0.5 * (inner + outer)
                val, state = _profile(result, residual, j, x0[j] + direction * mid, warm)
                if val >= target:
                    outer = mid
                else:
                    inner, warm = mid, state
            ends.append((x0[j] + direction * 0.5 * (inner + outer), False))
        (low, open_low), (high, open_high) = ends
        out[name] = Interval(float(low), float(high), open_low, open_high)
    result.intervals = out
    return out


def fit_report(result: FitResult) -> str:
    """Plain-text parameter table with intervals, RMSD and convergence state."""
    lines = [f"{'parameter':<14}{'value':>16}{'low':>16}{'high':>16}"]
    for name in result.names:
        v = result.params[name]
        iv = result.intervals.get(name)
        if iv is None:
            lines.append(f"{name:<14}{v:>16.8g}{'-':>16}{'-':>16}")
        else:
            low = f"{iv.low:.8g}" + ("*" if iv.open_low else "")
            high = f"{iv.high:.8g}" + ("*" if iv.open_high else "")
            lines.append(f"{name:<14}{v:>16.8g}{low:>16}{high:>16}")
    lines.append(f"rmsd = {result.rmsd:.8g}")
    lines.append(f"iterations = {result.iterations}")
    lines.append(f"converged = {str(result.converged).lower()} ({result.message})")
    if any(iv.open_low or iv.open_high for iv in result.intervals.values()):
        lines.append("* open: RMSD did not double before the bound")
    return "\n".join(lines) + "\n"
