"""Correlation-completion solvers.

Given a fully known reference sequence X and a target sequence Y whose last n
values are unknown, choose those values inside physical bounds to maximize the
absolute Pearson correlation between X and the completed Y. The n = 1 case
reduces to a quadratic-over-quadratic ratio with a closed-form stationarity
condition; the general case is solved by bisection on the correlation level,
each level being a second-order-cone feasibility problem over the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .correlation import WindowMatch, covariance, pearson
from .errors import DegenerateCorrelationError, SolverError, ValidationError


@dataclass(frozen=True)
class PartitionedSeries:
    """Y split into a known, zero-padded prefix and an unknown tail support."""

    ya: np.ndarray
    unknown_count: int

    @property
    def full_len(self) -> int:
        return int(self.ya.size)

    @property
    def known_prefix(self) -> np.ndarray:
        return self.ya[: self.full_len - self.unknown_count]

    def complete(self, y_star) -> np.ndarray:
        y_star = np.atleast_1d(np.asarray(y_star, dtype=np.float64))
        if y_star.size != self.unknown_count:
            raise ValidationError(
                f"y_star has {y_star.size} values, expected {self.unknown_count}"
            )
        return np.concatenate([self.known_prefix, y_star])


@dataclass(frozen=True)
class RationalQuadratic:
    """Coefficients of g(u) = (a u^2 + b u + c) / (d u^2 + e u + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def __call__(self, u: float) -> float:
        return (self.a * u * u + self.b * u + self.c) / (self.d * u * u + self.e * u + self.f)


@dataclass(frozen=True)
class BisectionConfig:
    l: float = 0.0
    u: float = 1.0
    epsilon: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if not (0.0 <= self.l <= self.u <= 1.0):
            raise ValidationError("bounds must satisfy 0 <= l <= u <= 1")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")


@dataclass(frozen=True)
class ForecastSolution:
    y_star: np.ndarray
    rho_achieved: float
    branch: str  # "positive" | "negative"
    solver: str  # "closed_form" | "bisection" | "brute_force"
    clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def partition(known_prefix, n: int) -> PartitionedSeries:
    """Zero-pad the known prefix with n unknown slots."""
    known_prefix = np.asarray(known_prefix, dtype=np.float64)
    if known_prefix.ndim != 1 or known_prefix.size < 2:
        raise ValidationError("known prefix must have at least 2 values")
    if n < 1:
        raise ValidationError("need at least one unknown")
    ya = np.concatenate([known_prefix, np.zeros(n)])
    return PartitionedSeries(ya=ya, unknown_count=n)


def variance_of_completion(p: PartitionedSeries, y_star) -> float:
    """Var(Y) assembled as Var(Ya) + Var(Yb) + 2 Cov(Ya, Yb) with Yb the
    zero-padded unknown tail; equals the direct population variance of the
    completed series."""
    y_star = np.atleast_1d(np.asarray(y_star, dtype=np.float64))
    if y_star.size != p.unknown_count:
        raise ValidationError("y_star length mismatch")
    yb = np.concatenate([np.zeros(p.full_len - p.unknown_count), y_star])
    var_a = covariance(p.ya, p.ya)
    var_b = covariance(yb, yb)
    cov_ab = covariance(p.ya, yb)
    return var_a + var_b + 2.0 * cov_ab


def _check_reference(x, p: PartitionedSeries) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != p.full_len:
        raise ValidationError(f"reference length {x.size} != {p.full_len}")
    if np.std(x) == 0:
        raise DegenerateCorrelationError("reference sequence has zero variance")
    return x


def objective_coefficients_1d(x, p: PartitionedSeries) -> RationalQuadratic:
    """Coefficients of the squared correlation as a rational quadratic in the
    single unknown value u: rho(u)^2 = cov(X, Y(u))^2 / (sigma_X^2 Var(Y(u)))."""
    if p.unknown_count != 1:
        raise ValidationError("closed form applies to exactly one unknown")
    x = _check_reference(x, p)
    n_full = p.full_len
    known = p.known_prefix
    xbar = x.mean()
    s_known = known.sum()

    # cov(X, Y(u)) = a1 * u + a0
    a1 = (x[-1] - xbar) / n_full
    a0 = float(x[:-1] @ known) / n_full - xbar * s_known / n_full

    # Var(Y(u)) = dv * u^2 + ev * u + fv
    dv = 1.0 / n_full - 1.0 / n_full**2
    ev = -2.0 * s_known / n_full**2
    fv = float(known @ known) / n_full - (s_known / n_full) ** 2

    var_x = float(np.mean((x - xbar) ** 2))
    return RationalQuadratic(
        a=a1 * a1,
        b=2.0 * a1 * a0,
        c=a0 * a0,
        d=var_x * dv,
        e=var_x * ev,
        f=var_x * fv,
    )


def _stable_quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of a x^2 + b x + c = 0 via the two-branch formula."""
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b) if b != 0.0 else -sq)
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return roots


def _signed_rho(x: np.ndarray, p: PartitionedSeries, y_star) -> float:
    try:
        return pearson(x, p.complete(y_star)).rho
    except DegenerateCorrelationError:
        return 0.0


def solve_1d(x, p: PartitionedSeries, bounds) -> ForecastSolution:
    """Closed-form |rho| maximization for one unknown.

    Candidates are the real roots of the stationarity quadratic of the
    rational objective plus both interval endpoints; the winner is picked by
    re-evaluating Pearson correlation on the completed series, which avoids
    coefficient roundoff in the rational form.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise ValidationError("bounds must satisfy lo < hi")
    x = _check_reference(x, p)
    g = objective_coefficients_1d(x, p)

    qa = g.a * g.e - g.b * g.d
    qb = 2.0 * (g.a * g.f - g.c * g.d)
    qc = g.b * g.f - g.c * g.e
    candidates = [lo, hi]
    candidates += [r for r in _stable_quadratic_roots(qa, qb, qc) if lo <= r <= hi]

    best_u, best_rho = None, -1.0
    for u in candidates:
        rho = _signed_rho(x, p, u)
        if abs(rho) > best_rho:
            best_u, best_rho = u, abs(rho)
    signed = _signed_rho(x, p, best_u)
    return ForecastSolution(
        y_star=np.array([best_u]),
        rho_achieved=signed,
        branch="positive" if signed >= 0 else "negative",
        solver="closed_form",
        clamped=np.array([best_u in (lo, hi)]),
    )


# ---------------------------------------------------------------------------
# Bisection over second-order-cone feasibility for n unknowns


def _affine_forms(x: np.ndarray, p: PartitionedSeries):
    """Affine representations of cov(X, Y(y)) and the centered completion.

    cov(X, Y(y)) = c0 + c @ y, and Y(y) - mean(Y(y)) = M @ y + v, so that
    sqrt(Var(Y(y))) = ||M y + v|| / sqrt(N).
    """
    n_full = p.full_len
    n = p.unknown_count
    m = n_full - n
    known = p.known_prefix
    xbar = x.mean()
    s_known = known.sum()

    c0 = float(x[:m] @ known) / n_full - xbar * s_known / n_full
    c = (x[m:] - xbar) / n_full

    mat = np.zeros((n_full, n))
    mat[:, :] = -1.0 / n_full
    mat[m:, :] += np.eye(n)
    v = np.empty(n_full)
    v[:m] = known - s_known / n_full
    v[m:] = -s_known / n_full
    return c0, c, mat, v


def feasibility_check(
    t: float, x, p: PartitionedSeries, bounds, sign: int
) -> tuple[bool, Optional[np.ndarray]]:
    """Does any completion inside the box reach signed correlation >= t?

    The constraint sign*cov(X, Y(y)) >= t * sigma_X * sqrt(Var(Y(y))) is a
    second-order cone in y (cov is affine, sqrt(Var) the norm of an affine
    map), so its violation g(y) = t*sigma_X*||My+v||/sqrt(N) - sign*(c0+c@y)
    is convex; we minimize it over the box with a bound-constrained
    quasi-Newton method and test the minimum against zero.
    """
    if not (0.0 <= t <= 1.0):
        raise ValidationError("level t must lie in [0, 1]")
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1")
    x = _check_reference(x, p)
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise ValidationError("bounds must satisfy lo < hi")
    c0, c, mat, v = _affine_forms(x, p)
    sigma_x = float(np.std(x))
    scale = t * sigma_x / math.sqrt(p.full_len)

    def fun_grad(y):
        r = mat @ y + v
        norm = float(np.linalg.norm(r))
        val = scale * norm - sign * (c0 + float(c @ y))
        grad = -sign * c
        if norm > 1e-12:
            grad = grad + scale * (mat.T @ r) / norm
        return val, grad

    n = p.unknown_count
    box = [(lo, hi)] * n
    mid = np.full(n, 0.5 * (lo + hi))
    starts = [mid]
    # the known tail of X, rescaled into the box, is often near-optimal
    tail = np.clip(x[p.full_len - n :], lo, hi)
    starts.append(tail)

    best_val, best_y = math.inf, mid
    for y0 in starts:
        res = minimize(fun_grad, y0, jac=True, method="L-BFGS-B", bounds=box)
        if res.fun < best_val:
            best_val, best_y = float(res.fun), np.clip(res.x, lo, hi)
    feasible = best_val <= 1e-9
    return feasible, (best_y if feasible else None)


def solve_bisection(
    x, p: PartitionedSeries, bounds, cfg: BisectionConfig | None = None
) -> ForecastSolution:
    """Bisection on the correlation level, run on both sign branches.

    Because we maximize, a feasible level raises the lower bracket end; the
    loop stops when the bracket is narrower than epsilon. The final witness
    of the winning branch is the completion.
    """
    cfg = cfg or BisectionConfig()
    x = _check_reference(x, p)
    lo, hi = float(bounds[0]), float(bounds[1])

    best: Optional[tuple[float, np.ndarray, str]] = None
    for sign, name in ((1, "positive"), (-1, "negative")):
        feasible, witness = feasibility_check(cfg.l, x, p, bounds, sign)
        if not feasible:
            continue
        l, u = cfg.l, cfg.u
        iters = 0
        while u - l > cfg.epsilon:
            iters += 1
            if iters > cfg.max_iter:
                raise SolverError("bisection exceeded max_iter; feasibility routine broken")
            t = 0.5 * (l + u)
            ok, w = feasibility_check(t, x, p, bounds, sign)
            if ok:
                l, witness = t, w
            else:
                u = t
        rho = _signed_rho(x, p, witness)
        if best is None or abs(rho) > abs(best[0]):
            best = (rho, witness, name)

    if best is None:
        # neither branch reached even the lower level; fall back to the box midpoint
        mid = np.full(p.unknown_count, 0.5 * (lo + hi))
        best = (_signed_rho(x, p, mid), mid, "positive")

    rho, y_star, branch = best
    return ForecastSolution(
        y_star=np.asarray(y_star),
        rho_achieved=rho,
        branch=branch,
        solver="bisection",
        clamped=(np.abs(y_star - lo) < 1e-9) | (np.abs(y_star - hi) < 1e-9),
    )


def brute_force(x, p: PartitionedSeries, bounds, step: float,
                max_points: int = 4_000_000) -> ForecastSolution:
    """Exhaustive grid search over completions, used as a verification oracle.

    Ties break toward the lexicographically smallest grid point (first
    occurrence in C order).
    """
    if p.unknown_count < 1:
        raise ValidationError("nothing to solve")
    x = _check_reference(x, p)
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise ValidationError("bounds must satisfy lo < hi")
    axis = np.arange(lo, hi + step / 2, step)
    n = p.unknown_count
    if axis.size**n > max_points:
        raise SolverError(f"grid of {axis.size}**{n} points exceeds enumeration budget")

    grids = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)  # (P, n) in lex order

    known = p.known_prefix
    n_full = p.full_len
    completions = np.concatenate(
        [np.broadcast_to(known, (pts.shape[0], known.size)), pts], axis=1
    )
    mean = completions.mean(axis=1, keepdims=True)
    dev = completions - mean
    norms = np.sqrt(np.einsum("ij,ij->i", dev, dev))
    xdev = x - x.mean()
    xnorm = math.sqrt(float(xdev @ xdev))
    rho = np.zeros(pts.shape[0])
    ok = norms > 0
    rho[ok] = (dev[ok] @ xdev) / (norms[ok] * xnorm)
    np.clip(rho, -1.0, 1.0, out=rho)

    idx = int(np.argmax(np.abs(rho)))
    y_star = pts[idx]
    signed = float(rho[idx])
    return ForecastSolution(
        y_star=y_star,
        rho_achieved=signed,
        branch="positive" if signed >= 0 else "negative",
        solver="brute_force",
        clamped=(np.abs(y_star - lo) < 1e-9) | (np.abs(y_star - hi) < 1e-9),
    )


def forecast(match: WindowMatch, recent, bounds) -> tuple[WindowMatch, ForecastSolution]:
    """Complete the target's future through a matched historical window.

    X is the matched window followed by its historical continuation (fully
    known); Y is the recent target window followed by the unknown future.
    """
    recent = np.asarray(recent, dtype=np.float64)
    n = int(match.ref.size)
    x = np.concatenate([match.his, match.ref])
    p = partition(recent, n)
    if n == 1:
        sol = solve_1d(x, p, bounds)
    else:
        sol = solve_bisection(x, p, bounds)
    return match.with_pred(sol.y_star), sol
