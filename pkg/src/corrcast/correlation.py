"""Covariance/correlation primitives and the moving-window correlated-sequence scan.

Population (1/n) conventions are used throughout so the pairwise covariance
identity and the completion-variance identity hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DegenerateCorrelationError, NoMatchError, ValidationError
from .series import SiteGrid


@dataclass(frozen=True)
class CorrelationStats:
    cov: float
    sigma_x: float
    sigma_y: float
    rho: float
    weights: Optional[np.ndarray] = None


@dataclass(frozen=True)
class WindowMatch:
    """A historical window correlated with the recent target window.

    `his` is the matched m-length window, `ref` the n values that followed it
    in history, and `pred` the n-length completion filled in later by the
    correlation-completion solver.
    """

    source_site: str
    offset: int
    his: np.ndarray
    ref: np.ndarray
    rho: float
    pred: Optional[np.ndarray] = None

    def with_pred(self, pred) -> "WindowMatch":
        return replace(self, pred=np.asarray(pred, dtype=np.float64))


def _as_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise ValidationError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValidationError("need at least 2 samples")
    return x, y


def covariance(x, y, weights=None) -> float:
    """Weighted population covariance; uniform weights 1/n when none are given."""
    x, y = _as_pair(x, y)
    if weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != x.shape:
            raise ValidationError("weights length mismatch")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError("weights must be nonnegative and sum to 1")
    xbar = float(w @ x)
    ybar = float(w @ y)
    return float(w @ ((x - xbar) * (y - ybar)))


def covariance_pairwise(x, y) -> float:
    """Covariance via the pairwise-difference identity
    (1/n^2) * sum_{i} sum_{j>i} (x_i - x_j)(y_i - y_j)."""
    x, y = _as_pair(x, y)
    n = x.size
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    upper = np.triu_indices(n, k=1)
    return float(np.sum(dx[upper] * dy[upper]) / n**2)


def pearson(x, y, weights=None) -> CorrelationStats:
    """Pearson correlation with population moments.

    Raises DegenerateCorrelationError when either input has zero variance.
    """
    x, y = _as_pair(x, y)
    cov = covariance(x, y, weights)
    sx = math.sqrt(max(covariance(x, x, weights), 0.0))
    sy = math.sqrt(max(covariance(y, y, weights), 0.0))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateCorrelationError("zero-variance input")
    rho = cov / (sx * sy)
    rho = min(1.0, max(-1.0, rho))
    w = None if weights is None else np.asarray(weights, dtype=np.float64)
    return CorrelationStats(cov=cov, sigma_x=sx, sigma_y=sy, rho=rho, weights=w)


def scan_windows(
    grid: SiteGrid,
    recent,
    m: int,
    n: int,
    threshold: float,
    include_target_site: bool = True,
) -> list[WindowMatch]:
    """Stride-1 scan of every site's history for windows correlated with `recent`.

    A candidate at (site, offset) is the m values starting there; it must
    leave room for an n-length continuation. Zero-variance (becalmed) windows
    are skipped. Matches with |rho| >= threshold are returned sorted
    ascending by |rho|, ties broken by (site_id, offset).
    """
    recent = np.asarray(recent, dtype=np.float64)
    if recent.size != m:
        raise ValidationError(f"recent has length {recent.size}, expected m={m}")
    if not (0 < threshold <= 1):
        raise ValidationError("threshold must lie in (0, 1]")
    if m < 2 or n < 1:
        raise ValidationError("need m >= 2 and n >= 1")
    if np.std(recent) == 0:
        raise DegenerateCorrelationError("recent window has zero variance")

    rbar = recent.mean()
    rdev = recent - rbar
    rnorm = math.sqrt(float(rdev @ rdev))

    matches: list[WindowMatch] = []
    for sid in grid.site_ids:
        if sid == grid.target_site and not include_target_site:
            continue
        values = grid.series[sid].values
        last = values.size - m - n
        if last < 0:
            continue
        # vectorized correlation of `recent` against every stride-1 window
        windows = np.lib.stride_tricks.sliding_window_view(values, m)[: last + 1]
        wmean = windows.mean(axis=1)
        wdev = windows - wmean[:, None]
        wnorm = np.sqrt(np.einsum("ij,ij->i", wdev, wdev))
        ok = wnorm > 0
        rho = np.zeros(windows.shape[0])
        rho[ok] = (wdev[ok] @ rdev) / (wnorm[ok] * rnorm)
        np.clip(rho, -1.0, 1.0, out=rho)
        for off in np.nonzero(ok & (np.abs(rho) >= threshold))[0]:
            off = int(off)
            matches.append(
                WindowMatch(
                    source_site=sid,
                    offset=off,
                    his=values[off : off + m].copy(),
                    ref=values[off + m : off + m + n].copy(),
                    rho=float(rho[off]),
                )
            )

    if not matches:
        raise NoMatchError(f"no window reached |rho| >= {threshold}")
    matches.sort(key=lambda w: (abs(w.rho), w.source_site, w.offset))
    return matches
