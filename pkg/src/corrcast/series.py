"""Multi-site wind-speed series: ingestion, validation, statistics, CV splits,
and a seeded synthetic field generator.

All speeds are in m/s and all series run on a fixed 10-minute cadence; one
sample interval is called a "period" throughout the package.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ValidationError

#: One sampling period of the sensors.
PERIOD = timedelta(minutes=10)

#: Samples per day at 10-minute cadence.
PERIODS_PER_DAY = 144


@dataclass(frozen=True)
class WindSeries:
    """A single site's gap-free wind-speed record."""

    site_id: str
    start_time: datetime
    values: np.ndarray
    cadence: timedelta = PERIOD

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError(f"site {self.site_id}: values must be a nonempty 1-D array")
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"site {self.site_id}: non-finite wind speed")
        if np.any(v < 0):
            raise ValidationError(f"site {self.site_id}: negative wind speed")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Site:
    site_id: str
    x_km: float
    y_km: float
    altitude_m: float = 0.0


@dataclass(frozen=True)
class SiteGrid:
    """Aligned wind-speed records for a set of sites, one of which is the forecast target."""

    sites: tuple[Site, ...]
    series: dict[str, WindSeries]
    target_site: str

    def __post_init__(self):
        ids = [s.site_id for s in self.sites]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate site_id")
        if set(self.series) != set(ids):
            raise ValidationError("series keys must match site ids exactly")
        if self.target_site not in self.series:
            raise ValidationError(f"target site {self.target_site!r} not in grid")
        lengths = {len(s) for s in self.series.values()}
        starts = {s.start_time for s in self.series.values()}
        cadences = {s.cadence for s in self.series.values()}
        if len(lengths) != 1 or len(starts) != 1 or len(cadences) != 1:
            raise ValidationError("all series must share start_time, cadence and length")

    @property
    def n_periods(self) -> int:
        return len(next(iter(self.series.values())))

    @property
    def site_ids(self) -> list[str]:
        return [s.site_id for s in self.sites]

    def target_values(self) -> np.ndarray:
        return self.series[self.target_site].values

    def site(self, site_id: str) -> Site:
        for s in self.sites:
            if s.site_id == site_id:
                return s
        raise KeyError(site_id)


@dataclass(frozen=True)
class DatasetSplit:
    """One expanding-window CV fold: half-open period-index intervals."""

    fold_id: int
    train_range: tuple[int, int]
    test_range: tuple[int, int]

    def __post_init__(self):
        tr0, tr1 = self.train_range
        te0, te1 = self.test_range
        if not (0 <= tr0 < tr1 == te0 < te1):
            raise ValidationError("test range must start exactly where train range ends")

    @property
    def tr(self) -> int:
        return self.train_range[1] - self.train_range[0]

    @property
    def te(self) -> int:
        return self.test_range[1] - self.test_range[0]


@dataclass(frozen=True)
class SeriesStats:
    min: float
    mean: float
    max: float
    std: float
    skewness: float
    excess_kurtosis: float
    q1: float
    q3: float


def describe(series: WindSeries | np.ndarray) -> SeriesStats:
    """Population-moment summary of a series.

    Moments divide by n; kurtosis is reported as excess (0 for a normal
    distribution). A zero-variance series gets skewness and excess kurtosis
    of 0 so the constant-series path stays total. Quartiles interpolate
    linearly between order statistics.
    """
    v = series.values if isinstance(series, WindSeries) else np.asarray(series, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("cannot describe an empty series")
    mean = float(np.mean(v))
    var = float(np.mean((v - mean) ** 2))
    std = math.sqrt(var)
    if std > 0:
        z = (v - mean) / std
        skew = float(np.mean(z**3))
        kurt = float(np.mean(z**4)) - 3.0
    else:
        skew = 0.0
        kurt = 0.0
    q1, q3 = np.quantile(v, [0.25, 0.75], method="linear")
    return SeriesStats(
        min=float(np.min(v)),
        mean=mean,
        max=float(np.max(v)),
        std=std,
        skewness=skew,
        excess_kurtosis=kurt,
        q1=float(q1),
        q3=float(q3),
    )


def split_cv(grid: SiteGrid, te_len: int, folds: int) -> list[DatasetSplit]:
    """Expanding-window time-series cross validation.

    Fold k (1-based) trains on [0, k*te_len) and tests on the next te_len
    periods, so with te_len=360 and folds=3 the (Tr, Te) pattern is
    (360,360), (720,360), (1080,360).
    """
    if te_len < 1 or folds < 1:
        raise ValidationError("te_len and folds must be positive")
    needed = (folds + 1) * te_len
    if grid.n_periods < needed:
        raise ValidationError(
            f"grid has {grid.n_periods} periods but {needed} are needed for "
            f"{folds} folds of test length {te_len}"
        )
    return [
        DatasetSplit(
            fold_id=k,
            train_range=(0, k * te_len),
            test_range=(k * te_len, (k + 1) * te_len),
        )
        for k in range(1, folds + 1)
    ]


# ---------------------------------------------------------------------------
# CSV ingestion

TIME_FORMAT = "%Y-%m-%dT%H:%M:%S"


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".sites.csv")


def load_csv(path: str | Path, sites_path: str | Path | None = None,
             target_site: str | None = None) -> SiteGrid:
    """Load a SiteGrid from the record CSV plus its coordinate sidecar.

    The record file has a `timestamp,site_id,wind_speed_mps` header with
    ISO-8601 timestamps at strict 10-minute cadence; the sidecar (by default
    `<stem>.sites.csv`) has `site_id,x_km,y_km,altitude_m`. The target site
    defaults to the first site listed in the sidecar.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"no such file: {path}")
    sites_path = Path(sites_path) if sites_path is not None else _sidecar_path(path)
    if not sites_path.exists():
        raise ValidationError(f"no coordinate sidecar: {sites_path}")

    sites: list[Site] = []
    with open(sites_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["site_id", "x_km", "y_km", "altitude_m"]:
            raise ValidationError(f"{sites_path}: bad sidecar header {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                sites.append(Site(row["site_id"], float(row["x_km"]),
                                  float(row["y_km"]), float(row["altitude_m"])))
            except (TypeError, ValueError, KeyError) as exc:
                raise ValidationError(f"{sites_path}:{i}: malformed row ({exc})") from exc
    if not sites:
        raise ValidationError(f"{sites_path}: no sites")

    records: dict[str, list[tuple[datetime, float]]] = {s.site_id: [] for s in sites}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["timestamp", "site_id", "wind_speed_mps"]:
            raise ValidationError(f"{path}: bad header {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                ts = datetime.strptime(row["timestamp"], TIME_FORMAT)
                speed = float(row["wind_speed_mps"])
                sid = row["site_id"]
            except (TypeError, ValueError, KeyError) as exc:
                raise ValidationError(f"{path}:{i}: malformed row ({exc})") from exc
            if sid not in records:
                raise ValidationError(f"{path}:{i}: unknown site {sid!r}")
            if not math.isfinite(speed) or speed < 0:
                raise ValidationError(f"{path}:{i}: invalid wind speed {row['wind_speed_mps']}")
            records[sid].append((ts, speed))

    series: dict[str, WindSeries] = {}
    for sid, rows in records.items():
        if not rows:
            raise ValidationError(f"{path}: site {sid} has no rows")
        rows.sort(key=lambda r: r[0])
        start = rows[0][0]
        for k, (ts, _) in enumerate(rows):
            if ts != start + k * PERIOD:
                raise ValidationError(
                    f"{path}: site {sid} misses or repeats the 10-minute slot at "
                    f"{start + k * PERIOD:{TIME_FORMAT}}"
                )
        series[sid] = WindSeries(sid, start, np.array([r[1] for r in rows]))

    starts = {s.start_time for s in series.values()}
    lengths = {len(s) for s in series.values()}
    if len(starts) != 1 or len(lengths) != 1:
        raise ValidationError(f"{path}: sites are not aligned (starts {starts}, lengths {lengths})")

    return SiteGrid(sites=tuple(sites), series=series,
                    target_site=target_site or sites[0].site_id)


def save_csv(grid: SiteGrid, path: str | Path) -> None:
    """Write a grid back out in the load_csv schema (record file + sidecar)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "site_id", "wind_speed_mps"])
        for sid in grid.site_ids:
            s = grid.series[sid]
            for k, v in enumerate(s.values):
                writer.writerow([f"{s.start_time + k * PERIOD:{TIME_FORMAT}}", sid, repr(float(v))])
    with open(_sidecar_path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "x_km", "y_km", "altitude_m"])
        for s in grid.sites:
            writer.writerow([s.site_id, repr(s.x_km), repr(s.y_km), repr(s.altitude_m)])


# ---------------------------------------------------------------------------
# Synthetic field generator

def synth_field(
    n_sites: int,
    n_periods: int,
    spatial_decay: float,
    temporal_rho: float,
    noise_std: float,
    seed: int,
    *,
    mean_level: float = 8.0,
    diurnal_amplitude: float = 2.0,
    coords: np.ndarray | None = None,
    start_time: datetime = datetime(2015, 5, 29),
) -> SiteGrid:
    """Deterministic synthetic multi-site field (stand-in for real farm data).

    Each site follows an order-1 autoregression around a shared diurnal base
    signal; innovation correlation between two sites decays with their
    Euclidean distance d as exp(-d / spatial_decay). Uses numpy's PCG64
    generator so a fixed seed reproduces the grid bit-for-bit. Speeds are
    clamped to >= 0.
    """
    if n_sites < 1 or n_periods < 1:
        raise ValidationError("n_sites and n_periods must be positive")
    if spatial_decay <= 0 or noise_std < 0:
        raise ValidationError("spatial_decay must be > 0 and noise_std >= 0")
    if not (0 < temporal_rho < 1):
        raise ValidationError("temporal_rho must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    if coords is None:
        box = max(1.0, math.sqrt(n_sites)) * 2.0
        coords = rng.uniform(0.0, box, size=(n_sites, 2))
    else:
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (n_sites, 2):
            raise ValidationError(f"coords must have shape ({n_sites}, 2)")
    altitudes = rng.uniform(0.0, 300.0, size=n_sites)

    dist = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    corr = np.exp(-dist / spatial_decay)
    # jitter keeps the Cholesky factorization stable when sites nearly coincide
    chol = np.linalg.cholesky(corr + 1e-10 * np.eye(n_sites))

    t = np.arange(n_periods)
    base = mean_level + diurnal_amplitude * np.sin(2 * np.pi * t / PERIODS_PER_DAY)

    innov = noise_std * (rng.standard_normal((n_periods, n_sites)) @ chol.T)
    anomalies = np.empty((n_periods, n_sites))
    # stationary start keeps early periods on the same footing as late ones
    scale0 = 1.0 / math.sqrt(1.0 - temporal_rho**2)
    anomalies[0] = scale0 * innov[0]
    for k in range(1, n_periods):
        anomalies[k] = temporal_rho * anomalies[k - 1] + innov[k]

    values = np.maximum(base[:, None] + anomalies, 0.0)

    sites = tuple(
        Site(f"S{i:02d}", float(coords[i, 0]), float(coords[i, 1]), float(altitudes[i]))
        for i in range(n_sites)
    )
    series = {
        s.site_id: WindSeries(s.site_id, start_time, values[:, i])
        for i, s in enumerate(sites)
    }
    return SiteGrid(sites=sites, series=series, target_site=sites[0].site_id)
