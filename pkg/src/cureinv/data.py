"""Right-censored survival samples: container, CSV I/O and the simulation design."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from ._rng import raw_uniforms
from .exceptions import CsvFormatError

CSV_HEADER = ("time", "status", "x")
TRUNCATION_LEVEL = 0.97


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """An i.i.d. sample of observed times, event indicators and a scalar covariate.

    Parameters
    ----------
    time : array_like
        Observed times ``Y = min(T, C)``; finite and non-negative.
    status : array_like
        Event indicators ``delta = 1{T <= C}`` in {0, 1}.
    x : array_like
        Covariate values.

    Cured subjects are never flagged as such: a cure only shows up as a
    censored observation.
    """

    time: np.ndarray
    status: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        time = np.array(self.time, dtype=float, ndmin=1)
        status_raw = np.array(self.status, ndmin=1)
        x = np.array(self.x, dtype=float, ndmin=1)
        if not (time.ndim == status_raw.ndim == x.ndim == 1):
            raise ValueError("time, status and x must be one-dimensional")
        if not (len(time) == len(status_raw) == len(x)):
            raise ValueError("time, status and x must have the same length")
        if len(time) == 0:
            raise ValueError("a survival dataset needs at least one record")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise ValueError("times must be finite and non-negative")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariate values must be finite")
        if not np.all((status_raw == 0) | (status_raw == 1)):
            raise ValueError("invalid status: event indicators must be 0 or 1")
        status = status_raw.astype(np.int8)
        for arr in (time, status, x):
            arr.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "x", x)

    @property
    def n(self):
        return len(self.time)

    def __len__(self):
        return self.n

    @property
    def has_events(self):
        return bool(np.any(self.status == 1))

    def take(self, index):
        """Sub-sample (with repetitions allowed) by integer index."""
        index = np.asarray(index, dtype=np.intp)
        return SurvivalDataset(self.time[index], self.status[index], self.x[index])

    def repeat(self, k):
        """Every record repeated ``k`` times (row order preserved blockwise)."""
        return SurvivalDataset(
            np.tile(self.time, k), np.tile(self.status, k), np.tile(self.x, k)
        )

    def __repr__(self):
        return (
            f"SurvivalDataset(n={self.n}, events={int(self.status.sum())}, "
            f"censored={int(self.n - self.status.sum())})"
        )


def load_csv(path):
    """Read a dataset from a ``time,status,x`` CSV file.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    CsvFormatError
        On a missing column, an unparsable cell, a negative time, an
        invalid status or an empty file.  The message names the row and
        column.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise CsvFormatError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = {c: header.index(c) for c in CSV_HEADER}
        time, status, x = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = {}
            for name, j in cols.items():
                if j >= len(row):
                    raise CsvFormatError(f"{path}: row {lineno}, column {name}: missing value")
                cell = row[j].strip()
                try:
                    values[name] = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {name}: non-numeric value {cell!r}"
                    ) from None
            if not math.isfinite(values["time"]) or values["time"] < 0:
                raise CsvFormatError(
                    f"{path}: row {lineno}, column time: negative or non-finite time"
                )
            if values["status"] not in (0.0, 1.0):
                raise CsvFormatError(
                    f"{path}: row {lineno}, column status: invalid status {row[cols['status']]!r}"
                )
            if not math.isfinite(values["x"]):
                raise CsvFormatError(f"{path}: row {lineno}, column x: non-finite value")
            time.append(values["time"])
            status.append(int(values["status"]))
            x.append(values["x"])
    if not time:
        raise CsvFormatError(f"{path}: empty file (header only)")
    return SurvivalDataset(time, status, x)


def _fmt(value):
    return format(float(value), ".12g")


def write_csv(data, path):
    """Write ``data`` as ``time,status,x`` CSV (UTF-8, LF, 12 significant digits).

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(data, path)
        return
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _write_rows(data, fh)


def _write_rows(data, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for t, d, x in zip(data.time, data.status, data.x):
        writer.writerow((_fmt(t), int(d), _fmt(x)))


@dataclass(frozen=True)
class SimulationConfig:
    """Design of the logistic / truncated-exponential simulation model.

    Attributes
    ----------
    beta0 : tuple of float
        Intercept and slope of the logistic probability of being uncured.
    gamma : tuple of float
        ``(gamma0, gamma1, gamma2)``; uncured lifetimes are exponential with
        rate ``exp(gamma0 + gamma1 x + gamma2 / (1 + 2 x**2))``.
    censoring_mean : float
        Mean of the exponential censoring time (independent of ``x``).
    n : int
        Sample size.
    seed : int
        64-bit seed.
    truncation : {'atom', 'cure'}
        Where the latent mass beyond the truncation point goes: an atom at
        ``tau`` or ``T = inf``.
    """

    beta0: tuple = (1.75, 2.0)
    gamma: tuple = (0.5, 0.5, 0.0)
    censoring_mean: float = 1.65
    n: int = 150
    seed: int = 0
    truncation: str = "atom"

    def __post_init__(self):
        if len(self.beta0) != 2 or len(self.gamma) != 3:
            raise ValueError("beta0 needs 2 entries and gamma needs 3")
        if not self.censoring_mean > 0:
            raise ValueError("censoring_mean must be positive")
        if int(self.n) < 2:
            raise ValueError("n must be at least 2")
        if self.truncation not in ("atom", "cure"):
            raise ValueError("truncation must be 'atom' or 'cure'")
        object.__setattr__(self, "beta0", tuple(float(b) for b in self.beta0))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "n", int(self.n))

    def rate(self, x):
        """Exponential rate of the uncured lifetime at covariate ``x``."""
        g0, g1, g2 = self.gamma
        x = np.asarray(x, dtype=float)
        return np.exp(g0 + g1 * x + g2 / (1.0 + 2.0 * x**2))

    def uncure_probability(self, x):
        b1, b2 = self.beta0
        return 1.0 / (1.0 + np.exp(-(b1 + b2 * np.asarray(x, dtype=float))))

    @property
    def tau(self):
        """Truncation point of the uncured lifetime distribution."""
        return truncation_point(self.gamma)

    def replace(self, **changes):
        fields = {
            "beta0": self.beta0,
            "gamma": self.gamma,
            "censoring_mean": self.censoring_mean,
            "n": self.n,
            "seed": self.seed,
            "truncation": self.truncation,
        }
        fields.update(changes)
        return SimulationConfig(**fields)


# (beta0, censoring_mean) for the two designed cure rates
DESIGNS = {
    0.2: ((1.75, 2.0), 1.65),
    0.3: ((1.1, 2.0), 1.45),
}


def design(cure_rate=0.2, gamma2=0.0, n=150, seed=0, truncation="atom"):
    """Configuration of one cell of the simulation grid (cure rate 0.2 or 0.3)."""
    beta0, cmean = DESIGNS[cure_rate]
    return SimulationConfig(
        beta0=beta0,
        gamma=(0.5, 0.5, float(gamma2)),
        censoring_mean=cmean,
        n=n,
        seed=seed,
        truncation=truncation,
    )


def truncation_point(gamma, level=TRUNCATION_LEVEL):
    """Quantile of order ``level`` of an exponential whose mean is the
    average (over ``X ~ U[-1, 1]``) of the conditional mean lifetimes.

    The average is a 129-point composite Simpson rule.
    """
    g0, g1, g2 = gamma
    grid = np.linspace(-1.0, 1.0, 129)
    mean_life = np.exp(-(g0 + g1 * grid + g2 / (1.0 + 2.0 * grid**2)))
    average = simpson(mean_life, x=grid) / 2.0
    return -average * math.log(1.0 - level)


@dataclass(frozen=True, eq=False)
class LatentDraws:
    """Unobserved quantities behind a simulated sample (debugging / tests)."""

    uncured: np.ndarray
    lifetime: np.ndarray
    censoring: np.ndarray
    tau: float = field(default=float("nan"))


def simulate(cfg, return_latent=False):
    """Draw a sample from the simulation design ``cfg``.

    Subject ``i`` consumes its own counter-based sub-stream of ``cfg.seed``,
    so the first ``m`` subjects do not change when ``cfg.n`` grows.
    """
    n = cfg.n
    u = np.empty((n, 4))
    for i in range(n):
        u[i] = raw_uniforms(cfg.seed, i, 4)
    x = 2.0 * u[:, 0] - 1.0
    uncured = u[:, 1] < cfg.uncure_probability(x)
    tau = cfg.tau
    lifetime = -np.log1p(-u[:, 2]) / cfg.rate(x)
    beyond = lifetime > tau
    if cfg.truncation == "atom":
        lifetime[beyond] = tau
    else:
        lifetime[beyond] = np.inf
    lifetime[~uncured] = np.inf
    censoring = -cfg.censoring_mean * np.log1p(-u[:, 3])
    status = (lifetime <= censoring).astype(np.int8)
    time = np.where(status == 1, lifetime, censoring)
    data = SurvivalDataset(time, status, x)
    if return_latent:
        return data, LatentDraws(uncured, lifetime, censoring, tau)
    return data


def true_latency_quantile(p, x, cfg):
    """Quantile of order ``p`` of the uncured lifetime law at covariate ``x``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    q = -math.log1p(-p) / float(cfg.rate(x))
    return min(q, cfg.tau)
