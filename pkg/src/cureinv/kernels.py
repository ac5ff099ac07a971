"""Kernel weights in the covariate and conditional subdistribution estimates.

For a covariate value ``x`` the Nadaraya-Watson weights

    w_i(x) = K((X_i - x) / h) / sum_j K((X_j - x) / h)

turn the indicators ``1{Y_i >= t, delta_i = k}`` into estimates of the
subdistribution tails ``H_k([t, inf) | x)``, k = 0 (censored) and 1 (event).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyNeighborhood, NoFeasibleBandwidth

BANDWIDTH_RATE = -2.0 / 7.0


def _epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _uniform(u):
    # open support keeps points at distance exactly h out of the neighbourhood
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, 0.5, 0.0)


KERNELS = {
    "epanechnikov": _epanechnikov,
    "uniform": _uniform,
}


def kernel_eval(family, u):
    """Kernel density ``K(u)``; scalar in, scalar out."""
    try:
        fn = KERNELS[family]
    except KeyError:
        raise ValueError(f"unknown kernel family {family!r}") from None
    out = fn(u)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth."""

    bandwidth: float
    family: str = "epanechnikov"

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.family not in KERNELS:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    def __call__(self, u):
        return KERNELS[self.family](u)


def fixed_bandwidth(c, n):
    """Bandwidth ``c * n**(-2/7)``."""
    if not c > 0:
        raise ValueError("bandwidth constant must be positive")
    if n < 1:
        raise ValueError("sample size must be positive")
    return float(c) * float(n) ** BANDWIDTH_RATE


def kernel_weights(x_sample, x, spec):
    """Normalised weights of every sample point at covariate ``x``.

    Raises
    ------
    EmptyNeighborhood
        If no sample point lies inside the kernel support around ``x``.
    """
    raw = spec((np.asarray(x_sample, dtype=float) - x) / spec.bandwidth)
    total = raw.sum()
    if not total > 0:
        raise EmptyNeighborhood(x)
    return raw / total


def weight_matrix(x_sample, x_eval, spec):
    """Row-normalised weight matrix ``W[i, j] = w_j(x_eval[i])``.

    Rows with an empty neighbourhood raise :class:`EmptyNeighborhood`
    carrying the row index.
    """
    x_sample = np.asarray(x_sample, dtype=float)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    raw = spec((x_sample[None, :] - x_eval[:, None]) / spec.bandwidth)
    totals = raw.sum(axis=1)
    empty = np.flatnonzero(~(totals > 0))
    if empty.size:
        i = int(empty[0])
        raise EmptyNeighborhood(x_eval[i], index=i)
    return raw / totals[:, None]


class StepFunction:
    """Tail function ``t -> G([t, inf))`` of a discrete (sub)distribution.

    Parameters
    ----------
    jump_times : array_like
        Strictly increasing support points.
    masses : array_like
        Non-negative mass at each support point.
    total : float, optional
        ``G((-inf, inf])``, the value before the first jump.  Defaults to
        the sum of ``masses``; a larger total leaves mass at infinity.
    """

    def __init__(self, jump_times, masses, total=None):
        jump_times = np.asarray(jump_times, dtype=float).reshape(-1)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        if jump_times.shape != masses.shape:
            raise ValueError("jump_times and masses must have the same length")
        if jump_times.size > 1 and np.any(np.diff(jump_times) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        if np.any(masses < 0):
            raise ValueError("masses must be non-negative")
        mass_sum = float(masses.sum())
        total = mass_sum if total is None else float(total)
        if total < mass_sum - 1e-12:
            raise ValueError("total must be at least the sum of the masses")
        self.jump_times = jump_times
        self.masses = masses
        self.total = total
        self._cum = np.concatenate(([0.0], np.cumsum(masses)))

    def __len__(self):
        return self.jump_times.size

    def tail(self, t):
        """``G([t, inf))``: includes the mass sitting at ``t``."""
        k = np.searchsorted(self.jump_times, t, side="left")
        out = self.total - self._cum[k]
        return np.clip(out, 0.0, None) if np.ndim(out) else max(float(out), 0.0)

    __call__ = tail

    def tail_open(self, t):
        """``G((t, inf))``: excludes the mass at ``t``."""
        k = np.searchsorted(self.jump_times, t, side="right")
        out = self.total - self._cum[k]
        return np.clip(out, 0.0, None) if np.ndim(out) else max(float(out), 0.0)

    def mass_at(self, t):
        """``G({t})``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.jump_times, t, side="left")
        times = np.append(self.jump_times, np.inf)
        masses = np.append(self.masses, 0.0)
        out = np.where(times[k] == t, masses[k], 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def mass_at_infinity(self):
        return max(self.total - float(self.masses.sum()), 0.0)

    def __repr__(self):
        return f"StepFunction(jumps={self.jump_times.size}, total={self.total:.6g})"


def _subdistribution(time, status, weights, k):
    keep = (status == k) & (weights > 0)
    times = time[keep]
    if times.size == 0:
        return StepFunction([], [], total=0.0)
    jumps, inverse = np.unique(times, return_inverse=True)
    masses = np.bincount(inverse, weights=weights[keep], minlength=jumps.size)
    return StepFunction(jumps, masses)


def estimate_subdistribution(data, k, x, spec):
    """Kernel estimate of ``H_k([t, inf) | x)`` as a :class:`StepFunction`.

    Jumps sit at the distinct observed times with ``delta == k`` and
    positive weight; tied records pool their weights.
    """
    if k not in (0, 1):
        raise ValueError("event class k must be 0 or 1")
    w = kernel_weights(data.x, x, spec)
    return _subdistribution(data.time, data.status, w, k)


def estimate_subdistributions(data, x, spec):
    """``(H_0, H_1)`` at ``x`` from one weight vector (totals sum to one)."""
    w = kernel_weights(data.x, x, spec)
    return (
        _subdistribution(data.time, data.status, w, 0),
        _subdistribution(data.time, data.status, w, 1),
    )


def cv_criterion(data, k, bandwidth, family="epanechnikov"):
    """Leave-one-out least-squares criterion for the class-``k`` subdistribution.

    ``n**-2 * sum_i sum_l (1{Y_i >= Y_l, delta_i = k} - H_k^(-i)([Y_l, inf) | X_i))**2``,
    i.e. the squared error integrated against the empirical law of ``Y``.
    Returns ``inf`` when a leave-one-out neighbourhood is empty.
    """
    spec = KernelSpec(bandwidth, family)
    x = data.x
    raw = spec((x[None, :] - x[:, None]) / spec.bandwidth)
    np.fill_diagonal(raw, 0.0)
    totals = raw.sum(axis=1)
    if np.any(~(totals > 0)):
        return np.inf
    w = raw / totals[:, None]
    ind = (data.time[:, None] >= data.time[None, :]) & (data.status[:, None] == k)
    ind = ind.astype(float)
    fitted = w @ ind
    return float(np.mean((ind - fitted) ** 2))


def default_cv_grid(n, size=20):
    """Log-spaced candidates in ``[0.5, 4] * n**(-2/7)``."""
    return np.geomspace(0.5, 4.0, size) * float(n) ** BANDWIDTH_RATE


def cv_bandwidth(data, grid=None, family="epanechnikov", return_scores=False):
    """Cross-validated bandwidth: average of the per-class CV minimisers.

    Ties are broken towards the earliest grid entry.
    """
    grid = default_cv_grid(data.n) if grid is None else np.asarray(grid, dtype=float)
    grid = np.atleast_1d(grid)
    if grid.size == 0:
        raise ValueError("bandwidth grid is empty")
    if np.any(~(grid > 0)):
        raise ValueError("bandwidth candidates must be positive")
    scores = np.array(
        [[cv_criterion(data, k, h, family) for h in grid] for k in (0, 1)]
    )
    if np.all(~np.isfinite(scores)):
        raise NoFeasibleBandwidth(
            "every candidate bandwidth leaves some observation without neighbours"
        )
    chosen = []
    for k in (0, 1):
        row = scores[k]
        if np.all(~np.isfinite(row)):
            raise NoFeasibleBandwidth(f"no feasible bandwidth for class {k}")
        chosen.append(grid[int(np.argmin(row))])
    h = 0.5 * (chosen[0] + chosen[1])
    if return_scores:
        return h, grid, scores
    return float(h)
