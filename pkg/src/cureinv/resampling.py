"""Naive bootstrap and the Monte-Carlo replication harness.

Every resample and every replicate owns a counter-based random stream, so
results do not depend on the order (or the process) in which tasks run.
"""

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from ._rng import derive_seed, substream
from .data import design as make_design
from .data import simulate, true_latency_quantile
from .exceptions import BootstrapUnstable, CureModelError
from .inversion import latency_quantile
from .kernels import KernelSpec, cv_bandwidth, estimate_subdistributions, fixed_bandwidth
from .likelihood import LOGISTIC, ParamBox, fit

log = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.25, 0.5, 0.75)
QUANTILE_X = 0.25


@dataclass(frozen=True)
class BandwidthRule:
    """How the bandwidth is chosen for a given sample.

    ``kind='c'`` gives ``h = value * n**(-2/7)``, ``kind='h'`` a fixed
    bandwidth and ``kind='cv'`` the cross-validated choice.
    """

    kind: str = "c"
    value: float = 3.0

    def __post_init__(self):
        if self.kind not in ("c", "h", "cv"):
            raise ValueError(f"unknown bandwidth rule {self.kind!r}")
        if self.kind != "cv" and not self.value > 0:
            raise ValueError("bandwidth constant must be positive")

    def resolve(self, data, family="epanechnikov"):
        if self.kind == "c":
            return KernelSpec(fixed_bandwidth(self.value, data.n), family)
        if self.kind == "h":
            return KernelSpec(self.value, family)
        return KernelSpec(cv_bandwidth(data, family=family), family)

    @property
    def label(self):
        return "cv" if self.kind == "cv" else f"{self.kind}={self.value:g}"


def _map(func, tasks, n_jobs):
    if n_jobs is None or n_jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    workers = min(int(n_jobs), os.cpu_count() or 1, len(tasks))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


@dataclass
class BootstrapResult:
    """Converged bootstrap estimates and their summaries."""

    replicates: np.ndarray
    variance: np.ndarray
    ci: np.ndarray
    failures: int
    alpha: float = 0.05

    @property
    def B(self):
        return len(self.replicates) + self.failures

    @property
    def std_error(self):
        return np.sqrt(np.diag(self.variance))

    def to_dict(self):
        return {
            "B": int(self.B),
            "failures": int(self.failures),
            "alpha": float(self.alpha),
            "variance": self.variance.tolist(),
            "std_error": self.std_error.tolist(),
            "ci": self.ci.tolist(),
            "replicates": self.replicates.tolist(),
        }


def _bootstrap_task(args):
    data, spec, rule, link, box, seed, b, fit_kwargs = args
    idx = substream(seed, b).integers(0, data.n, size=data.n)
    sample = data.take(idx)
    try:
        s = rule.resolve(sample, spec.family) if rule is not None else spec
        res = fit(sample, s, link, box, seed=seed, **fit_kwargs)
    except CureModelError as exc:
        log.info("bootstrap resample %d failed: %s", b, exc)
        return None
    return res.beta_hat if res.converged else None


def bootstrap(data, spec, link=LOGISTIC, box=None, B=250, seed=0, rule=None,
              alpha=0.05, n_jobs=1, **fit_kwargs):
    """Naive bootstrap of the incidence estimate.

    Parameters
    ----------
    data : SurvivalDataset
    spec : KernelSpec
        Kernel used on every resample.  Its bandwidth is reused unless
        ``rule`` is given, in which case the rule (for instance
        cross-validation) is re-applied to each resample.
    B : int
        Number of resamples, at least 2.
    seed : int
        Resample ``b`` draws its row indices from sub-stream ``b``.
    alpha : float
        Level of the percentile intervals.

    Raises
    ------
    BootstrapUnstable
        If more than half of the refits fail or do not converge.
    """
    if B < 2:
        raise ValueError("the bootstrap needs at least two resamples")
    box = ParamBox() if box is None else box
    tasks = [(data, spec, rule, link, box, seed, b, fit_kwargs) for b in range(B)]
    out = _map(_bootstrap_task, tasks, n_jobs)
    good = [r for r in out if r is not None]
    failures = B - len(good)
    if failures > B / 2:
        raise BootstrapUnstable(f"{failures} of {B} bootstrap refits failed")
    reps = np.array(good, dtype=float).reshape(len(good), -1)
    if len(reps) > 1:
        var = np.cov(reps, rowvar=False, ddof=1)
        var = 0.5 * (var + var.T)
    else:
        var = np.zeros((reps.shape[1], reps.shape[1]))
    ci = np.quantile(reps, [alpha / 2, 1 - alpha / 2], axis=0).T
    return BootstrapResult(reps, np.atleast_2d(var), ci, failures, alpha)


@dataclass(frozen=True)
class McCell:
    """One cell of the simulation grid."""

    cure_rate: float = 0.2
    gamma2: float = 0.0
    n: int = 150
    rule: BandwidthRule = BandwidthRule()

    def config(self, seed):
        return make_design(self.cure_rate, self.gamma2, self.n, seed)


@dataclass
class McCellResult:
    cell: McCell
    truth: dict
    draws: dict
    failures: int = 0
    defective: dict = field(default_factory=dict)

    def summary(self, param):
        est = np.asarray(self.draws[param], dtype=float)
        est = est[np.isfinite(est)]
        err = est - self.truth[param]
        if err.size == 0:
            return float("nan"), float("nan"), float("nan")
        bias = float(err.mean())
        mse = float(np.mean(err * err))
        var = float(np.mean((est - est.mean()) ** 2))
        return bias, mse, var


@dataclass
class McReport:
    """Monte-Carlo bias and MSE for every cell, with replicate-level draws."""

    cells: list
    reps: int
    seed: int

    PARAMS = ("beta1", "beta2") + tuple(f"q{p:g}" for p in QUANTILE_LEVELS) + ("cure",)

    def cell(self, index=0):
        return self.cells[index]

    def records(self):
        rows = []
        for res in self.cells:
            c = res.cell
            for p in self.PARAMS:
                bias, mse, var = res.summary(p)
                rows.append({
                    "n": c.n,
                    "gamma2": c.gamma2,
                    "cure_rate": c.cure_rate,
                    "param": p,
                    "rule": c.rule.label,
                    "bias": bias,
                    "mse": mse,
                    "variance": var,
                    "replicates": int(np.isfinite(res.draws[p]).sum()),
                    "failures": res.failures,
                })
        return rows

    def to_csv(self, path):
        """Table layout: ``n, gamma2, param, rule, bias, mse`` (plus cure_rate).

        ``path`` may also be an open text stream.
        """
        if hasattr(path, "write"):
            self._write_csv(path)
            return
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            self._write_csv(fh)

    def _write_csv(self, fh):
        cols = ("n", "gamma2", "param", "rule", "bias", "mse", "cure_rate")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in self.records():
            w.writerow([format(r[c], ".12g") if isinstance(r[c], float) else r[c] for c in cols])

    def to_dict(self):
        return {
            "reps": self.reps,
            "seed": self.seed,
            "records": self.records(),
            "cells": [
                {
                    "n": r.cell.n,
                    "gamma2": r.cell.gamma2,
                    "cure_rate": r.cell.cure_rate,
                    "rule": r.cell.rule.label,
                    "failures": r.failures,
                    "defective": dict(r.defective),
                    "truth": dict(r.truth),
                    "draws": {k: [None if not np.isfinite(v) else float(v) for v in vals]
                              for k, vals in r.draws.items()},
                }
                for r in self.cells
            ],
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def _mc_task(args):
    cell, seed, r, link, box, fit_kwargs = args
    cfg = cell.config(derive_seed(seed, r))
    data = simulate(cfg)
    nan = float("nan")
    try:
        spec = cell.rule.resolve(data)
        res = fit(data, spec, link, box, seed=seed, **fit_kwargs)
    except CureModelError as exc:
        log.info("replicate %d failed: %s", r, exc)
        return None
    if not res.converged:
        return None
    beta = res.beta_hat
    out = {"beta1": beta[0], "beta2": beta[1]}
    out["cure"] = float(np.mean(1.0 - link(data.x, beta)))
    try:
        H0, H1 = estimate_subdistributions(data, QUANTILE_X, spec)
        phi_x = float(link(QUANTILE_X, beta))
        for p in QUANTILE_LEVELS:
            q = latency_quantile(H0, H1, phi_x, p)
            out[f"q{p:g}"] = q.value
            out[f"q{p:g}_defective"] = q.defective
    except CureModelError:
        for p in QUANTILE_LEVELS:
            out[f"q{p:g}"] = nan
            out[f"q{p:g}_defective"] = True
    return out


def run_mc(grid, reps, seed=0, link=LOGISTIC, box=None, n_jobs=1, **fit_kwargs):
    """Replicate the simulation study over ``grid`` (a list of :class:`McCell`).

    Replicate ``r`` of every cell simulates from the seed
    ``derive_seed(seed, r)``, so cells share common random numbers.
    Failed or non-converged fits are dropped and counted.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    box = ParamBox() if box is None else box
    grid = [grid] if isinstance(grid, McCell) else list(grid)
    results = []
    for cell in grid:
        tasks = [(cell, seed, r, link, box, fit_kwargs) for r in range(reps)]
        out = [o for o in _map(_mc_task, tasks, n_jobs) if o is not None]
        cfg = cell.config(seed)
        truth = {"beta1": cfg.beta0[0], "beta2": cfg.beta0[1], "cure": cell.cure_rate}
        for p in QUANTILE_LEVELS:
            truth[f"q{p:g}"] = true_latency_quantile(p, QUANTILE_X, cfg)
        draws = {k: np.array([o[k] for o in out], dtype=float) for k in McReport.PARAMS}
        defective = {f"q{p:g}": int(sum(o[f"q{p:g}_defective"] for o in out))
                     for p in QUANTILE_LEVELS}
        results.append(McCellResult(cell, truth, draws, reps - len(out), defective))
    return McReport(results, reps, seed)


def qq_data(draws, coordinate=None):
    """Normal QQ pairs for standardised replicate draws.

    ``draws`` is either an array of estimates or a :class:`McReport`, in
    which case ``coordinate`` names the parameter (``'beta1'`` ...) of the
    first cell.  Returns an ``(m, 2)`` array of (normal quantile, sorted
    standardised draw) using Blom plotting positions.
    """
    if isinstance(draws, McReport):
        draws = draws.cells[0].draws[coordinate or "beta1"]
    x = np.asarray(draws, dtype=float)
    if x.ndim == 2:
        x = x[:, 0 if coordinate is None else int(coordinate)]
    x = x[np.isfinite(x)]
    if x.size < 20:
        raise ValueError(f"QQ data needs at least 20 replicates, got {x.size}")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise ValueError("replicates have zero variance; QQ data is degenerate")
    m = x.size
    theo = norm.ppf((np.arange(1, m + 1) - 0.375) / (m + 0.25))
    return np.column_stack([theo, np.sort((x - x.mean()) / sd)])


def qq_correlation(draws, coordinate=None):
    """Correlation of the QQ pairs; close to one for normal draws."""
    qq = qq_data(draws, coordinate)
    return float(np.corrcoef(qq[:, 0], qq[:, 1])[0, 1])
