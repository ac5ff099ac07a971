"""Product integrals and the inversion formulae.

Given kernel estimates of the subdistributions ``H_0`` (censored) and
``H_1`` (events) at a covariate value, the censoring law follows from the
conditional Kaplan-Meier construction

    Lambda_C(ds) = H_0(ds) / H([s, inf)),      F_C((t, inf)) = prod_{s <= t} (1 - Lambda_C(ds)),

and, for a probability ``phi`` of being uncured, the latency law of the
uncured from

    Lambda_T0(ds) = H_1(ds) / (H([s, inf)) - (1 - phi) F_C([s, inf))),
    F_T0((t, inf)) = prod_{s <= t} (1 - Lambda_T0(ds)).

At a time shared by events and censorings, events are processed first:
``F_C([s, inf))`` excludes the censoring mass at ``s`` while ``H([s, inf))``
includes both.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import EmptyNeighborhood, RiskSetZero
from .kernels import StepFunction

DENOMINATOR_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class HazardMeasure:
    """Discrete cumulative hazard: increments in [0, 1] at increasing times."""

    jump_times: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.jump_times, dtype=float).reshape(-1)
        d = np.asarray(self.increments, dtype=float).reshape(-1)
        if t.shape != d.shape:
            raise ValueError("jump_times and increments must have the same length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        if np.any((d < 0) | (d > 1)):
            raise ValueError("hazard increments must lie in [0, 1]")
        object.__setattr__(self, "jump_times", t)
        object.__setattr__(self, "increments", d)

    def survival(self):
        """The survival law ``prod (1 - dLambda)`` as a :class:`StepFunction`."""
        after = np.cumprod(1.0 - self.increments)
        before = np.concatenate(([1.0], after[:-1]))
        return StepFunction(self.jump_times, before - after, total=1.0)


def product_integral(hz, t):
    """``prod_{s <= t} (1 - dLambda(s))`` over the jumps of ``hz``."""
    factors = np.concatenate(([1.0], np.cumprod(1.0 - hz.increments)))
    k = np.searchsorted(hz.jump_times, t, side="right")
    out = factors[k]
    return float(out) if np.ndim(out) == 0 else out


def _risk_set(H0, H1, t):
    return H0.tail(t) + H1.tail(t)


def censoring_hazard(H0, H1):
    """Hazard of the censoring time: ``H_0({s}) / H([s, inf))``."""
    s = H0.jump_times
    if s.size == 0:
        return HazardMeasure([], [])
    risk = _risk_set(H0, H1, s)
    if np.any(risk <= 0):
        bad = float(s[np.argmax(risk <= 0)])
        raise RiskSetZero(f"empty risk set at censoring time {bad:.6g}")
    return HazardMeasure(s, np.clip(H0.masses / risk, 0.0, 1.0))


def censoring_survival(H0, H1, t):
    """``F_C((t, inf) | x)`` from the subdistribution estimates at ``x``."""
    return product_integral(censoring_hazard(H0, H1), t)


def _censoring_left_tail(H0, H1, s):
    # F_C([s, inf)): product over censoring jumps strictly before s
    hz = censoring_hazard(H0, H1)
    factors = np.concatenate(([1.0], np.cumprod(1.0 - hz.increments)))
    return factors[np.searchsorted(hz.jump_times, s, side="left")]


@dataclass(frozen=True, eq=False)
class LatencyFit:
    """Latency hazard at one covariate value plus numerical diagnostics.

    ``floor_times`` lists event times where the raw denominator fell below
    the floor; ``capped_times`` those where the increment was capped at one.
    """

    hazard: HazardMeasure
    floor_times: np.ndarray
    capped_times: np.ndarray

    @property
    def horizon(self):
        t = self.hazard.jump_times
        return float(t[-1]) if t.size else float("nan")


def latency_hazard(H0, H1, phi_x):
    """Hazard of the uncured lifetime for uncure probability ``phi_x``."""
    if not 0.0 < phi_x <= 1.0:
        raise ValueError(f"phi_x must lie in (0, 1], got {phi_x}")
    s = H1.jump_times
    if s.size == 0:
        empty = np.array([])
        return LatencyFit(HazardMeasure([], []), empty, empty)
    a = H1.masses
    denom = _risk_set(H0, H1, s) - (1.0 - phi_x) * _censoring_left_tail(H0, H1, s)
    slack = denom - a
    ok = slack > DENOMINATOR_FLOOR
    inc = np.ones_like(a)
    inc[ok] = a[ok] / denom[ok]
    return LatencyFit(
        HazardMeasure(s, np.clip(inc, 0.0, 1.0)),
        s[denom < DENOMINATOR_FLOOR],
        s[~ok],
    )


def latency_survival(H0, H1, phi_x, t):
    """``F_T0((t, inf) | x)`` for uncure probability ``phi_x``.

    Constant beyond the largest event time; the remaining mass is read as
    cure.
    """
    return product_integral(latency_hazard(H0, H1, phi_x).hazard, t)


def latency_distribution(H0, H1, phi_x):
    """Latency law as a :class:`StepFunction` of total mass one.

    Whatever survives the last event time is the defect, reported as
    ``mass_at_infinity``.
    """
    return latency_hazard(H0, H1, phi_x).hazard.survival()


class QuantileEstimate(NamedTuple):
    value: float
    defective: bool


def latency_quantile(H0, H1, phi_x, p):
    """Generalised inverse of the latency distribution function at level ``p``.

    Returns the earliest event time at which the distribution function
    reaches ``p``.  When it never does, the largest event time is returned
    with ``defective=True``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    hz = latency_hazard(H0, H1, phi_x).hazard
    if hz.jump_times.size == 0:
        return QuantileEstimate(float("nan"), True)
    cdf = 1.0 - np.cumprod(1.0 - hz.increments)
    hit = np.flatnonzero(cdf >= p - 1e-12)
    if hit.size == 0:
        return QuantileEstimate(float(hz.jump_times[-1]), True)
    return QuantileEstimate(float(hz.jump_times[hit[0]]), False)


class CurveTable:
    """Parameter-free ingredients of the inversion formula at many covariates.

    Row ``i`` holds, for the evaluation point ``x_eval[i]``, the distinct
    observed times with positive kernel weight (padded with ``inf``), the
    event mass ``a`` and censoring mass ``c`` at each, the risk set
    ``H([s, inf))`` and the left tail ``F_C([s, inf))``.  Only ``phi``
    remains to be plugged in, which is what makes repeated likelihood
    evaluations cheap.
    """

    def __init__(self, data, spec, x_eval=None, chunk=512):
        own = x_eval is None
        x_eval = data.x if own else np.atleast_1d(np.asarray(x_eval, dtype=float))
        order = np.lexsort((-data.status.astype(int), data.time))
        ts = data.time[order]
        ds = data.status[order].astype(float)
        xs = data.x[order]
        uniq, starts, group = np.unique(ts, return_index=True, return_inverse=True)

        rows = []
        for lo in range(0, len(x_eval), chunk):
            xe = x_eval[lo:lo + chunk]
            raw = spec((xs[None, :] - xe[:, None]) / spec.bandwidth)
            totals = raw.sum(axis=1)
            empty = np.flatnonzero(~(totals > 0))
            if empty.size:
                i = lo + int(empty[0])
                raise EmptyNeighborhood(x_eval[i], index=i)
            w = raw / totals[:, None]
            a = np.add.reduceat(w * ds, starts, axis=1)
            c = np.add.reduceat(w * (1.0 - ds), starts, axis=1)
            rows.append((a, c))
        a_full = np.concatenate([r[0] for r in rows])
        c_full = np.concatenate([r[1] for r in rows])
        mask = (a_full + c_full) > 0
        width = int(mask.sum(axis=1).max())
        pos = np.cumsum(mask, axis=1) - 1
        r_idx, g_idx = np.nonzero(mask)
        p_idx = pos[r_idx, g_idx]
        shape = (len(x_eval), width)
        self.times = np.full(shape, np.inf)
        self.a = np.zeros(shape)
        self.c = np.zeros(shape)
        self.times[r_idx, p_idx] = uniq[g_idx]
        self.a[r_idx, p_idx] = a_full[r_idx, g_idx]
        self.c[r_idx, p_idx] = c_full[r_idx, g_idx]
        self.htail = np.cumsum((self.a + self.c)[:, ::-1], axis=1)[:, ::-1]
        g = np.ones(shape)
        hit = self.c > 0
        g[hit] = 1.0 - self.c[hit] / self.htail[hit]
        self.fc_after = np.cumprod(g, axis=1)
        self.fc_left = np.concatenate([np.ones((shape[0], 1)), self.fc_after[:, :-1]], axis=1)
        self.x_eval = x_eval
        self.event_mask = self.a > 0
        last = self.event_mask.shape[1] - 1 - np.argmax(self.event_mask[:, ::-1], axis=1)
        self.last_event = np.zeros_like(self.event_mask)
        has = self.event_mask.any(axis=1)
        self.last_event[np.flatnonzero(has), last[has]] = True
        if own:
            # subject i always carries weight in its own row (K(0) > 0)
            unsorted_group = np.empty(data.n, dtype=np.intp)
            unsorted_group[order] = group
            self.own = pos[np.arange(data.n), unsorted_group]
            self.status = data.status.astype(bool)
        else:
            self.own = None
            self.status = None

    def closure_columns(self, proper=True):
        """Column per row at which the latency law is closed (``-1``: never).

        Closing means forcing the hazard increment to one at the last
        event time with weight in the row, which makes the law proper.
        """
        out = np.full(self.shape[0], -1, dtype=np.int64)
        if proper:
            has = self.last_event.any(axis=1)
            out[has] = np.argmax(self.last_event[has], axis=1)
        return out

    @property
    def shape(self):
        return self.times.shape

    def latency(self, phi, proper=False):
        """Latency survival factors for uncure probabilities ``phi`` (one per row).

        Returns a dict with the denominator ``T1``, the per-time survival
        factors, the survival after each time, and masks of the times where
        the increment is regular (``ok``) or capped at one (``capped``).
        """
        phi = np.asarray(phi, dtype=float).reshape(-1, 1)
        t1 = self.htail - (1.0 - phi) * self.fc_left
        slack = t1 - self.a
        ok = self.event_mask & (slack > DENOMINATOR_FLOOR)
        if proper:
            ok &= ~self.last_event
        capped = self.event_mask & ~ok
        factor = np.ones_like(t1)
        np.divide(slack, t1, out=factor, where=ok)
        factor[capped] = 0.0
        after = np.cumprod(factor, axis=1)
        return {
            "t1": t1,
            "slack": slack,
            "factor": factor,
            "after": after,
            "ok": ok,
            "capped": capped,
            "floor": self.event_mask & (t1 < DENOMINATOR_FLOOR),
        }

    def plateau(self):
        """Model-free cure probability: the conditional Kaplan-Meier
        estimate of ``T`` evaluated beyond the last event time."""
        return self.latency(np.ones(self.shape[0]))["after"][:, -1]
