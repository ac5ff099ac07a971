"""Independent reference implementations used as test oracles.

Everything here is written directly from the textbook definitions with
plain Python loops, without sharing code with the package.
"""

import math

import numpy as np


def epanechnikov_weights(x_sample, x, h):
    raw = []
    for xi in x_sample:
        u = (xi - x) / h
        raw.append(0.75 * (1 - u * u) if abs(u) <= 1 else 0.0)
    total = sum(raw)
    return [r / total for r in raw]


def weighted_km(times, status, weights):
    """Weighted Kaplan-Meier survival of the event time.

    Returns a list of ``(t, S(t))`` at the distinct event times, where
    ``S(t) = P(T > t)``.  At a tied time events are removed before
    censorings, i.e. censored records at ``t`` are still at risk.
    """
    out = []
    surv = 1.0
    for t in sorted(set(t for t, d in zip(times, status) if d == 1)):
        at_risk = sum(w for s, w in zip(times, weights) if s >= t)
        events = sum(w for s, d, w in zip(times, status, weights) if s == t and d == 1)
        if at_risk > 0:
            surv *= 1 - events / at_risk
        out.append((t, surv))
    return out


def km_survival_at(curve, t):
    value = 1.0
    for s, v in curve:
        if s <= t:
            value = v
    return value


def cv_criterion_loops(time, status, x, k, h):
    """Leave-one-out CV criterion by explicit loops."""
    n = len(time)
    total = 0.0
    for i in range(n):
        raw = []
        for j in range(n):
            if j == i:
                raw.append(0.0)
                continue
            u = (x[j] - x[i]) / h
            raw.append(0.75 * (1 - u * u) if abs(u) <= 1 else 0.0)
        s = sum(raw)
        if s <= 0:
            return math.inf
        for l in range(n):
            fitted = sum(raw[j] / s for j in range(n) if time[j] >= time[l] and status[j] == k)
            ind = 1.0 if (time[i] >= time[l] and status[i] == k) else 0.0
            total += (ind - fitted) ** 2
    return total / (n * n)


def irls_logistic(x, y, iters=50):
    """Textbook IRLS for ``logit P(y=1) = b0 + b1 x``."""
    X = np.column_stack([np.ones_like(x), x])
    b = np.zeros(2)
    for _ in range(iters):
        p = 1 / (1 + np.exp(-X @ b))
        w = p * (1 - p)
        z = X @ b + (y - p) / w
        b_new = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * z))
        if np.max(np.abs(b_new - b)) < 1e-12:
            return b_new
        b = b_new
    return b
