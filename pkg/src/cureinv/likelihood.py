"""Profile-free semiparametric likelihood for the incidence parameter.

For a parameter ``beta`` the latency law at each ``X_i`` is obtained by
inverting the kernel subdistribution estimates (see :mod:`cureinv.inversion`);
the log-likelihood is

    sum_i delta_i [log phi_i + log F_T0({Y_i} | X_i)]
          + (1 - delta_i) log[phi_i F_T0((Y_i, inf) | X_i) + 1 - phi_i].

``fit`` maximises it with Nelder-Mead, started from a two-stage logistic
initialisation.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._rng import substream
from .exceptions import NewtonDivergence, SeparationError
from .inversion import DENOMINATOR_FLOOR, CurveTable

try:
    from numba import njit
except ImportError:  # pragma: no cover - the numpy path is used instead
    njit = None

log = logging.getLogger(__name__)

ATOM_FLOOR = 1e-300
POLISH_STEP = 0.025
POLISH_ROUNDS = 3


def _loglik_rows(phi, htail, fc_left, a, close, own, event):
    # Row i only needs the product integral up to subject i's own column.
    total = 0.0
    floored = 0
    for i in range(phi.shape[0]):
        p = phi[i]
        before = 1.0
        own_factor = 1.0
        for j in range(own[i] + 1):
            aj = a[i, j]
            if j == close[i]:
                factor = 0.0
            elif aj <= 0.0:
                continue
            else:
                t1 = htail[i, j] - (1.0 - p) * fc_left[i, j]
                slack = t1 - aj
                factor = slack / t1 if slack > DENOMINATOR_FLOOR else 0.0
            if j == own[i]:
                own_factor = factor
            else:
                before *= factor
        if event[i]:
            atom = before * (1.0 - own_factor)
            if atom < ATOM_FLOOR:
                atom = ATOM_FLOOR
                floored += 1
            total += np.log(p) + np.log(atom)
        else:
            mass = p * before * own_factor + 1.0 - p
            if mass < ATOM_FLOOR:
                mass = ATOM_FLOOR
                floored += 1
            total += np.log(mass)
    return total, floored


def _loglik_many(phis, htail, fc_left, a, close, own, event):
    out = np.empty(phis.shape[0])
    for g in range(phis.shape[0]):
        out[g] = _loglik_rows(phis[g], htail, fc_left, a, close, own, event)[0]
    return out


if njit is not None:
    _loglik_rows = njit(cache=True, nogil=True)(_loglik_rows)
    _loglik_many = njit(cache=True, nogil=True)(_loglik_many)


class CureLink:
    """Parametric model for the probability ``phi(x, beta)`` of being uncured.

    ``kind='logistic'`` gives ``phi = expit(beta_1 + beta_2 x)``;
    ``kind='constant'`` ignores ``beta`` and returns ``value`` (zero gradient),
    which is only useful to exercise score identities.
    """

    def __init__(self, kind="logistic", value=None):
        if kind not in ("logistic", "constant"):
            raise ValueError(f"unknown link {kind!r}")
        if kind == "constant":
            if value is None or not 0.0 < value <= 1.0:
                raise ValueError("a constant link needs a value in (0, 1]")
        self.kind = kind
        self.value = value
        self.dim = 2

    def __call__(self, x, beta):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape, float(self.value))
        b = np.asarray(beta, dtype=float)
        eta = b[0] + b[1] * x
        return 0.5 * (1.0 + np.tanh(0.5 * eta))

    def gradient(self, x, beta):
        """``d phi / d beta`` as an array of shape ``(len(x), dim)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros((x.size, self.dim))
        phi = self(x, beta)
        w = phi * (1.0 - phi)
        return np.column_stack([w, w * x])

    def __repr__(self):
        if self.kind == "constant":
            return f"CureLink('constant', value={self.value})"
        return "CureLink('logistic')"


LOGISTIC = CureLink()


@dataclass(frozen=True)
class ParamBox:
    """Compact box of admissible parameters."""

    lower: tuple = (-10.0, -10.0)
    upper: tuple = (10.0, 10.0)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box needs lower < upper coordinatewise")
        object.__setattr__(self, "lower", tuple(lo))
        object.__setattr__(self, "upper", tuple(hi))

    @property
    def width(self):
        return np.asarray(self.upper) - np.asarray(self.lower)

    def project(self, beta):
        return np.clip(beta, self.lower, self.upper)

    def on_boundary(self, beta, tol=1e-6):
        beta = np.asarray(beta, dtype=float)
        return bool(
            np.any(np.abs(beta - np.asarray(self.lower)) < tol)
            or np.any(np.abs(beta - np.asarray(self.upper)) < tol)
        )

    def bounds(self):
        return list(zip(self.lower, self.upper))


class Likelihood:
    """Log-likelihood and score for one dataset and bandwidth.

    All parameter-free work (kernel weights, risk sets, censoring law) is
    done once at construction.
    """

    def __init__(self, data, spec, link=LOGISTIC, proper=True):
        self.proper = proper
        self.data = data
        self.spec = spec
        self.link = link
        self.table = CurveTable(data, spec)
        rows = np.arange(data.n)
        self._rows = rows
        self._own = self.table.own
        self._event = data.status.astype(bool)
        self._kernel_args = (
            np.ascontiguousarray(self.table.htail),
            np.ascontiguousarray(self.table.fc_left),
            np.ascontiguousarray(self.table.a),
            np.ascontiguousarray(self.table.closure_columns(proper), dtype=np.int64),
            np.ascontiguousarray(self._own, dtype=np.int64),
            np.ascontiguousarray(self._event),
        )
        self.evals = 0

    def _pieces(self, beta):
        phi = self.link(self.data.x, beta)
        cur = self.table.latency(phi, proper=self.proper)
        r, k = self._rows, self._own
        full = cur["after"]
        after = full[r, k]
        factor = cur["factor"][r, k]
        before = np.where(k > 0, full[r, np.maximum(k - 1, 0)], 1.0)
        return phi, cur, before, after, factor

    def value(self, beta):
        """Log-likelihood at ``beta``."""
        self.evals += 1
        phi = np.ascontiguousarray(self.link(self.data.x, beta), dtype=float)
        total, _ = _loglik_rows(phi, *self._kernel_args)
        return float(total)

    def values(self, betas):
        """Log-likelihood at each row of ``betas`` (shape ``(m, 2)``)."""
        betas = np.atleast_2d(np.asarray(betas, dtype=float))
        x = self.data.x
        phis = np.ascontiguousarray(
            np.stack([self.link(x, b) for b in betas]) if self.link.kind == "constant"
            else 0.5 * (1.0 + np.tanh(0.5 * (betas[:, :1] + betas[:, 1:2] * x[None, :])))
        )
        self.evals += len(betas)
        return _loglik_many(phis, *self._kernel_args)

    def evaluate(self, beta):
        """``(loglik, diagnostics)`` at ``beta``."""
        self.evals += 1
        phi, cur, before, after, factor = self._pieces(beta)
        ev = self._event
        atom = before[ev] * (1.0 - factor[ev])
        mass = phi[~ev] * after[~ev] + 1.0 - phi[~ev]
        floored = int(np.sum(atom < ATOM_FLOOR) + np.sum(mass < ATOM_FLOOR))
        terms = np.empty(self.data.n)
        terms[ev] = np.log(phi[ev]) + np.log(np.maximum(atom, ATOM_FLOOR))
        terms[~ev] = np.log(np.maximum(mass, ATOM_FLOOR))
        diag = {
            "atom_floor": floored,
            "denominator_floor": int(cur["floor"].sum()),
            "capped": int(cur["capped"].sum()),
        }
        return float(np.sum(terms)), diag

    def score(self, beta):
        """Gradient of the log-likelihood with respect to ``beta``.

        Exact derivative of the (floored, capped) criterion used by
        :meth:`value`: a capped hazard increment is locally constant.
        """
        phi, cur, before, after, factor = self._pieces(beta)
        table = self.table
        t1 = cur["t1"]
        ok = cur["ok"]
        # d log(1 - dLambda(s)) / d phi at regular event times
        dlog = np.zeros_like(t1)
        dlog[ok] = table.fc_left[ok] * table.a[ok] / (t1[ok] * cur["slack"][ok])
        cum = np.cumsum(dlog, axis=1)
        r, k = self._rows, self._own
        cum_after = cum[r, k]
        cum_before = cum_after - dlog[r, k]

        ev = self._event
        s = np.empty(self.data.n)
        atom = before * (1.0 - factor)
        live = ev & (atom >= ATOM_FLOOR)
        own_ok = ok[r, k]
        s[ev] = 1.0 / phi[ev]
        own_term = np.where(own_ok, table.fc_left[r, k] / np.where(own_ok, t1[r, k], 1.0), 0.0)
        s[live] += cum_before[live] - own_term[live]
        cens = ~ev
        v = phi[cens] * after[cens] + 1.0 - phi[cens]
        live_c = v >= ATOM_FLOOR
        sc = np.zeros(v.shape)
        sc[live_c] = (after[cens][live_c] - 1.0
                      + phi[cens][live_c] * after[cens][live_c] * cum_after[cens][live_c]) / v[live_c]
        s[cens] = sc
        grad_phi = self.link.gradient(self.data.x, beta)
        return s @ grad_phi


def loglik(data, spec, link, beta):
    """Log-likelihood of ``beta`` for ``data`` with kernel ``spec``."""
    return Likelihood(data, spec, link).value(beta)


def score(data, spec, link, beta):
    """Analytic gradient of :func:`loglik` with respect to ``beta``."""
    return Likelihood(data, spec, link).score(beta)


def _design(x):
    return np.column_stack([np.ones_like(x), x])


def _weighted_logistic(x, target, start, box=None, tol=1e-8, max_iter=100):
    """Maximise ``sum target*log(phi) + (1-target)*log(1-phi)`` by damped Newton.

    Returns ``(beta, hit_boundary)``.
    """
    design = _design(np.asarray(x, dtype=float))
    beta = np.asarray(start, dtype=float).copy()
    if box is not None:
        beta = box.project(beta)

    def objective(b):
        eta = design @ b
        # log(expit(eta)) and log(1 - expit(eta)) without overflow
        return float(np.sum(target * -np.logaddexp(0.0, -eta) + (1 - target) * -np.logaddexp(0.0, eta)))

    current = objective(beta)
    hit = False
    for _ in range(max_iter):
        eta = design @ beta
        p = 0.5 * (1.0 + np.tanh(0.5 * eta))
        grad = design.T @ (target - p)
        if np.max(np.abs(grad)) < tol:
            return beta, hit
        hess = (design * (p * (1 - p))[:, None]).T @ design
        try:
            step = np.linalg.solve(hess + 1e-12 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            if box is not None:
                clipped = box.project(cand)
                if np.any(clipped != cand):
                    hit = True
                cand = clipped
            val = objective(cand)
            if val >= current - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        if np.max(np.abs(cand - beta)) < 1e-14:
            return cand, hit
        beta, current = cand, val
    if box is not None and hit:
        return beta, True
    raise NewtonDivergence("Newton iterations did not converge in the allotted steps")


def init_stage1(data, link=LOGISTIC, box=None):
    """Logistic regression of the event indicator on ``x``.

    The indicator stands in for the unobserved uncured label.
    """
    if link.kind != "logistic":
        raise ValueError("the logistic start needs a logistic link")
    d = data.status.astype(float)
    if d.min() == d.max():
        raise SeparationError(
            "all event indicators are equal; a larger sample with both events "
            "and censorings is needed"
        )
    beta, _ = _weighted_logistic(data.x, d, np.zeros(2), box=box)
    return beta


def uncure_weights(data, spec):
    """Model-free probability of being uncured at each ``X_i``."""
    return 1.0 - CurveTable(data, spec).plateau()


def init_stage2(data, spec, link=LOGISTIC, beta_start=None, box=None, return_flag=False):
    """Logistic fit to the model-free uncured probabilities.

    Maximises ``sum pi_i log phi(X_i, b) + (1 - pi_i) log(1 - phi(X_i, b))``
    with ``pi_i = 1 - cure plateau at X_i``.  The criterion is concave; a
    diverging solution (all ``pi_i`` equal to one, say) stops on the box.
    """
    if link.kind != "logistic":
        raise ValueError("the logistic start needs a logistic link")
    start = np.zeros(2) if beta_start is None else np.asarray(beta_start, dtype=float)
    if not np.all(np.isfinite(start)):
        raise ValueError("beta_start must be finite")
    pi = np.clip(uncure_weights(data, spec), 0.0, 1.0)
    box = ParamBox() if box is None else box
    beta, hit = _weighted_logistic(data.x, pi, start, box=box)
    if return_flag:
        return beta, hit
    return beta


@dataclass
class FitResult:
    """Outcome of :func:`fit`."""

    beta_hat: np.ndarray
    loglik: float
    init_trace: tuple
    bandwidth: float
    converged: bool
    evals: int
    at_boundary: bool = False
    floor_diagnostics: dict = field(default_factory=dict)
    starts: list = field(default_factory=list)

    @property
    def floor_count(self):
        return int(self.floor_diagnostics.get("denominator_floor", 0)
                   + self.floor_diagnostics.get("atom_floor", 0))

    def to_dict(self):
        return {
            "beta_hat": [float(b) for b in self.beta_hat],
            "loglik": float(self.loglik),
            "init_trace": {
                "stage1": [float(b) for b in self.init_trace[0]],
                "stage2": [float(b) for b in self.init_trace[1]],
            },
            "bandwidth": float(self.bandwidth),
            "converged": bool(self.converged),
            "evals": int(self.evals),
            "at_boundary": bool(self.at_boundary),
            "diagnostics": {k: int(v) for k, v in self.floor_diagnostics.items()},
        }


def _nelder_mead(lik, start, box, max_evals, xtol, step=None):
    neg = lambda b: -lik.value(b)  # noqa: E731
    start = box.project(np.asarray(start, dtype=float))
    simplex = None
    if step is not None:
        simplex = np.vstack([start, start + [step, 0.0], start + [0.0, step]])
        # reflect vertices that leave the box back inside
        over = simplex > np.asarray(box.upper)
        simplex[over] -= 2 * step
        simplex = box.project(simplex)
    res = minimize(
        neg,
        start,
        method="Nelder-Mead",
        bounds=box.bounds(),
        options={"xatol": xtol, "fatol": 1e-10, "maxfev": max_evals,
                 "initial_simplex": simplex},
    )
    beta = box.project(res.x)
    sim = res.final_simplex[0]
    diameter = float(np.max(np.abs(sim - sim[0])))
    return beta, -float(res.fun), diameter <= xtol or res.success


def fit(data, spec, link=LOGISTIC, box=None, restarts=3, seed=0, max_evals=2000,
        xtol=1e-6, proper=True):
    """Maximum likelihood estimate of the incidence parameter.

    Runs the two logistic initialisation stages, then Nelder-Mead from the
    stage-2 point and from ``restarts`` perturbed starts (uniform, a quarter
    of the box width per coordinate, drawn from ``seed``).  The best
    local maximum is returned.
    """
    if not data.has_events:
        raise ValueError("no events observed: the latency distribution is not identified")
    box = ParamBox() if box is None else box
    lik = Likelihood(data, spec, link, proper=proper)
    if link.kind == "logistic":
        try:
            beta1 = init_stage1(data, link, box=box)
        except SeparationError:
            # all subjects had events: no censoring-based start exists
            log.warning("event indicator is constant; starting from zero")
            beta1 = np.zeros(2)
        beta2 = init_stage2(data, spec, link, beta1, box=box)
    else:
        beta1 = beta2 = np.zeros(2)
    rng = substream(seed, 0)
    width = box.width
    starts = [beta2, beta1]
    for _ in range(restarts):
        offset = rng.uniform(-0.25, 0.25, size=2) * width
        starts.append(box.project(beta2 + offset))

    best = None
    trace = []
    for s in starts:
        beta, val, ok = _nelder_mead(lik, s, box, max_evals, xtol)
        trace.append((np.asarray(s), beta, val, ok))
        if best is None or val > best[1]:
            best = (beta, val, ok)
    # Nelder-Mead can stall at a kink; restart from the best point with a
    # fresh simplex until that no longer helps
    step = POLISH_STEP * float(np.min(box.width))
    for _ in range(POLISH_ROUNDS):
        beta, val, ok = _nelder_mead(lik, best[0], box, max_evals, xtol, step=step)
        trace.append((best[0], beta, val, ok))
        if val <= best[1] + 1e-12:
            break
        best = (beta, val, ok)
    beta_hat, value, converged = best
    _, diag = lik.evaluate(beta_hat)
    result = FitResult(
        beta_hat=beta_hat,
        loglik=value,
        init_trace=(beta1, beta2),
        bandwidth=spec.bandwidth,
        converged=bool(converged),
        evals=lik.evals,
        at_boundary=box.on_boundary(beta_hat),
        floor_diagnostics=diag,
        starts=trace,
    )
    if not converged:
        log.warning("Nelder-Mead stopped before the simplex collapsed (beta=%s)", beta_hat)
    return result
