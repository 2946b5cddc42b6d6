"""Multistart conjugate-gradient maximization of I_N over ensemble angles.

The search space is the flat angle vector of a full ensemble: N preparation
blocks followed by N-1 measurement blocks, each of d-1 hyperspherical
angles, so (2N-1)(d-1) parameters in total.  The smooth objective is the
*signed* witness sum; the quantity being maximized is its absolute value.
Ascending |f| with direction sign(f) * grad(f) lets restarts that land in
negative-signed basins explore them instead of being dragged to the
positive side - the two sign basins are not equivalent (for the classical
diagonal model the negative basin is strictly better), and the absolute
value is non-smooth only on the measure-zero set f = 0, which random
starts avoid.

Each restart runs Polak-Ribiere conjugate gradient ascent (beta clamped at
0, reset to steepest ascent every n_params iterations or when the update
degenerates) with backtracking line search.  Floating-point resolution of
the objective (~1e-14 relative) limits how far the gradient norm can be
driven by a value-based line search, so runs also stop after
``stall_limit`` consecutive steps with no measurable increase; ``converged``
still means gradient_tolerance was reached, nothing else.

Restarts draw their starting points from per-restart Philox streams keyed
(seed, restart_index), so the set of starts for ``restarts=R`` is a prefix
of the set for any larger R, and results are identical however many
threads execute them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit, prange

from .errors import DomainError
from .rng import philox_stream
from .states import AngleEnsemble, ensemble_from_flat
from .witness import WitnessSpec

MODELS = ("quantum", "classical_diagonal")
HISTOGRAM_BIN_WIDTH = 0.01


@dataclass(frozen=True)
class OptimizerConfig:
    """Multistart CG settings; defaults are desk-scale, not survey-scale."""

    restarts: int = 2000
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-9
    initial_step: float = 1.0
    step_shrink: float = 0.5
    sufficient_increase: float = 1e-4
    stall_limit: int = 10
    seed: int = 0
    beta_rule: str = "polak-ribiere"

    def __post_init__(self):
        if self.restarts < 1:
            raise DomainError(f"restarts must be >= 1, got {self.restarts}")
        if self.gradient_tolerance <= 0:
            raise DomainError("gradient_tolerance must be positive")
        if self.beta_rule != "polak-ribiere":
            raise DomainError(f"unsupported beta_rule {self.beta_rule!r}")
        if not 0 < self.step_shrink < 1:
            raise DomainError("step_shrink must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "OptimizerConfig":
        return cls(**payload)


def config_hash(config: OptimizerConfig) -> str:
    """Short stable fingerprint of a config, used to version bound tables."""
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def n_parameters(N: int, d: int) -> int:
    return (2 * N - 1) * (d - 1)


def _model_id(model: str) -> int:
    if model not in MODELS:
        raise DomainError(f"model must be one of {MODELS}, got {model!r}")
    return MODELS.index(model)


@njit(cache=True)
def _fill_states(params, nv, d, V):
    for v in range(nv):
        base = v * (d - 1)
        prefix = 1.0
        for j in range(d - 1):
            ph = params[base + j]
            V[v, j] = np.cos(ph) * prefix
            prefix *= np.sin(ph)
        V[v, d - 1] = prefix


@njit(cache=True)
def _signed_value(params, N, d, A, model_id):
    nv = 2 * N - 1
    V = np.empty((nv, d))
    _fill_states(params, nv, d, V)
    total = 0.0
    for x in range(N):
        for y in range(N - 1):
            a = A[x, y]
            if a == 0.0:
                continue
            t = 0.0
            if model_id == 0:
                for i in range(d):
                    t += V[x, i] * V[N + y, i]
                total += a * (2.0 * t * t - 1.0)
            else:
                for i in range(d):
                    vx = V[x, i]
                    wy = V[N + y, i]
                    t += vx * vx * wy * wy
                total += a * (2.0 * t - 1.0)
    return total


@njit(cache=True)
def _signed_gradient(params, N, d, A, model_id, grad):
    nv = 2 * N - 1
    V = np.empty((nv, d))
    _fill_states(params, nv, d, V)
    G = np.zeros((nv, d))  # dI/d(amplitude)
    for x in range(N):
        for y in range(N - 1):
            a = A[x, y]
            if a == 0.0:
                continue
            if model_id == 0:
                t = 0.0
                for i in range(d):
                    t += V[x, i] * V[N + y, i]
                c = 4.0 * a * t
                for i in range(d):
                    G[x, i] += c * V[N + y, i]
                    G[N + y, i] += c * V[x, i]
            else:
                for i in range(d):
                    vx = V[x, i]
                    wy = V[N + y, i]
                    G[x, i] += 4.0 * a * vx * wy * wy
                    G[N + y, i] += 4.0 * a * wy * vx * vx
    # chain rule through the parametrization jacobian, one angle at a time
    for v in range(nv):
        base = v * (d - 1)
        for m in range(d - 1):
            cm = np.cos(params[base + m])
            sm = np.sin(params[base + m])
            pre = 1.0
            for k in range(m):
                pre *= np.sin(params[base + k])
            acc = -sm * pre * G[v, m]
            t = pre * cm
            for i in range(m + 1, d - 1):
                acc += np.cos(params[base + i]) * t * G[v, i]
                t *= np.sin(params[base + i])
            acc += t * G[v, d - 1]
            grad[base + m] = acc


@njit(cache=True)
def _cg_ascend(x, N, d, A, model_id, max_iter, gtol, step0, shrink, c1, stall_limit):
    """Ascend |signed value| from x (updated in place).

    Returns (abs_value, signed_value, iterations, converged, grad_norm).
    """
    n = x.size
    f = _signed_value(x, N, d, A, model_id)
    s = 1.0 if f >= 0.0 else -1.0
    g = np.empty(n)
    _signed_gradient(x, N, d, A, model_id, g)
    gg = 0.0
    for k in range(n):
        g[k] *= s
        gg += g[k] * g[k]
    p = g.copy()
    F = f if f >= 0.0 else -f
    xn = np.empty(n)
    gn = np.empty(n)
    since_reset = 0
    stall = 0
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        if np.sqrt(gg) < gtol:
            converged = True
            break
        slope = 0.0
        for k in range(n):
            slope += g[k] * p[k]
        if slope <= 0.0 or since_reset >= n:
            for k in range(n):
                p[k] = g[k]
            slope = gg
            since_reset = 0
        alpha = step0
        accepted = False
        fn = f
        Fn = F
        for _ls in range(60):
            for k in range(n):
                xn[k] = x[k] + alpha * p[k]
            fn = _signed_value(xn, N, d, A, model_id)
            Fn = fn if fn >= 0.0 else -fn
            if Fn >= F + c1 * alpha * slope:
                accepted = True
                break
            alpha *= shrink
        if not accepted:
            if since_reset == 0:
                break  # no measurable increase even along steepest ascent
            for k in range(n):
                p[k] = g[k]
            since_reset = 0
            continue
        gain = Fn - F
        for k in range(n):
            x[k] = xn[k]
        f = fn
        F = Fn
        if gain <= 1e-14 * (1.0 + F):
            stall += 1
            if stall >= stall_limit:
                break
        else:
            stall = 0
        s = 1.0 if f >= 0.0 else -1.0
        _signed_gradient(x, N, d, A, model_id, gn)
        num = 0.0
        gg_new = 0.0
        for k in range(n):
            gn[k] *= s
            gg_new += gn[k] * gn[k]
            num += gn[k] * (gn[k] - g[k])
        beta = num / gg
        if beta < 0.0:
            beta = 0.0
        for k in range(n):
            p[k] = gn[k] + beta * p[k]
            g[k] = gn[k]
        gg = gg_new
        since_reset += 1
    # fresh gradient at the final point, for honest diagnostics
    _signed_gradient(x, N, d, A, model_id, g)
    gg = 0.0
    for k in range(n):
        gg += g[k] * g[k]
    gnorm = np.sqrt(gg)
    if gnorm < gtol:
        converged = True
    return F, f, iterations, converged, gnorm


@njit(parallel=True, cache=True)
def _multistart(starts, N, d, A, model_id, max_iter, gtol, step0, shrink, c1, stall_limit):
    R, n = starts.shape
    values = np.empty(R)
    signed = np.empty(R)
    finals = np.empty((R, n))
    iters = np.zeros(R, dtype=np.int64)
    convs = np.zeros(R, dtype=np.bool_)
    gnorms = np.empty(R)
    for r in prange(R):
        x = starts[r].copy()
        F, f, it, conv, gn = _cg_ascend(
            x, N, d, A, model_id, max_iter, gtol, step0, shrink, c1, stall_limit
        )
        values[r] = F
        signed[r] = f
        finals[r] = x
        iters[r] = it
        convs[r] = conv
        gnorms[r] = gn
    return values, signed, finals, iters, convs, gnorms


def objective(spec: WitnessSpec, params: np.ndarray, model: str, d: int) -> float:
    """Signed witness sum at a flat angle vector (no absolute value)."""
    mid = _model_id(model)
    params = np.ascontiguousarray(params, dtype=float)
    n = n_parameters(spec.N, d)
    if params.shape != (n,):
        raise DomainError(f"expected {n} parameters for N={spec.N}, d={d}, got {params.shape}")
    return float(_signed_value(params, spec.N, d, spec.sign_matrix(), mid))


def gradient(spec: WitnessSpec, params: np.ndarray, model: str, d: int) -> np.ndarray:
    """Analytic gradient of the signed objective."""
    mid = _model_id(model)
    params = np.ascontiguousarray(params, dtype=float)
    n = n_parameters(spec.N, d)
    if params.shape != (n,):
        raise DomainError(f"expected {n} parameters for N={spec.N}, d={d}, got {params.shape}")
    grad = np.empty(n)
    _signed_gradient(params, spec.N, d, spec.sign_matrix(), mid, grad)
    return grad


def _bin_histogram(values: np.ndarray) -> tuple[tuple[float, int], ...]:
    idx = np.floor(values / HISTOGRAM_BIN_WIDTH + 1e-9).astype(np.int64)
    bins = {}
    for i in idx:
        bins[int(i)] = bins.get(int(i), 0) + 1
    return tuple((round(i * HISTOGRAM_BIN_WIDTH, 2), c) for i, c in sorted(bins.items()))


@dataclass(frozen=True)
class BoundEstimate:
    """Best witness value found by a multistart run, with diagnostics."""

    N: int
    d: int
    model: str
    best_value: float
    best_signed_value: float
    best_restart_index: int
    best_ensemble: AngleEnsemble
    restart_histogram: tuple[tuple[float, int], ...]
    converged_fraction: float
    config: OptimizerConfig

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "d": self.d,
            "model": self.model,
            "best_value": self.best_value,
            "best_signed_value": self.best_signed_value,
            "best_restart_index": self.best_restart_index,
            "best_ensemble": self.best_ensemble.to_dict(),
            "restart_histogram": [[low, count] for low, count in self.restart_histogram],
            "converged_fraction": self.converged_fraction,
            "config": self.config.to_dict(),
            "config_hash": config_hash(self.config),
        }


def maximize(spec: WitnessSpec, model: str, d: int, config: OptimizerConfig | None = None) -> BoundEstimate:
    """Estimate the maximum of I_N over the given model at dimension d.

    Runs ``config.restarts`` independent CG ascents from uniform random
    angles in [0, 2*pi) and keeps the best absolute witness value (ties
    broken toward the lowest restart index).  Deterministic given
    ``config.seed``; restart sets nest, so more restarts can only improve
    the answer.
    """
    if config is None:
        config = OptimizerConfig()
    mid = _model_id(model)
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    N = spec.N
    n = n_parameters(N, d)
    starts = np.empty((config.restarts, n))
    for r in range(config.restarts):
        starts[r] = philox_stream(config.seed, r).uniform(0.0, 2.0 * np.pi, n)
    values, signed, finals, _iters, convs, _gnorms = _multistart(
        starts,
        N,
        d,
        spec.sign_matrix(),
        mid,
        config.max_iterations,
        config.gradient_tolerance,
        config.initial_step,
        config.step_shrink,
        config.sufficient_increase,
        config.stall_limit,
    )
    best = int(np.argmax(values))
    return BoundEstimate(
        N=N,
        d=d,
        model=model,
        best_value=float(values[best]),
        best_signed_value=float(signed[best]),
        best_restart_index=best,
        best_ensemble=ensemble_from_flat(finals[best], N, d, model),
        restart_histogram=_bin_histogram(values),
        converged_fraction=float(np.mean(convs)),
        config=config,
    )


@dataclass(frozen=True)
class RefineResult:
    value: float
    signed_value: float
    params: np.ndarray
    gradient_norm: float
    iterations: int
    converged: bool


def refine(
    spec: WitnessSpec, params: np.ndarray, model: str, d: int, config: OptimizerConfig | None = None
) -> RefineResult:
    """Single CG ascent from a given point; used to polish tabled angles."""
    if config is None:
        config = OptimizerConfig()
    mid = _model_id(model)
    x = np.array(params, dtype=float)
    n = n_parameters(spec.N, d)
    if x.shape != (n,):
        raise DomainError(f"expected {n} parameters for N={spec.N}, d={d}, got {x.shape}")
    F, f, iterations, converged, gnorm = _cg_ascend(
        x,
        spec.N,
        d,
        spec.sign_matrix(),
        mid,
        config.max_iterations,
        config.gradient_tolerance,
        config.initial_step,
        config.step_shrink,
        config.sufficient_increase,
        config.stall_limit,
    )
    return RefineResult(
        value=float(F),
        signed_value=float(f),
        params=x,
        gradient_norm=float(gnorm),
        iterations=int(iterations),
        converged=bool(converged),
    )


def set_workers(n: int | None) -> None:
    """Cap the numba thread pool; None leaves the default (all cores)."""
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
