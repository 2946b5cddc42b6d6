"""Photon-counting simulation of an I_N test, and the estimation pipeline.

The detector model is deliberately small: a measurement y is a complete
orthonormal basis whose first element is the intended projector state.
With probability ``fidelity`` the outcome follows the ideal projection
statistics of the prepared state; with probability 1 - fidelity it is
uniform over the d basis elements (white noise).  Each basis element k then
accumulates Poisson counts with mean signal_rate * p_k + dark_rate per
integration window.

Estimation inverts that pipeline: outcome frequencies per (x, y) give
P(+1|x,y) as the fraction on element 1 (optionally after subtracting the
known expected dark counts, clamped at zero), correlators follow as
2P - 1, and the witness value is the usual signed sum in absolute value.
Uncertainties come from first-order propagation of independent Poisson
variances through the normalization; the correlations that normalization
induces between the elements of one (x, y) cell are part of the formula,
distinct (x, y) cells are independent.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EstimationError
from .rng import philox_stream
from .states import AngleEnsemble, ClassicalDiagonalEnsemble, measurement_basis
from .witness import WitnessSpec

DEMO_SIGNAL_RATE = 1e5
DEMO_DARK_RATE = 10.0


@dataclass(frozen=True)
class NoiseModel:
    """Fidelity, dark counts and source brightness of a simulated run."""

    fidelity: float
    dark_rate: float = 0.0
    signal_rate: float = DEMO_SIGNAL_RATE

    def __post_init__(self):
        if not 0.0 < self.fidelity <= 1.0:
            raise DomainError(f"fidelity must lie in (0, 1], got {self.fidelity}")
        if self.dark_rate < 0 or self.signal_rate < 0:
            raise DomainError("rates must be >= 0")

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "dark_rate": self.dark_rate,
            "signal_rate": self.signal_rate,
        }


@dataclass(frozen=True)
class CountRecord:
    """Raw per-projector tallies of one simulated (or imported) run.

    ``counts[x-1, y-1, k-1]`` is the tally on basis element k of
    measurement y with preparation x; element k=1 is the intended
    projector.  Settings are echoed so the record is self-describing.
    """

    N: int
    d: int
    model: str
    counts: np.ndarray
    fidelity: float
    dark_rate: float
    signal_rate: float
    seed: int

    def __post_init__(self):
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        if counts.shape != (self.N, self.N - 1, self.d):
            raise DomainError(
                f"counts must have shape ({self.N}, {self.N - 1}, {self.d}), got {counts.shape}"
            )
        if np.any(counts < 0):
            raise DomainError("counts must be >= 0")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "d": self.d,
            "model": self.model,
            "fidelity": self.fidelity,
            "dark_rate": self.dark_rate,
            "signal_rate": self.signal_rate,
            "seed": self.seed,
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CountRecord":
        return cls(
            N=int(payload["N"]),
            d=int(payload["d"]),
            model=str(payload["model"]),
            counts=np.asarray(payload["counts"], dtype=np.int64),
            fidelity=float(payload["fidelity"]),
            dark_rate=float(payload["dark_rate"]),
            signal_rate=float(payload["signal_rate"]),
            seed=int(payload["seed"]),
        )

    def to_csv(self) -> str:
        """Rows x,y,k,count with settings echoed in leading # comments."""
        buf = io.StringIO()
        for key in ("N", "d", "model", "fidelity", "dark_rate", "signal_rate", "seed"):
            buf.write(f"# {key}={getattr(self, key)}\n")
        writer = csv.writer(buf)
        writer.writerow(["x", "y", "k", "count"])
        for x in range(self.N):
            for y in range(self.N - 1):
                for k in range(self.d):
                    writer.writerow([x + 1, y + 1, k + 1, int(self.counts[x, y, k])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, **overrides) -> "CountRecord":
        """Parse the to_csv format; header comments may be overridden/supplied."""
        meta: dict = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                meta[key.strip()] = value.strip()
                continue
            rows.append(line)
        reader = csv.DictReader(io.StringIO("\n".join(rows)))
        entries = [(int(r["x"]), int(r["y"]), int(r["k"]), int(r["count"])) for r in reader]
        if not entries:
            raise DomainError("count CSV holds no rows")
        meta_typed = {
            "N": int(meta.get("N", max(e[0] for e in entries))),
            "d": int(meta.get("d", max(e[2] for e in entries))),
            "model": meta.get("model", "unknown"),
            "fidelity": float(meta.get("fidelity", 1.0)),
            "dark_rate": float(meta.get("dark_rate", 0.0)),
            "signal_rate": float(meta.get("signal_rate", 0.0)),
            "seed": int(meta.get("seed", 0)),
        }
        meta_typed.update(overrides)
        counts = np.zeros((meta_typed["N"], meta_typed["N"] - 1, meta_typed["d"]), dtype=np.int64)
        for x, y, k, c in entries:
            counts[x - 1, y - 1, k - 1] = c
        return cls(counts=counts, **meta_typed)


def _outcome_probabilities(ensemble: AngleEnsemble, fidelity: float) -> np.ndarray:
    """(N, N-1, d) outcome probabilities over each completed basis."""
    N, d = ensemble.N, ensemble.d
    probs = np.empty((N, N - 1, d))
    classical = isinstance(ensemble, ClassicalDiagonalEnsemble)
    prep = ensemble.preparation_weights() if classical else ensemble.preparation_states()
    for y in range(1, N):
        basis = measurement_basis(ensemble, y)
        if classical:
            ideal = prep @ (basis * basis).T  # diagonal weights read out per element
        else:
            amp = prep @ basis.T
            ideal = amp * amp
        probs[:, y - 1, :] = fidelity * ideal + (1.0 - fidelity) / d
    return probs


def simulate_counts(ensemble: AngleEnsemble, noise: NoiseModel, seed: int) -> CountRecord:
    """Draw one full set of Poisson tallies for every (x, y, basis element).

    Each (x, y) cell consumes its own Philox stream keyed
    (seed, (x-1)*(N-1) + (y-1)), so cells can be generated in any order or
    in parallel with identical results.
    """
    N, d = ensemble.N, ensemble.d
    probs = _outcome_probabilities(ensemble, noise.fidelity)
    counts = np.empty((N, N - 1, d), dtype=np.int64)
    for x in range(N):
        for y in range(N - 1):
            mean = noise.signal_rate * probs[x, y] + noise.dark_rate
            gen = philox_stream(seed, x * (N - 1) + y)
            counts[x, y] = gen.poisson(mean)
    return CountRecord(
        N=N,
        d=d,
        model=ensemble.model,
        counts=counts,
        fidelity=noise.fidelity,
        dark_rate=noise.dark_rate,
        signal_rate=noise.signal_rate,
        seed=seed,
    )


def _cell_estimate(raw: np.ndarray, dark_rate: float, dark_correction: bool) -> tuple[float, float]:
    """P(+1) estimate and its variance for one (x, y) cell of counts."""
    n = raw.astype(float)
    m = np.clip(n - dark_rate, 0.0, None) if dark_correction else n
    total = m.sum()
    if total <= 0:
        raise EstimationError("empty cell")
    p = m[0] / total
    # delta method; Var(n_k) estimated by the observed raw count
    dp = np.full(raw.size, -m[0] / total**2)
    dp[0] = (total - m[0]) / total**2
    var = float((dp * dp * n).sum())
    return float(p), var


def estimate_witness(
    counts: CountRecord, spec: WitnessSpec, dark_correction: bool = True
) -> tuple[float, float]:
    """Witness value and 1-sigma uncertainty from raw tallies."""
    if counts.N != spec.N:
        raise DomainError(f"counts are for N={counts.N}, witness for N={spec.N}")
    signed = 0.0
    var = 0.0
    for i, j in spec.terms:
        try:
            p, v = _cell_estimate(counts.counts[i - 1, j - 1], counts.dark_rate, dark_correction)
        except EstimationError:
            raise EstimationError(f"no usable counts for preparation x={i}, measurement y={j}")
        signed += spec.signs[(i, j)] * (2.0 * p - 1.0)
        var += 4.0 * v
    return abs(signed), float(np.sqrt(var))


def measure_fidelity(
    ensemble: AngleEnsemble, noise: NoiseModel, seed: int
) -> tuple[float, list[float]]:
    """Self-projection check: prepare each projector's own state and count.

    Returns the dark-corrected fraction of counts landing on the intended
    element, per measurement and averaged.  Under the white-noise model its
    expectation is fidelity + (1 - fidelity)/d.
    """
    N, d = ensemble.N, ensemble.d
    per_projector = []
    for y in range(1, N):
        basis = measurement_basis(ensemble, y)
        amp = basis @ basis[0]
        ideal = amp * amp  # exactly e_1 up to rounding: the state is the projector's own
        p = noise.fidelity * ideal + (1.0 - noise.fidelity) / d
        gen = philox_stream(seed, y - 1)
        raw = gen.poisson(noise.signal_rate * p + noise.dark_rate)
        frac, _ = _cell_estimate(raw, noise.dark_rate, dark_correction=True)
        per_projector.append(frac)
    return float(np.mean(per_projector)), per_projector
