"""Real qudit states from hyperspherical angles, and their correlator tables.

A d-dimensional real unit vector is parametrized by d-1 angles:

    lam_1 = cos(phi_1)
    lam_j = cos(phi_j) * prod_{k<j} sin(phi_k)      j = 2..d-1
    lam_d = prod_{k<d} sin(phi_k)

The empty product is 1, so d=2 degenerates to (cos, sin).  The map is
exactly norm-preserving for any real angles; angles outside [0, 2*pi) are
legal and are reduced only inside the trig calls (the bundled reference
tables contain such values and are kept verbatim).

Two preparation models share this parametrization.  A quantum preparation
is the pure state with amplitudes lam; a classical preparation is the
diagonal mixture with weights lam^2.  Measurements are rank-1 projectors
onto a parametrized vector in both models.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFileError, DomainError

_DATA_DIR = Path(__file__).parent / "data"


def data_dir() -> Path:
    """Bundled-data directory, overridable via DIMWIT_DATA_DIR."""
    override = os.environ.get("DIMWIT_DATA_DIR")
    return Path(override) if override else _DATA_DIR


@dataclass(frozen=True)
class AngleVector:
    """d-1 hyperspherical angles in radians, any real values accepted."""

    d: int
    phi: tuple[float, ...]

    def __post_init__(self):
        if self.d < 2:
            raise DomainError(f"angle vectors need d >= 2, got d={self.d}")
        phi = tuple(float(v) for v in self.phi)
        if len(phi) != self.d - 1:
            raise DomainError(f"expected {self.d - 1} angles for d={self.d}, got {len(phi)}")
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class RealStateVector:
    """Real amplitudes on the computational basis, unit norm to 1e-10."""

    d: int
    amplitudes: tuple[float, ...]

    def __post_init__(self):
        amp = tuple(float(v) for v in self.amplitudes)
        if len(amp) != self.d:
            raise DomainError(f"expected {self.d} amplitudes, got {len(amp)}")
        norm_sq = sum(a * a for a in amp)
        if abs(norm_sq - 1.0) > 1e-10:
            raise DomainError(f"state norm^2 deviates from 1 by {abs(norm_sq - 1.0):.3e}")
        object.__setattr__(self, "amplitudes", amp)

    def as_array(self) -> np.ndarray:
        return np.array(self.amplitudes)


def angles_to_state(a: AngleVector) -> RealStateVector:
    """Evaluate the hyperspherical parametrization at an angle vector."""
    phi = np.asarray(a.phi)
    lam = np.empty(a.d)
    prefix = 1.0
    for j in range(a.d - 1):
        lam[j] = np.cos(phi[j]) * prefix
        prefix *= np.sin(phi[j])
    lam[a.d - 1] = prefix
    return RealStateVector(d=a.d, amplitudes=tuple(lam))


@dataclass(frozen=True)
class AngleEnsemble:
    """N preparation and N-1 measurement angle vectors for one I_N scenario.

    Preparations are read as pure quantum states; see
    ClassicalDiagonalEnsemble for the diagonal-mixture reading.
    """

    N: int
    d: int
    preparations: tuple[AngleVector, ...]
    measurements: tuple[AngleVector, ...]

    model = "quantum"

    def __post_init__(self):
        if len(self.preparations) != self.N:
            raise DomainError(f"need {self.N} preparations, got {len(self.preparations)}")
        if len(self.measurements) != self.N - 1:
            raise DomainError(f"need {self.N - 1} measurements, got {len(self.measurements)}")
        for v in (*self.preparations, *self.measurements):
            if v.d != self.d:
                raise DomainError(f"all angle vectors must have d={self.d}, found d={v.d}")

    def preparation_states(self) -> np.ndarray:
        """(N, d) array of preparation state amplitudes."""
        return np.array([angles_to_state(a).amplitudes for a in self.preparations])

    def measurement_states(self) -> np.ndarray:
        """(N-1, d) array of measurement-projector state amplitudes."""
        return np.array([angles_to_state(a).amplitudes for a in self.measurements])

    def flat_angles(self) -> np.ndarray:
        """Concatenated angles: N preparation blocks then N-1 measurement blocks."""
        blocks = [v.phi for v in (*self.preparations, *self.measurements)]
        return np.concatenate([np.asarray(b) for b in blocks])

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "N": self.N,
            "d": self.d,
            "preparations": [list(v.phi) for v in self.preparations],
            "measurements": [list(v.phi) for v in self.measurements],
        }


class ClassicalDiagonalEnsemble(AngleEnsemble):
    """Same angle data, read as diagonal mixtures with weights lam^2."""

    model = "classical_diagonal"

    def preparation_weights(self) -> np.ndarray:
        """(N, d) array of diagonal weights; each row sums to 1."""
        lam = self.preparation_states()
        return lam * lam


def ensemble_from_dict(payload: dict) -> AngleEnsemble:
    model = payload.get("model", "quantum")
    if model == "quantum":
        cls = AngleEnsemble
    elif model == "classical_diagonal":
        cls = ClassicalDiagonalEnsemble
    else:
        raise DomainError(f"unknown ensemble model {model!r}")
    d = int(payload["d"])
    preps = tuple(AngleVector(d=d, phi=tuple(row)) for row in payload["preparations"])
    meas = tuple(AngleVector(d=d, phi=tuple(row)) for row in payload["measurements"])
    return cls(N=int(payload["N"]), d=d, preparations=preps, measurements=meas)


def ensemble_from_flat(params: np.ndarray, N: int, d: int, model: str = "quantum") -> AngleEnsemble:
    """Rebuild an ensemble from the optimizer's flat angle layout."""
    params = np.asarray(params, dtype=float)
    n_expected = (2 * N - 1) * (d - 1)
    if params.shape != (n_expected,):
        raise DomainError(f"expected {n_expected} flat angles, got shape {params.shape}")
    blocks = params.reshape(2 * N - 1, d - 1)
    vectors = tuple(AngleVector(d=d, phi=tuple(row)) for row in blocks)
    cls = {"quantum": AngleEnsemble, "classical_diagonal": ClassicalDiagonalEnsemble}.get(model)
    if cls is None:
        raise DomainError(f"unknown model {model!r}")
    return cls(N=N, d=d, preparations=vectors[:N], measurements=vectors[N:])


def quantum_correlators(e: AngleEnsemble):
    """Correlators of pure preparations against rank-1 projectors.

    P(+1|x,y) is the squared overlap of the x-th preparation with the y-th
    measurement vector.
    """
    from .witness import CorrelatorTable

    V = e.preparation_states()
    W = e.measurement_states()
    overlap = V @ W.T
    p_plus = np.clip(overlap * overlap, 0.0, 1.0)
    return CorrelatorTable.from_probabilities(e.N, p_plus)


def classical_correlators(e: ClassicalDiagonalEnsemble):
    """Correlators of diagonal mixtures against rank-1 projectors.

    P(+1|x,y) = sum_i w_i^(x) * (lam_i^(y))^2 with w = lam^2: the projector
    reads out the diagonal weights only, all coherences are gone.
    """
    from .witness import CorrelatorTable

    if not isinstance(e, ClassicalDiagonalEnsemble):
        raise DomainError("classical_correlators needs a ClassicalDiagonalEnsemble")
    a = e.preparation_weights()
    W = e.measurement_states()
    p_plus = np.clip(a @ (W * W).T, 0.0, 1.0)
    return CorrelatorTable.from_probabilities(e.N, p_plus)


_PARALLEL_THRESHOLD = 1e-8


def complete_basis(m: RealStateVector) -> list[RealStateVector]:
    """Extend a unit vector to an orthonormal basis of R^d.

    Gram-Schmidt over the canonical basis vectors in index order; a seed
    whose residual norm falls below 1e-8 is skipped as near-parallel.  The
    seed order and threshold are fixed so the completion is deterministic.
    """
    basis = [m.as_array()]
    d = m.d
    for i in range(d):
        if len(basis) == d:
            break
        r = np.zeros(d)
        r[i] = 1.0
        for _ in range(2):  # re-orthogonalize once for numerical hygiene
            for b in basis:
                r -= (b @ r) * b
        norm = np.linalg.norm(r)
        if norm <= _PARALLEL_THRESHOLD:
            continue
        basis.append(r / norm)
    return [RealStateVector(d=d, amplitudes=tuple(v)) for v in basis[1:]]


def measurement_basis(e: AngleEnsemble, y: int) -> np.ndarray:
    """(d, d) orthonormal basis for measurement y (1-based); row 0 is the projector state."""
    if not 1 <= y <= e.N - 1:
        raise DomainError(f"measurement index must be in 1..{e.N - 1}, got {y}")
    state = angles_to_state(e.measurements[y - 1])
    rows = [state.as_array()] + [v.as_array() for v in complete_basis(state)]
    return np.array(rows)


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise DataFileError(f"data file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFileError(f"malformed data file {path}: {exc}") from exc


def load_reference_angles(directory: Path | None = None) -> AngleEnsemble:
    """Bundled optimal d=6 angles for the 7-preparation witness.

    These are the published orientations that attain the d=6 quantum
    maximum; evaluating them must reproduce 26.1017 to 5e-4.
    """
    directory = directory or data_dir()
    states = _load_json(directory / "table2_states.json")
    meas = _load_json(directory / "table3_measurements.json")
    for payload, rows, name in ((states, 7, "table2_states"), (meas, 6, "table3_measurements")):
        angles = payload.get("angles")
        if angles is None or len(angles) != rows or any(len(r) != 5 for r in angles):
            raise DataFileError(f"{name}.json must hold a {rows}x5 angle table")
    d = 6
    preps = tuple(AngleVector(d=d, phi=tuple(r)) for r in states["angles"])
    ms = tuple(AngleVector(d=d, phi=tuple(r)) for r in meas["angles"])
    return AngleEnsemble(N=7, d=d, preparations=preps, measurements=ms)


def load_classical_reference(directory: Path | None = None) -> ClassicalDiagonalEnsemble:
    """Bundled best classical-diagonal ensemble for N=7, d=6 (optimizer output)."""
    directory = directory or data_dir()
    payload = _load_json(directory / "classical_best_d6.json")
    ensemble = ensemble_from_dict(payload)
    if not isinstance(ensemble, ClassicalDiagonalEnsemble):
        raise DataFileError("classical_best_d6.json must declare model=classical_diagonal")
    return ensemble
