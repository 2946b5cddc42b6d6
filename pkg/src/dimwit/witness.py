"""The I_N witness family: construction, evaluation, analytic bounds, verdicts.

An I_N scenario has N preparations x = 1..N and N-1 binary measurements
y = 1..N-1.  The witness is the absolute value of a fixed signed sum of
correlators E_xy over a triangular index set; its maximum depends on the
dimension of the carried system and on whether the system is classical or
quantum, which is what makes it a dimension witness.

Indexing is 1-based at every public surface; numpy internals are 0-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError


def _term_set(N: int) -> tuple[tuple[int, int], ...]:
    # row x=1 pairs with every measurement; row x>=2 stops at y = N+1-x
    terms = []
    for i in range(1, N + 1):
        jmax = N - 1 if i == 1 else N + 1 - i
        for j in range(1, jmax + 1):
            terms.append((i, j))
    return tuple(terms)


def _sign(i: int, j: int, N: int) -> int:
    if i == 1:
        return 1
    return 1 if i + j <= N else -1


@dataclass(frozen=True)
class WitnessSpec:
    """Sign pattern of one member of the I_N family."""

    N: int
    terms: tuple[tuple[int, int], ...]
    signs: dict[tuple[int, int], int] = field(repr=False)

    def sign_matrix(self) -> np.ndarray:
        """Dense (N, N-1) array of coefficients; 0 marks excluded pairs."""
        A = np.zeros((self.N, self.N - 1))
        for (i, j), s in self.signs.items():
            A[i - 1, j - 1] = s
        return A

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "terms": [{"i": i, "j": j, "sign": self.signs[(i, j)]} for i, j in self.terms],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "WitnessSpec":
        terms = tuple((t["i"], t["j"]) for t in payload["terms"])
        signs = {(t["i"], t["j"]): int(t["sign"]) for t in payload["terms"]}
        spec = cls(N=int(payload["N"]), terms=terms, signs=signs)
        if spec != make_witness(spec.N):
            raise DomainError("serialized witness does not match the I_N sign pattern")
        return spec


def make_witness(N: int) -> WitnessSpec:
    """Build the I_N witness: (N+2)(N-1)/2 terms, one negative per column."""
    if N < 3:
        raise DomainError(f"witness needs N >= 3, got {N}")
    terms = _term_set(N)
    signs = {(i, j): _sign(i, j, N) for i, j in terms}
    return WitnessSpec(N=N, terms=terms, signs=signs)


@dataclass(frozen=True)
class CorrelatorTable:
    """Observed or modeled correlators E_xy for one I_N scenario.

    ``E`` has shape (N, N-1) with E[x-1, y-1] in [-1, 1].  ``P``, when
    present, has shape (N, N-1, 2) holding (P(+1|x,y), P(-1|x,y)) and must
    be consistent with ``E`` to 1e-12.
    """

    N: int
    E: np.ndarray
    P: Optional[np.ndarray] = None

    def __post_init__(self):
        E = np.ascontiguousarray(np.asarray(self.E, dtype=float))
        if E.shape != (self.N, self.N - 1):
            raise DomainError(f"E must have shape ({self.N}, {self.N - 1}), got {E.shape}")
        if np.any(np.abs(E) > 1 + 1e-9):
            raise DomainError("correlators must lie in [-1, 1]")
        E.flags.writeable = False
        object.__setattr__(self, "E", E)
        if self.P is not None:
            P = np.ascontiguousarray(np.asarray(self.P, dtype=float))
            if P.shape != (self.N, self.N - 1, 2):
                raise DomainError(f"P must have shape ({self.N}, {self.N - 1}, 2)")
            if np.any(np.abs(P.sum(axis=2) - 1.0) > 1e-12):
                raise DomainError("outcome probabilities must sum to 1 within 1e-12")
            if np.any(np.abs((P[:, :, 0] - P[:, :, 1]) - E) > 1e-12):
                raise DomainError("E must equal P(+1) - P(-1) within 1e-12")
            P.flags.writeable = False
            object.__setattr__(self, "P", P)

    @classmethod
    def from_probabilities(cls, N: int, p_plus: np.ndarray) -> "CorrelatorTable":
        p_plus = np.asarray(p_plus, dtype=float)
        P = np.stack([p_plus, 1.0 - p_plus], axis=2)
        return cls(N=N, E=2.0 * p_plus - 1.0, P=P)

    def to_dict(self) -> dict:
        payload = {"N": self.N, "E": self.E.tolist()}
        if self.P is not None:
            payload["P"] = {
                "plus": self.P[:, :, 0].tolist(),
                "minus": self.P[:, :, 1].tolist(),
            }
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "CorrelatorTable":
        P = None
        if payload.get("P") is not None:
            plus = np.asarray(payload["P"]["plus"], dtype=float)
            minus = np.asarray(payload["P"]["minus"], dtype=float)
            P = np.stack([plus, minus], axis=2)
        return cls(N=int(payload["N"]), E=np.asarray(payload["E"], dtype=float), P=P)


def evaluate_signed(spec: WitnessSpec, table: CorrelatorTable) -> float:
    """Signed witness sum, for gradient-based callers; see ``evaluate``."""
    if table.N != spec.N:
        raise DomainError(f"table is for N={table.N}, witness for N={spec.N}")
    return float((spec.sign_matrix() * table.E).sum())


def evaluate(spec: WitnessSpec, table: CorrelatorTable) -> float:
    """Witness value |sum of sign(i,j) * E_ij| for the given correlators."""
    return abs(evaluate_signed(spec, table))


def classical_bound(N: int, d: int) -> float:
    """Maximum of I_N over classical systems of dimension d: N(N-3)/2 + 2d - 1."""
    if N < 3:
        raise DomainError(f"witness needs N >= 3, got {N}")
    if not 1 <= d <= N - 1:
        raise DomainError(f"classical bound is defined for 1 <= d <= N-1, got d={d}, N={N}")
    return N * (N - 3) / 2 + 2 * d - 1


def algebraic_max(N: int) -> float:
    """Largest value of I_N with all constraints dropped: (N+2)(N-1)/2."""
    if N < 3:
        raise DomainError(f"witness needs N >= 3, got {N}")
    return (N + 2) * (N - 1) / 2


@dataclass(frozen=True)
class CertificationVerdict:
    """What a measured witness value certifies about the carried system."""

    witness_value: float
    min_quantum_dimension: int
    exceeds_classical_at: Optional[int]
    exceeds_all_quantum_bounds: bool
    bounds_used: tuple[tuple[int, float, float], ...]  # (d, classical, quantum)

    def to_dict(self) -> dict:
        return {
            "witness_value": self.witness_value,
            "min_quantum_dimension": self.min_quantum_dimension,
            "exceeds_classical_at": self.exceeds_classical_at,
            "exceeds_all_quantum_bounds": self.exceeds_all_quantum_bounds,
            "bounds_used": [list(row) for row in self.bounds_used],
        }


def certify(value: float, N: int, quantum_bounds: Sequence[tuple[int, float]]) -> CertificationVerdict:
    """Decide the minimum quantum dimension compatible with a witness value.

    ``quantum_bounds`` must list (d, bound) pairs ascending in d and cover
    d = 2..N-1.  The verdict also reports the largest classical dimension
    whose bound the value beats, if any.
    """
    if len(quantum_bounds) == 0:
        raise DomainError("quantum_bounds must not be empty")
    ds = [d for d, _ in quantum_bounds]
    if ds != list(range(2, N)):
        raise DomainError(f"quantum_bounds must cover d = 2..{N - 1} in ascending order, got {ds}")

    min_dim = None
    for d, bound in quantum_bounds:
        if bound >= value:
            min_dim = d
            break
    exceeds_all = min_dim is None
    if exceeds_all:
        min_dim = N - 1

    exceeds_at = None
    for d in range(1, N):
        if classical_bound(N, d) < value:
            exceeds_at = d

    qmap = dict(quantum_bounds)
    bounds_used = tuple((d, classical_bound(N, d), qmap[d]) for d in range(2, N))
    return CertificationVerdict(
        witness_value=value,
        min_quantum_dimension=min_dim,
        exceeds_classical_at=exceeds_at,
        exceeds_all_quantum_bounds=exceeds_all,
        bounds_used=bounds_used,
    )


def witness_to_json(spec: WitnessSpec) -> str:
    return json.dumps(spec.to_dict())


def witness_from_json(text: str) -> WitnessSpec:
    return WitnessSpec.from_dict(json.loads(text))


def correlators_to_json(table: CorrelatorTable) -> str:
    return json.dumps(table.to_dict())


def correlators_from_json(text: str) -> CorrelatorTable:
    return CorrelatorTable.from_dict(json.loads(text))
