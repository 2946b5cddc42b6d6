"""Exact classical maximum of I_N by exhaustive enumeration.

A dimension-d classical strategy is an emission map x -> symbol in 1..d
plus a response map (y, symbol) -> outcome in {-1, +1}; shared randomness
cannot help because I_N is linear in the correlators, so deterministic
strategies attain the maximum (see docs/ note in README).  For a fixed
emission map the best responses decouple: the witness is linear in each
response bit and each bit multiplies the disjoint coefficient sum
C[m, y] = sum of sign(x, y) over the x emitting symbol m, so the optimal
bit is sign(C[m, y]) and the strategy value is sum |C[m, y]|.  Only the
d^N emission maps need enumerating; flipping every response bit negates
the signed sum, so the signed maximum equals the maximum of |I_N|.

Enumeration order is lexicographic with x = 1 most significant, and only
strict improvements are kept, so the reported strategy is the
lexicographically smallest maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, ResourceLimitError
from .witness import CorrelatorTable, WitnessSpec

ENUMERATION_GUARD = 10**7


@dataclass(frozen=True)
class DeterministicStrategy:
    """One classical strategy: emission[x-1] in 1..d, response[y-1][m-1] in {-1, +1}."""

    N: int
    d: int
    emission: tuple[int, ...]
    response: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.emission) != self.N or any(not 1 <= m <= self.d for m in self.emission):
            raise DomainError("emission must map every x in 1..N to a symbol in 1..d")
        if len(self.response) != self.N - 1 or any(len(row) != self.d for row in self.response):
            raise DomainError("response must cover all (y, symbol) pairs")
        if any(b not in (-1, 1) for row in self.response for b in row):
            raise DomainError("response outcomes must be -1 or +1")

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "d": self.d,
            "emission": list(self.emission),
            "response": [list(row) for row in self.response],
        }


@njit(cache=True)
def _enumerate_emissions(N, d, A, restrict_growth):
    emission = np.zeros(N, dtype=np.int64)
    best = -1.0
    best_emission = np.zeros(N, dtype=np.int64)
    C = np.empty((d, N - 1))
    while True:
        ok = True
        if restrict_growth:
            # canonical forms only: each symbol appears after all smaller ones
            high = -1
            for x in range(N):
                if emission[x] > high + 1:
                    ok = False
                    break
                if emission[x] > high:
                    high = emission[x]
        if ok:
            for m in range(d):
                for y in range(N - 1):
                    C[m, y] = 0.0
            for x in range(N):
                m = emission[x]
                for y in range(N - 1):
                    C[m, y] += A[x, y]
            val = 0.0
            for m in range(d):
                for y in range(N - 1):
                    v = C[m, y]
                    val += v if v >= 0.0 else -v
            if val > best:
                best = val
                best_emission[:] = emission
        k = N - 1
        while k >= 0:
            emission[k] += 1
            if emission[k] < d:
                break
            emission[k] = 0
            k -= 1
        if k < 0:
            break
    return best, best_emission


def exact_classical_max(
    N: int, d: int, use_symmetry: bool = False
) -> tuple[float, DeterministicStrategy]:
    """Maximum of I_N over dimension-d classical strategies, by enumeration.

    ``use_symmetry`` restricts enumeration to symbol-relabeling canonical
    forms (up to d! fewer emission maps, same result).  Guarded at
    d^N <= 1e7; above that, use the closed-form classical bound instead.
    """
    if N < 3:
        raise DomainError(f"witness needs N >= 3, got {N}")
    if d < 1:
        raise DomainError(f"need d >= 1, got {d}")
    if d**N > ENUMERATION_GUARD:
        raise ResourceLimitError(
            f"d^N = {d**N} exceeds the enumeration guard {ENUMERATION_GUARD}; "
            "use witness.classical_bound for the closed form"
        )
    from .witness import make_witness

    A = make_witness(N).sign_matrix()
    best, emission0 = _enumerate_emissions(N, d, A, use_symmetry)
    emission = tuple(int(m) + 1 for m in emission0)
    # best responses for the winning emission map: sign of each coefficient sum
    C = np.zeros((d, N - 1))
    for x, m in enumerate(emission0):
        C[m] += A[x]
    response = tuple(
        tuple(1 if C[m, y] >= 0 else -1 for m in range(d)) for y in range(N - 1)
    )
    strategy = DeterministicStrategy(N=N, d=d, emission=emission, response=response)
    return float(best), strategy


def strategy_correlators(s: DeterministicStrategy) -> CorrelatorTable:
    """Deterministic correlators: E_xy = response(y, emission(x))."""
    E = np.empty((s.N, s.N - 1))
    for x in range(s.N):
        m = s.emission[x] - 1
        for y in range(s.N - 1):
            E[x, y] = s.response[y][m]
    p_plus = (E + 1.0) / 2.0
    return CorrelatorTable.from_probabilities(s.N, p_plus)


def verify_strategy(spec: WitnessSpec, s: DeterministicStrategy) -> float:
    """Witness value achieved by a strategy (convenience for reports)."""
    from .witness import evaluate

    return evaluate(spec, strategy_correlators(s))
