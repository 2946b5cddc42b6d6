"""Which dimensions stay certifiable when measurement fidelity is finite.

At mean fidelity F the expected witness value for a dimension-d quantum
source is bracketed by I_min = F * I_q(d) and I_max = F * I_q(d) +
(1 - F) * A(N), with A(N) the algebraic maximum: the non-ideal fraction of
events may contribute anything between the two algebraic extremes 0 and
A(N).  Witnessing dimension d with I_{d+1} remains possible while the
bracket of a (d-1)-dimensional source sits strictly below the bracket of a
d-dimensional one, i.e. I_max(d-1) < I_min(d).

Quantum maxima beyond the published d <= 6 values are not analytic; they
come from the optimizer and are cached in a versioned bound-table JSON
whose entries carry the fingerprint of the config that produced them.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataFileError, DomainError, StaleTableError
from .optimize import OptimizerConfig, config_hash
from .witness import algebraic_max

BOUND_TABLE_VERSION = 1


@dataclass(frozen=True)
class FidelityInterval:
    """Reachable witness range for one (N, d) at mean fidelity F."""

    N: int
    d: int
    F: float
    I_min: float
    I_max: float

    def to_dict(self) -> dict:
        return {"N": self.N, "d": self.d, "F": self.F, "I_min": self.I_min, "I_max": self.I_max}


def interval(N: int, d: int, F: float, quantum_bound: float) -> FidelityInterval:
    """Bracket [F*I_q, F*I_q + (1-F)*A(N)] for a d-dimensional source."""
    if not 0.0 < F <= 1.0:
        raise DomainError(f"fidelity must lie in (0, 1], got {F}")
    if quantum_bound <= 0:
        raise DomainError(f"quantum bound must be positive, got {quantum_bound}")
    lo = F * quantum_bound
    hi = F * quantum_bound + (1.0 - F) * algebraic_max(N)
    return FidelityInterval(N=N, d=d, F=F, I_min=lo, I_max=hi)


def separable(N: int, d: int, F: float, bounds: Mapping[int, float]) -> bool:
    """True when dimensions d and d-1 are distinguishable by I_N at fidelity F."""
    for need in (d, d - 1):
        if need not in bounds:
            raise DomainError(f"missing quantum bound for d={need}")
    lower = interval(N, d - 1, F, bounds[d - 1])
    upper = interval(N, d, F, bounds[d])
    return lower.I_max < upper.I_min


def certifiable_table(
    F: float, bounds: Mapping[tuple[int, int], float], d_range: Iterable[int]
) -> list[dict]:
    """Per-dimension separability rows for the witness N = d+1.

    Each row carries (d, I_min(d), I_max(d-1), margin, separable); missing
    bound entries raise with the full list of gaps.
    """
    d_list = sorted(d_range)
    missing = [
        (dd + 1, need)
        for dd in d_list
        for need in (dd, dd - 1)
        if (dd + 1, need) not in bounds
    ]
    if missing:
        raise DomainError(f"bound table lacks entries (N, d): {missing}")
    rows = []
    for dd in d_list:
        N = dd + 1
        upper = interval(N, dd, F, bounds[(N, dd)])
        lower = interval(N, dd - 1, F, bounds[(N, dd - 1)])
        rows.append(
            {
                "d": dd,
                "N": N,
                "I_min_d": upper.I_min,
                "I_max_dm1": lower.I_max,
                "margin": upper.I_min - lower.I_max,
                "separable": lower.I_max < upper.I_min,
            }
        )
    return rows


def max_certifiable_dimension(
    F: float, bounds: Mapping[tuple[int, int], float], d_range: Iterable[int]
) -> int | None:
    """Largest d in d_range certifiable at fidelity F, or None if none is.

    The scan does not assume the passing set is contiguous; if it is not,
    the largest passing d is still returned and a warning flags the gap.
    """
    rows = certifiable_table(F, bounds, d_range)
    passing = [row["d"] for row in rows if row["separable"]]
    if not passing:
        return None
    top = max(passing)
    contiguous = set(passing) == {d for d in (r["d"] for r in rows) if d <= top}
    if not contiguous:
        warnings.warn(f"separable dimensions are non-contiguous at F={F}: {passing}")
    return top


def save_bound_table(
    path: Path, entries: Mapping[tuple[int, int], float], config: OptimizerConfig
) -> None:
    digest = config_hash(config)
    payload = {
        "version": BOUND_TABLE_VERSION,
        "description": "Optimizer-estimated quantum maxima of I_N per dimension.",
        "config": config.to_dict(),
        "config_hash": digest,
        "entries": [
            {"N": N, "d": d, "value": value, "config_hash": digest}
            for (N, d), value in sorted(entries.items())
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_bound_table(
    path: Path, expected_config: OptimizerConfig | None = None, allow_stale: bool = False
) -> tuple[dict[tuple[int, int], float], dict]:
    """Read a cached bound table, refusing config mismatches unless told not to."""
    path = Path(path)
    if not path.exists():
        raise DataFileError(f"bound table not found: {path}")
    try:
        payload = json.loads(path.read_text())
        entries = {(int(e["N"]), int(e["d"])): float(e["value"]) for e in payload["entries"]}
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataFileError(f"malformed bound table {path}: {exc}") from exc
    if expected_config is not None and not allow_stale:
        expected = config_hash(expected_config)
        stale = {e.get("config_hash") for e in payload["entries"]} - {expected}
        if stale:
            raise StaleTableError(
                f"bound table {path} was generated under config hash(es) {sorted(stale)}, "
                f"current default is {expected}; regenerate (scripts/generate_bound_table.py) "
                "or pass allow_stale"
            )
    return entries, payload
