"""Potential-outcome bookkeeping for two-period randomized designs.

Units are randomized twice (z1, z2) and may refuse or seek treatment in each
period (w1, w2).  Compliance behaviour is a single latent label per unit that
does not change between periods: nevertakers never take treatment,
alwaystakers always do, compliers follow their assignment.  The defier
pattern is ruled out by assumption and is not representable.

Potential-outcome cells that an assumption says cannot exist (for example a
nevertaker's outcome under treatment receipt) are represented explicitly as
undefined; reading one raises UndefinedCell rather than returning a sentinel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    InvariantViolation,
    MonotonicityViolation,
    UndefinedCell,
)


class ComplianceType(enum.Enum):
    NEVERTAKER = "nt"
    COMPLIER = "co"
    ALWAYSTAKER = "at"
    # no defier member: ruled out by the monotonicity assumption


# fixed order used for categorical draws, array codes and serialization
COMPLIANCE_ORDER: Tuple[ComplianceType, ...] = (
    ComplianceType.NEVERTAKER,
    ComplianceType.COMPLIER,
    ComplianceType.ALWAYSTAKER,
)

COMPLIANCE_CODE: Dict[ComplianceType, int] = {c: i for i, c in enumerate(COMPLIANCE_ORDER)}

# y cells in fixed column order (w1, w2); index = 2*w1 + w2
Y_CELLS: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))


def y_cell_index(w1: int, w2: int) -> int:
    return 2 * w1 + w2


def classify_compliance(w_at_z0: int, w_at_z1: int) -> ComplianceType:
    """Map the receipt-under-assignment pair to a compliance label.

    (0,0) nevertaker, (0,1) complier, (1,1) alwaystaker.  The pair (1,0)
    would be a defier and raises MonotonicityViolation.
    """
    pair = (_as_binary(w_at_z0, "w_at_z0"), _as_binary(w_at_z1, "w_at_z1"))
    if pair == (0, 0):
        return ComplianceType.NEVERTAKER
    if pair == (0, 1):
        return ComplianceType.COMPLIER
    if pair == (1, 1):
        return ComplianceType.ALWAYSTAKER
    raise MonotonicityViolation(
        "receipt pattern (w_at_z0=1, w_at_z1=0) is a defier, which is excluded"
    )


def realized_treatment(c: ComplianceType, z: int) -> int:
    """Treatment actually received by a unit of type c assigned z."""
    z = _as_binary(z, "z")
    if c is ComplianceType.NEVERTAKER:
        return 0
    if c is ComplianceType.ALWAYSTAKER:
        return 1
    return z


def consistent_types(z1: int, w1: int, z2: int, w2: int) -> frozenset:
    """Set of compliance types that could have produced this history.

    An empty set marks corrupted data: no type reproduces the observed
    receipts in both periods.
    """
    z1 = _as_binary(z1, "z1")
    w1 = _as_binary(w1, "w1")
    z2 = _as_binary(z2, "z2")
    w2 = _as_binary(w2, "w2")
    out = []
    for c in COMPLIANCE_ORDER:
        if realized_treatment(c, z1) == w1 and realized_treatment(c, z2) == w2:
            out.append(c)
    return frozenset(out)


def _as_binary(v, name: str) -> int:
    iv = int(v)
    if iv != v or iv not in (0, 1):
        raise InvariantViolation(f"{name} must be 0 or 1, got {v!r}")
    return iv


def _as_finite(v, name: str) -> float:
    fv = float(v)
    if not np.isfinite(fv):
        raise InvariantViolation(f"{name} must be finite, got {v!r}")
    return fv


# cells each compliance type is allowed to have in the canonical table
_CANONICAL_X2 = {
    ComplianceType.NEVERTAKER: (0,),
    ComplianceType.COMPLIER: (0, 1),
    ComplianceType.ALWAYSTAKER: (1,),
}
_CANONICAL_Y = {
    ComplianceType.NEVERTAKER: ((0, 0),),
    ComplianceType.COMPLIER: Y_CELLS,
    ComplianceType.ALWAYSTAKER: ((1, 1),),
}


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Full potential-outcome table for one unit.

    x2_cells holds the intermediate outcome under each first-period receipt,
    y_cells the final outcome under each receipt pair in Y_CELLS order.
    Undefined cells are None.  Two shapes are legal for a given compliance
    label: the canonical one (exactly the cells the assumptions define) and
    the full one (every cell present), which the simulator produces in its
    all-cells diagnostic mode.
    """

    compliance: ComplianceType
    x2_cells: Tuple[Optional[float], Optional[float]]
    y_cells: Tuple[Optional[float], Optional[float], Optional[float], Optional[float]]

    def __post_init__(self):
        if not isinstance(self.compliance, ComplianceType):
            raise InvariantViolation(f"compliance must be a ComplianceType, got {self.compliance!r}")
        x2 = tuple(None if v is None else _as_finite(v, "x2 cell") for v in self.x2_cells)
        y = tuple(None if v is None else _as_finite(v, "y cell") for v in self.y_cells)
        if len(x2) != 2 or len(y) != 4:
            raise InvariantViolation("x2_cells must have 2 entries and y_cells 4")
        object.__setattr__(self, "x2_cells", x2)
        object.__setattr__(self, "y_cells", y)
        defined_x2 = tuple(w for w in (0, 1) if x2[w] is not None)
        defined_y = tuple(cell for cell in Y_CELLS if y[y_cell_index(*cell)] is not None)
        canonical = (defined_x2 == _CANONICAL_X2[self.compliance]
                     and defined_y == _CANONICAL_Y[self.compliance])
        full = defined_x2 == (0, 1) and defined_y == Y_CELLS
        if not (canonical or full):
            raise InvariantViolation(
                f"cell pattern x2={defined_x2} y={defined_y} is not the canonical or "
                f"full table for {self.compliance.value}"
            )

    @classmethod
    def from_cells(
        cls,
        compliance: ComplianceType,
        x2_of: Mapping[int, float],
        y_of: Mapping[Tuple[int, int], float],
    ) -> "PotentialTable":
        x2 = tuple(x2_of.get(w) for w in (0, 1))
        y = tuple(y_of.get(cell) for cell in Y_CELLS)
        return cls(compliance, x2, y)

    def x2(self, w1: int) -> float:
        w1 = _as_binary(w1, "w1")
        v = self.x2_cells[w1]
        if v is None:
            raise UndefinedCell(
                f"x2 cell w1={w1} is undefined for a {self.compliance.value} unit"
            )
        return v

    def y(self, w1: int, w2: int) -> float:
        w1 = _as_binary(w1, "w1")
        w2 = _as_binary(w2, "w2")
        v = self.y_cells[y_cell_index(w1, w2)]
        if v is None:
            raise UndefinedCell(
                f"y cell (w1={w1}, w2={w2}) is undefined for a {self.compliance.value} unit"
            )
        return v

    def defined_x2_cells(self) -> Tuple[int, ...]:
        return tuple(w for w in (0, 1) if self.x2_cells[w] is not None)

    def defined_y_cells(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(c for c in Y_CELLS if self.y_cells[y_cell_index(*c)] is not None)

    def __eq__(self, other):
        if not isinstance(other, PotentialTable):
            return NotImplemented
        return (self.compliance is other.compliance
                and self.x2_cells == other.x2_cells
                and self.y_cells == other.y_cells)

    def __hash__(self):
        return hash((self.compliance, self.x2_cells, self.y_cells))


@dataclass(frozen=True, eq=False)
class ObservedUnit:
    """One unit's observed record: covariates, assignments, receipts, outcomes."""

    x1: np.ndarray
    z1: int
    w1: int
    x2: float
    z2: int
    w2: int
    y: float

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x1)):
            raise InvariantViolation("x1 must be finite")
        x1.flags.writeable = False
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "z1", _as_binary(self.z1, "z1"))
        object.__setattr__(self, "w1", _as_binary(self.w1, "w1"))
        object.__setattr__(self, "z2", _as_binary(self.z2, "z2"))
        object.__setattr__(self, "w2", _as_binary(self.w2, "w2"))
        object.__setattr__(self, "x2", _as_finite(self.x2, "x2"))
        object.__setattr__(self, "y", _as_finite(self.y, "y"))

    def consistent_types(self) -> frozenset:
        return consistent_types(self.z1, self.w1, self.z2, self.w2)

    def __eq__(self, other):
        if not isinstance(other, ObservedUnit):
            return NotImplemented
        return (np.array_equal(self.x1, other.x1)
                and (self.z1, self.w1, self.x2, self.z2, self.w2, self.y)
                == (other.z1, other.w1, other.x2, other.z2, other.w2, other.y))

    def __hash__(self):
        return hash((self.x1.tobytes(), self.z1, self.w1, self.x2, self.z2, self.w2, self.y))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of observed units sharing one covariate dimension."""

    units: Tuple[ObservedUnit, ...]
    covariate_dim: int

    def __post_init__(self):
        units = tuple(self.units)
        p = int(self.covariate_dim)
        if p < 0:
            raise InvariantViolation(f"covariate_dim must be >= 0, got {p}")
        for i, u in enumerate(units):
            if u.x1.shape != (p,):
                raise DimensionMismatch(
                    f"unit {i} has covariate dimension {u.x1.shape[0]}, expected {p}"
                )
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "covariate_dim", p)

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    def as_arrays(self) -> Dict[str, np.ndarray]:
        """Column view: X1 (n, p), binary z1/w1/z2/w2, float x2/y."""
        n = len(self.units)
        p = self.covariate_dim
        X1 = np.empty((n, p))
        cols = {k: np.empty(n, dtype=int) for k in ("z1", "w1", "z2", "w2")}
        x2 = np.empty(n)
        y = np.empty(n)
        for i, u in enumerate(self.units):
            X1[i] = u.x1
            cols["z1"][i] = u.z1
            cols["w1"][i] = u.w1
            cols["z2"][i] = u.z2
            cols["w2"][i] = u.w2
            x2[i] = u.x2
            y[i] = u.y
        return {"X1": X1, "x2": x2, "y": y, **cols}

    @classmethod
    def from_arrays(cls, X1, z1, w1, x2, z2, w2, y) -> "Dataset":
        X1 = np.asarray(X1, dtype=float)
        if X1.ndim != 2:
            raise DimensionMismatch("X1 must be a 2-d array (n, p)")
        units = tuple(
            ObservedUnit(X1[i], int(z1[i]), int(w1[i]), float(x2[i]),
                         int(z2[i]), int(w2[i]), float(y[i]))
            for i in range(X1.shape[0])
        )
        return cls(units, X1.shape[1])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.covariate_dim == other.covariate_dim
                and len(self.units) == len(other.units)
                and all(a == b for a, b in zip(self.units, other.units)))
