"""Synthetic data generation for the two-period noncompliance design.

Each unit is generated from its own named substream so that the draw layout
is fixed: covariates, then the compliance label, then one noise draw per
potential cell (always all six, whether or not the type defines them), then
the two assignment coins.  Because every unit consumes the same number of
draws in the same order, flipping assignments leaves all potential-outcome
noise unchanged, which is what makes counterfactual-stability checks with
common random numbers possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .domain import (
    COMPLIANCE_ORDER,
    ComplianceType,
    Dataset,
    ObservedUnit,
    PotentialTable,
    Y_CELLS,
    realized_treatment,
    y_cell_index,
)
from .errors import InvalidConfig, NoCompliers, UndefinedCell
from .rng import substream


@dataclass(frozen=True, eq=False)
class ConstantCompliance:
    """Covariate-free stratum probabilities in (nt, co, at) order."""

    probs: Tuple[float, float, float]

    def __post_init__(self):
        probs = tuple(float(v) for v in self.probs)
        if len(probs) != 3:
            raise InvalidConfig("compliance_probs: need exactly 3 probabilities")
        if any(v < 0 for v in probs):
            raise InvalidConfig("compliance_probs: probabilities must be non-negative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidConfig(
                f"compliance_probs: must sum to 1 within 1e-12, got {sum(probs)!r}"
            )
        object.__setattr__(self, "probs", probs)

    def stratum_probs(self, x1: np.ndarray) -> np.ndarray:
        return np.asarray(self.probs)

    def __eq__(self, other):
        return isinstance(other, ConstantCompliance) and self.probs == other.probs


@dataclass(frozen=True, eq=False)
class LogitCompliance:
    """Multinomial-logit stratum model with the complier as baseline."""

    gamma_nt: np.ndarray
    gamma_at: np.ndarray

    def __post_init__(self):
        gnt = np.asarray(self.gamma_nt, dtype=float).reshape(-1)
        gat = np.asarray(self.gamma_at, dtype=float).reshape(-1)
        if gnt.shape != gat.shape or gnt.shape[0] < 1:
            raise InvalidConfig("compliance_probs: logit rows must share length p+1")
        if not (np.all(np.isfinite(gnt)) and np.all(np.isfinite(gat))):
            raise InvalidConfig("compliance_probs: logit rows must be finite")
        gnt.flags.writeable = False
        gat.flags.writeable = False
        object.__setattr__(self, "gamma_nt", gnt)
        object.__setattr__(self, "gamma_at", gat)

    def stratum_probs(self, x1: np.ndarray) -> np.ndarray:
        u = np.concatenate([[1.0], x1])
        logits = np.array([float(self.gamma_nt @ u), 0.0, float(self.gamma_at @ u)])
        m = logits.max()
        w = np.exp(logits - m)
        return w / w.sum()

    def __eq__(self, other):
        return (isinstance(other, LogitCompliance)
                and np.array_equal(self.gamma_nt, other.gamma_nt)
                and np.array_equal(self.gamma_at, other.gamma_at))


ComplianceSpec = Union[ConstantCompliance, LogitCompliance]


@dataclass(frozen=True, eq=False)
class ConstantAssignment:
    """Covariate-free assignment probabilities for the two periods."""

    pi_z1: float
    pi_z2: float

    def __post_init__(self):
        for name in ("pi_z1", "pi_z2"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise InvalidConfig(f"assignment_probs: {name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)

    def assignment_probs(self, x1: np.ndarray) -> Tuple[float, float]:
        return self.pi_z1, self.pi_z2

    def __eq__(self, other):
        return (isinstance(other, ConstantAssignment)
                and (self.pi_z1, self.pi_z2) == (other.pi_z1, other.pi_z2))


@dataclass(frozen=True, eq=False)
class LogitAssignment:
    """Logistic-in-covariates assignment probabilities, one row per period."""

    coef_z1: np.ndarray
    coef_z2: np.ndarray

    def __post_init__(self):
        c1 = np.asarray(self.coef_z1, dtype=float).reshape(-1)
        c2 = np.asarray(self.coef_z2, dtype=float).reshape(-1)
        if c1.shape != c2.shape or c1.shape[0] < 1:
            raise InvalidConfig("assignment_probs: logit rows must share length p+1")
        if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(c2))):
            raise InvalidConfig("assignment_probs: logit rows must be finite")
        c1.flags.writeable = False
        c2.flags.writeable = False
        object.__setattr__(self, "coef_z1", c1)
        object.__setattr__(self, "coef_z2", c2)

    def assignment_probs(self, x1: np.ndarray) -> Tuple[float, float]:
        u = np.concatenate([[1.0], x1])
        e1 = float(self.coef_z1 @ u)
        e2 = float(self.coef_z2 @ u)
        return 1.0 / (1.0 + np.exp(-e1)), 1.0 / (1.0 + np.exp(-e2))

    def __eq__(self, other):
        return (isinstance(other, LogitAssignment)
                and np.array_equal(self.coef_z1, other.coef_z1)
                and np.array_equal(self.coef_z2, other.coef_z2))


AssignmentSpec = Union[ConstantAssignment, LogitAssignment]


def default_intermediate_coeffs(p: int) -> np.ndarray:
    """[intercept, x1 slopes, w1, alwaystaker shift, nevertaker shift]."""
    return np.array([0.5] + [0.3] * p + [1.0, 0.5, -0.5])


def default_outcome_coeffs(p: int) -> np.ndarray:
    """[intercept, x1 slopes, x2, w1, w2, w1*w2, alwaystaker, nevertaker]."""
    return np.array([0.0] + [0.3] * p + [0.5, 0.4, 0.6, 0.3, 0.8, -0.8])


@dataclass(frozen=True, eq=False)
class DgpConfig:
    """Everything the simulator needs; all randomness comes from `seed`.

    all_cells=True switches on the diagnostic mode that also draws the
    potential cells the assumptions leave undefined for nevertakers and
    alwaystakers, so sample-average effects over every unit are computable.
    """

    n: int
    seed: int
    p: int = 1
    compliance_probs: ComplianceSpec = ConstantCompliance((0.2, 0.6, 0.2))
    assignment_probs: AssignmentSpec = ConstantAssignment(0.5, 0.5)
    intermediate_coeffs: Optional[np.ndarray] = None
    intermediate_noise_sd: float = 1.0
    outcome_coeffs: Optional[np.ndarray] = None
    outcome_noise_sd: float = 1.0
    all_cells: bool = False

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidConfig(f"n: must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if int(self.p) < 0:
            raise InvalidConfig(f"p: must be >= 0, got {self.p}")
        object.__setattr__(self, "p", int(self.p))
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidConfig(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))
        if not isinstance(self.compliance_probs, (ConstantCompliance, LogitCompliance)):
            raise InvalidConfig("compliance_probs: expected a compliance spec")
        if isinstance(self.compliance_probs, LogitCompliance):
            if self.compliance_probs.gamma_nt.shape[0] != self.p + 1:
                raise InvalidConfig(
                    f"compliance_probs: logit rows must have length p+1={self.p + 1}"
                )
        if not isinstance(self.assignment_probs, (ConstantAssignment, LogitAssignment)):
            raise InvalidConfig("assignment_probs: expected an assignment spec")
        if isinstance(self.assignment_probs, LogitAssignment):
            if self.assignment_probs.coef_z1.shape[0] != self.p + 1:
                raise InvalidConfig(
                    f"assignment_probs: logit rows must have length p+1={self.p + 1}"
                )
        ic = self.intermediate_coeffs
        ic = default_intermediate_coeffs(self.p) if ic is None else np.asarray(ic, dtype=float)
        if ic.shape != (self.p + 4,):
            raise InvalidConfig(
                f"intermediate_coeffs: must have length p+4={self.p + 4}, got {ic.shape[0]}"
            )
        if not np.all(np.isfinite(ic)):
            raise InvalidConfig("intermediate_coeffs: must be finite")
        ic = ic.copy()
        ic.flags.writeable = False
        object.__setattr__(self, "intermediate_coeffs", ic)
        oc = self.outcome_coeffs
        oc = default_outcome_coeffs(self.p) if oc is None else np.asarray(oc, dtype=float)
        if oc.shape != (self.p + 7,):
            raise InvalidConfig(
                f"outcome_coeffs: must have length p+7={self.p + 7}, got {oc.shape[0]}"
            )
        if not np.all(np.isfinite(oc)):
            raise InvalidConfig("outcome_coeffs: must be finite")
        oc = oc.copy()
        oc.flags.writeable = False
        object.__setattr__(self, "outcome_coeffs", oc)
        for name in ("intermediate_noise_sd", "outcome_noise_sd"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0):
                raise InvalidConfig(f"{name}: must be positive and finite, got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "all_cells", bool(self.all_cells))

    def __eq__(self, other):
        if not isinstance(other, DgpConfig):
            return NotImplemented
        return (
            (self.n, self.seed, self.p, self.intermediate_noise_sd,
             self.outcome_noise_sd, self.all_cells)
            == (other.n, other.seed, other.p, other.intermediate_noise_sd,
                other.outcome_noise_sd, other.all_cells)
            and self.compliance_probs == other.compliance_probs
            and self.assignment_probs == other.assignment_probs
            and np.array_equal(self.intermediate_coeffs, other.intermediate_coeffs)
            and np.array_equal(self.outcome_coeffs, other.outcome_coeffs)
        )


@dataclass(frozen=True)
class GroundTruth:
    """Latent side of a simulated dataset.

    true_late is the finite-sample complier contrast between receiving
    treatment in both periods and in neither; NaN when the sample holds no
    compliers (n_co == 0).
    """

    compliance: Tuple[ComplianceType, ...]
    tables: Tuple[PotentialTable, ...]
    true_late: float
    n_co: int


_DEFAULT_CONTRAST = ((1, 1), (0, 0))


def _draw_categorical(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over (nt, co, at); zero-probability cells are skipped."""
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= probs.shape[0]:
        positive = np.nonzero(probs > 0)[0]
        idx = int(positive[-1])
    return idx


def _stratum_indicators(c: ComplianceType) -> Tuple[float, float]:
    at = 1.0 if c is ComplianceType.ALWAYSTAKER else 0.0
    nt = 1.0 if c is ComplianceType.NEVERTAKER else 0.0
    return at, nt


def simulate_dataset(cfg: DgpConfig) -> Tuple[Dataset, GroundTruth]:
    """Generate a dataset and its latent ground truth, deterministically."""
    p = cfg.p
    alpha = cfg.intermediate_coeffs
    beta = cfg.outcome_coeffs
    sx = cfg.intermediate_noise_sd
    sy = cfg.outcome_noise_sd

    units: List[ObservedUnit] = []
    labels: List[ComplianceType] = []
    tables: List[PotentialTable] = []
    for i in range(cfg.n):
        g = substream(cfg.seed, "unit", i)
        x1 = g.standard_normal(p)
        u_c = g.uniform()
        probs = cfg.compliance_probs.stratum_probs(x1)
        c = COMPLIANCE_ORDER[_draw_categorical(probs, u_c)]
        eps_x = g.standard_normal(2)          # one noise draw per x2 cell
        eps_y = g.standard_normal(4)          # one noise draw per y cell
        u_z = g.uniform(size=2)
        pi1, pi2 = cfg.assignment_probs.assignment_probs(x1)
        z1 = int(u_z[0] < pi1)
        z2 = int(u_z[1] < pi2)
        w1 = realized_treatment(c, z1)
        w2 = realized_treatment(c, z2)

        at, nt = _stratum_indicators(c)
        if cfg.all_cells or c is ComplianceType.COMPLIER:
            x2_ws = (0, 1)
        else:
            x2_ws = (w1,)
        x2_of = {}
        for wcell in x2_ws:
            mu = float(alpha[0] + x1 @ alpha[1:1 + p] + alpha[p + 1] * wcell
                       + alpha[p + 2] * at + alpha[p + 3] * nt)
            x2_of[wcell] = mu + sx * eps_x[wcell]
        if cfg.all_cells or c is ComplianceType.COMPLIER:
            y_ws = Y_CELLS
        else:
            y_ws = ((w1, w2),)
        y_of = {}
        for cell in y_ws:
            w1c, w2c = cell
            mu = float(beta[0] + x1 @ beta[1:1 + p] + beta[p + 1] * x2_of[w1c]
                       + beta[p + 2] * w1c + beta[p + 3] * w2c
                       + beta[p + 4] * w1c * w2c + beta[p + 5] * at + beta[p + 6] * nt)
            y_of[cell] = mu + sy * eps_y[y_cell_index(w1c, w2c)]

        table = PotentialTable.from_cells(c, x2_of, y_of)
        units.append(ObservedUnit(x1, z1, w1, x2_of[w1], z2, w2, y_of[(w1, w2)]))
        labels.append(c)
        tables.append(table)

    n_co = sum(1 for c in labels if c is ComplianceType.COMPLIER)
    if n_co > 0:
        (a1, a2), (b1, b2) = _DEFAULT_CONTRAST
        diffs = [t.y(a1, a2) - t.y(b1, b2) for t, c in zip(tables, labels)
                 if c is ComplianceType.COMPLIER]
        true_late = float(np.mean(diffs))
    else:
        true_late = float("nan")
    gt = GroundTruth(tuple(labels), tuple(tables), true_late, n_co)
    return Dataset(tuple(units), p), gt


def true_sample_late(gt: GroundTruth,
                     contrast: Tuple[Tuple[int, int], Tuple[int, int]] = _DEFAULT_CONTRAST) -> float:
    """Finite-sample average effect over the compliers for the given contrast."""
    if gt.n_co == 0:
        raise NoCompliers("the sample contains no compliers")
    (a1, a2), (b1, b2) = contrast
    diffs = [t.y(a1, a2) - t.y(b1, b2) for t, c in zip(gt.tables, gt.compliance)
             if c is ComplianceType.COMPLIER]
    return float(np.mean(diffs))


def true_sample_sate(gt: GroundTruth,
                     contrast: Tuple[Tuple[int, int], Tuple[int, int]] = _DEFAULT_CONTRAST) -> float:
    """Finite-sample average effect over every unit.

    Requires the all-cells diagnostic tables; with canonical tables the
    needed cells are undefined for noncompliers and UndefinedCell is raised.
    """
    (a1, a2), (b1, b2) = contrast
    diffs = [t.y(a1, a2) - t.y(b1, b2) for t in gt.tables]
    return float(np.mean(diffs))
