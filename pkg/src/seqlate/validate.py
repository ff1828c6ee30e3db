"""Ground-truth machinery: exact enumeration, grid sampler, MCMC diagnostics.

exact_posterior enumerates every (parameter grid point, label configuration)
pair for a small dataset and normalizes with compensated summation, so its
output is an exact reference distribution.  grid_gibbs runs the same model
as a genuine two-block Gibbs chain whose parameter lives on the grid; its
long-run label frequencies must match the enumeration, which is the
strongest whole-sampler check the package has.

rhat is the split-chain potential scale reduction factor; ess uses the
initial-monotone-sequence truncation of the autocorrelation sum.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .domain import (
    COMPLIANCE_CODE,
    COMPLIANCE_ORDER,
    ComplianceType,
    Dataset,
    ObservedUnit,
)
from .errors import InvariantViolation, TooFewDraws, TooLarge
from .gibbs import _VectorData, _vector_categorical, as_vector_data
from .model import (
    Theta,
    compliance_log_prob,
    compliance_log_prob_matrix,
    intermediate_loglik,
    observed_cell_logliks,
    outcome_loglik,
    treatment_lik,
)
from .rng import substream

_DEFAULT_CONTRAST = ((1, 1), (0, 0))


@dataclass(frozen=True)
class DiscreteSpec:
    """A finite parameter grid with prior weights, for exact enumeration."""

    thetas: Tuple[Theta, ...]
    weights: np.ndarray
    max_units: int = 8
    budget: int = 1_000_000

    def __post_init__(self):
        thetas = tuple(self.thetas)
        if not thetas:
            raise InvariantViolation("theta grid must be non-empty")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != len(thetas):
            raise InvariantViolation("weights must match the grid length")
        if np.any(w < 0):
            raise InvariantViolation("weights must be non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise InvariantViolation(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        if not 1 <= int(self.max_units) <= 8:
            raise InvariantViolation("max_units must lie in [1, 8]")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "max_units", int(self.max_units))
        object.__setattr__(self, "budget", int(self.budget))


@dataclass(frozen=True)
class ExactPosterior:
    """Enumeration output over a DiscreteSpec.

    late_values / late_probs describe the posterior of the complier contrast
    evaluated at imputation means; configurations without compliers carry no
    contrast and their mass (late_dropped_mass) is renormalized away, the
    same convention the sampler uses for missing draws.
    """

    theta_probs: np.ndarray
    compliance_marginals: np.ndarray
    joint_probs: np.ndarray
    late_values: np.ndarray
    late_probs: np.ndarray
    late_dropped_mass: float
    log_evidence: float

    @property
    def late_mean(self) -> float:
        if self.late_probs.size == 0:
            return float("nan")
        return float(self.late_values @ self.late_probs)


def config_index(codes: Sequence[int]) -> int:
    """Base-3 encoding of a label configuration, unit 0 most significant."""
    idx = 0
    for c in codes:
        idx = idx * 3 + int(c)
    return idx


def _unit_log_factors(theta: Theta, unit: ObservedUnit) -> np.ndarray:
    """Log of the five-factor weight for each stratum, -inf when excluded."""
    log_pc = compliance_log_prob(theta, unit.x1)
    out = np.full(3, -np.inf)
    for code, c in enumerate(COMPLIANCE_ORDER):
        t1 = treatment_lik(c, unit.z1, unit.w1)
        t2 = treatment_lik(c, unit.z2, unit.w2)
        if t1 == 0 or t2 == 0:
            continue
        out[code] = (log_pc[code]
                     + intermediate_loglik(theta, c, unit.x1, unit.w1, unit.x2)
                     + outcome_loglik(theta, c, unit.x1, unit.x2, unit.w1, unit.w2, unit.y))
    return out


def _complier_cell_means(theta: Theta, unit: ObservedUnit,
                         contrast: Tuple[Tuple[int, int], Tuple[int, int]]) -> float:
    """Contrast at imputation means, were this unit a complier.

    Observed cells keep their observed values; a missing x2 cell sits at its
    model mean, and a missing y cell at its model mean evaluated at that x2
    value (exact for the mean because the outcome model is linear in x2).
    """
    from .model import _x2_mean, _y_mean

    co = ComplianceType.COMPLIER

    def x2_at(w1: int) -> float:
        if w1 == unit.w1:
            return unit.x2
        return _x2_mean(theta, co, unit.x1, w1)

    def y_at(w1: int, w2: int) -> float:
        if (w1, w2) == (unit.w1, unit.w2):
            return unit.y
        return _y_mean(theta, co, unit.x1, x2_at(w1), w1, w2)

    (a1, a2), (b1, b2) = contrast
    return y_at(a1, a2) - y_at(b1, b2)


def exact_posterior(data: Dataset, spec: DiscreteSpec,
                    contrast: Tuple[Tuple[int, int], Tuple[int, int]] = _DEFAULT_CONTRAST) -> ExactPosterior:
    """Enumerate the posterior over (grid point, label configuration).

    Raises TooLarge when 3**n * len(grid) exceeds the grid's budget or when
    the dataset has more than max_units units.
    """
    n = len(data)
    k = len(spec.thetas)
    if n > spec.max_units:
        raise TooLarge(f"dataset has {n} units, enumeration allows {spec.max_units}")
    total = (3 ** n) * k
    if total > spec.budget:
        raise TooLarge(f"3^{n} * {k} = {total} configurations exceed budget {spec.budget}")

    # per-grid-point, per-unit, per-stratum log factors
    L = np.empty((k, n, 3))
    for ki, th in enumerate(spec.thetas):
        for i, unit in enumerate(data):
            L[ki, i] = _unit_log_factors(th, unit)
    log_w = np.log(spec.weights)

    diffs = np.empty((k, n))
    for ki, th in enumerate(spec.thetas):
        for i, unit in enumerate(data):
            diffs[ki, i] = _complier_cell_means(th, unit, contrast)

    configs = list(itertools.product(range(3), repeat=n))
    n_cfg = len(configs)
    logpost = np.empty((n_cfg, k))
    for j, cfg in enumerate(configs):
        lw = log_w.copy()
        for i, c in enumerate(cfg):
            lw = lw + L[:, i, c]
        logpost[j] = lw

    flat = logpost.ravel()
    finite = flat[np.isfinite(flat)]
    if finite.size == 0:
        raise InvariantViolation("every configuration has zero posterior weight")
    m = float(finite.max())
    # compensated summation keeps the normalizing constant independent of
    # the enumeration order well past 1e-12 relative error
    norm = math.fsum(math.exp(v - m) for v in flat if np.isfinite(v))
    log_evidence = m + math.log(norm)
    probs = np.where(np.isfinite(logpost), np.exp(logpost - log_evidence), 0.0)

    theta_probs = probs.sum(axis=0)
    joint = probs.sum(axis=1)
    marginals = np.zeros((n, 3))
    late_vals = []
    late_ps = []
    dropped = 0.0
    for j, cfg in enumerate(configs):
        pj = joint[j]
        for i, c in enumerate(cfg):
            marginals[i, c] += pj
        co_units = [i for i, c in enumerate(cfg) if c == COMPLIANCE_CODE[ComplianceType.COMPLIER]]
        if not co_units:
            dropped += pj
            continue
        for ki in range(k):
            pk = probs[j, ki]
            if pk == 0.0:
                continue
            late_vals.append(float(np.mean(diffs[ki, co_units])))
            late_ps.append(pk)
    late_vals = np.asarray(late_vals)
    late_ps = np.asarray(late_ps)
    if late_ps.size:
        late_ps = late_ps / late_ps.sum()
    return ExactPosterior(theta_probs, marginals, joint, late_vals, late_ps,
                          float(dropped), float(log_evidence))


@dataclass
class GridGibbsResult:
    """Per-sweep trace of the grid-parameter Gibbs chain."""

    theta_idx: np.ndarray
    config_idx: np.ndarray
    late: np.ndarray     # contrast at imputation means; NaN when no compliers

    def joint_freq(self, n_units: int) -> np.ndarray:
        counts = np.bincount(self.config_idx, minlength=3 ** n_units)
        return counts / self.config_idx.size

    def marginal_freq(self, n_units: int) -> np.ndarray:
        out = np.zeros((n_units, 3))
        codes = self.config_idx
        for i in reversed(range(n_units)):
            out[i] = np.bincount(codes % 3, minlength=3) / codes.size
            codes = codes // 3
        return out


def grid_gibbs(data: Dataset, spec: DiscreteSpec, n_sweeps: int, seed: int,
               contrast: Tuple[Tuple[int, int], Tuple[int, int]] = _DEFAULT_CONTRAST) -> GridGibbsResult:
    """Two-block Gibbs sampler with theta restricted to the grid.

    Alternates an exact categorical draw of the grid index given the labels
    with exact per-unit label draws given the grid point, both conditioning
    on observed cells only.  Its stationary law is exactly the enumerated
    posterior, so long-run frequencies must match exact_posterior.
    """
    vd = as_vector_data(data)
    n, k = vd.n, len(spec.thetas)
    # vectorized route to the same five-factor tensor the enumerator builds
    # from scalar calls; the two code paths cross-check each other
    L = np.empty((k, n, 3))
    diffs = np.empty((k, n))
    for ki, th in enumerate(spec.thetas):
        lw = compliance_log_prob_matrix(th, vd.U1)
        lw = lw + observed_cell_logliks(th, vd.X1, vd.w1f, vd.w2f, vd.x2, vd.y)
        lw[~vd.consistent] = -np.inf
        L[ki] = lw
        for i, unit in enumerate(data):
            diffs[ki, i] = _complier_cell_means(th, unit, contrast)
    log_w = np.log(spec.weights)
    rng = substream(seed, "grid-gibbs", 0)

    # labels start uniform over each unit's admissible strata
    mask = vd.consistent.astype(float)
    codes = _vector_categorical(mask / mask.sum(axis=1, keepdims=True),
                                rng.uniform(size=n))
    rows = np.arange(n)
    powers = 3 ** np.arange(n - 1, -1, -1)
    theta_idx = np.empty(n_sweeps, dtype=np.int64)
    config_idx = np.empty(n_sweeps, dtype=np.int64)
    late = np.empty(n_sweeps)
    for s in range(n_sweeps):
        # exact conditional over the grid given the labels
        lw_k = log_w + L[:, rows, codes].sum(axis=1)
        m = lw_k.max()
        pk = np.exp(lw_k - m)
        pk /= pk.sum()
        ki = int(_vector_categorical(pk[None, :], rng.uniform(size=1))[0])
        # exact conditional over labels given the grid point
        lw_c = L[ki]
        mc = lw_c.max(axis=1, keepdims=True)
        pc = np.exp(lw_c - mc)
        pc /= pc.sum(axis=1, keepdims=True)
        codes = _vector_categorical(pc, rng.uniform(size=n))
        theta_idx[s] = ki
        config_idx[s] = int(codes @ powers)
        co = codes == COMPLIANCE_CODE[ComplianceType.COMPLIER]
        late[s] = float(diffs[ki, co].mean()) if co.any() else float("nan")
    return GridGibbsResult(theta_idx, config_idx, late)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# ---------------------------------------------------------------------------
# convergence diagnostics
# ---------------------------------------------------------------------------

def rhat(chains: Sequence[Sequence[float]]) -> float:
    """Split-chain potential scale reduction factor.

    Each chain is split in half, giving 2m sequences of length n//2; the
    statistic is sqrt(((n-1)/n * W + B/n) / W).  All-identical input returns
    exactly 1.0 with a warning (zero-variance convention); identical-within,
    disjoint-between chains return +inf.
    """
    arrs = [np.asarray(c, dtype=float).ravel() for c in chains]
    if len(arrs) < 2:
        raise TooFewDraws("rhat needs at least 2 chains")
    n_min = min(a.size for a in arrs)
    if n_min < 4:
        raise TooFewDraws("rhat needs at least 4 draws per chain")
    half = n_min // 2
    split = []
    for a in arrs:
        a = a[:n_min]
        split.append(a[:half])
        split.append(a[n_min - half:])
    mat = np.asarray(split)
    if not np.all(np.isfinite(mat)):
        raise InvariantViolation("rhat input must be finite")
    n = half
    means = mat.mean(axis=1)
    variances = mat.var(axis=1, ddof=1)
    w = float(variances.mean())
    b = n * float(means.var(ddof=1))
    if w == 0.0:
        if b == 0.0:
            warnings.warn("all chains are constant and identical; R-hat set to 1.0")
            return 1.0
        return float("inf")
    var_hat = (n - 1) / n * w + b / n
    return float(np.sqrt(var_hat / w))


def ess(draws: Sequence[float]) -> float:
    """Effective sample size of one sequence.

    The autocorrelation sum is truncated with the initial-monotone-sequence
    rule: consecutive-lag pairs are kept while positive and forced to be
    non-increasing.  A constant sequence returns n with a warning.  The
    estimate is capped at 1.5 * n.
    """
    x = np.asarray(draws, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise TooFewDraws("ess needs at least 10 draws")
    if not np.all(np.isfinite(x)):
        raise InvariantViolation("ess input must be finite")
    xc = x - x.mean()
    var0 = float(xc @ xc) / n
    if var0 == 0.0:
        warnings.warn("constant sequence; effective sample size set to n")
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    # Geyer pairs G_m = rho_{2m} + rho_{2m+1}
    n_pairs = n // 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    keep = 0
    while keep < n_pairs and pairs[keep] > 0:
        keep += 1
    g = np.minimum.accumulate(pairs[:keep]) if keep else np.zeros(0)
    # tau below 1/1.5 only says the draws anti-correlate strongly; the cap
    # keeps the estimate conservative
    tau = max(2.0 * float(g.sum()) - 1.0, 1.0 / 1.5)
    return float(min(n / tau, 1.5 * n))


def multi_ess(chains: Sequence[Sequence[float]]) -> float:
    """Sum of per-chain effective sizes, for Monte Carlo standard errors."""
    return float(sum(ess(c) for c in chains))


# ---------------------------------------------------------------------------
# committed fixture and self-check suite
# ---------------------------------------------------------------------------

def _fixture_text(name: str) -> str:
    return resources.files("seqlate.fixtures").joinpath(name).read_text()


def load_three_unit_fixture() -> Tuple[Dataset, DiscreteSpec]:
    """The committed 3-unit dataset and 4-point grid used by the self-checks."""
    doc = json.loads(_fixture_text("three_unit.json"))
    units = tuple(
        ObservedUnit(np.asarray(u["x1"], dtype=float), u["z1"], u["w1"],
                     u["x2"], u["z2"], u["w2"], u["y"])
        for u in doc["units"]
    )
    data = Dataset(units, doc["covariate_dim"])
    thetas = tuple(Theta.from_dict(d) for d in doc["grid"]["thetas"])
    spec = DiscreteSpec(thetas, np.asarray(doc["grid"]["weights"], dtype=float))
    return data, spec


def load_golden() -> dict:
    return json.loads(_fixture_text("golden_three_unit.json"))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_validation_suite(n_sweeps: int = 200_000, seed: int = 20260819) -> List[CheckResult]:
    """Self-checks against the committed fixture; all must pass."""
    results: List[CheckResult] = []
    data, spec = load_three_unit_fixture()
    golden = load_golden()
    post = exact_posterior(data, spec)

    dev = max(
        float(np.abs(post.theta_probs - np.asarray(golden["theta_probs"])).max()),
        float(np.abs(post.compliance_marginals - np.asarray(golden["compliance_marginals"])).max()),
        float(np.abs(post.joint_probs - np.asarray(golden["joint_probs"])).max()),
        abs(post.late_mean - golden["late_mean"]),
    )
    results.append(CheckResult(
        "enumeration matches committed golden table",
        dev < 1e-10, f"max deviation {dev:.3e} (tolerance 1e-10)"))

    bad_mass = 0.0
    for i, unit in enumerate(data):
        admissible = {COMPLIANCE_CODE[c] for c in unit.consistent_types()}
        for code in range(3):
            if code not in admissible:
                bad_mass = max(bad_mass, float(post.compliance_marginals[i, code]))
    results.append(CheckResult(
        "no posterior mass on excluded strata",
        bad_mass == 0.0, f"max excluded-stratum mass {bad_mass:.3e}"))

    perm = [2, 0, 1]
    data_perm = Dataset(tuple(data.units[i] for i in perm), data.covariate_dim)
    post_perm = exact_posterior(data_perm, spec)
    rel = abs(post_perm.log_evidence - post.log_evidence) / abs(post.log_evidence)
    results.append(CheckResult(
        "normalizing constant invariant to unit order",
        rel < 1e-12, f"relative deviation {rel:.3e} (tolerance 1e-12)"))

    run = grid_gibbs(data, spec, n_sweeps, seed)
    tv_joint = total_variation(run.joint_freq(len(data)), post.joint_probs)
    tv_marg = max(
        total_variation(run.marginal_freq(len(data))[i], post.compliance_marginals[i])
        for i in range(len(data))
    )
    results.append(CheckResult(
        f"grid sampler label frequencies match enumeration ({n_sweeps} sweeps)",
        tv_joint <= 0.02 and tv_marg <= 0.02,
        f"joint TV {tv_joint:.4f}, max marginal TV {tv_marg:.4f} (tolerance 0.02)"))

    finite = run.late[np.isfinite(run.late)]
    late_dev = abs(float(finite.mean()) - post.late_mean) if finite.size else float("inf")
    results.append(CheckResult(
        "grid sampler complier contrast matches enumeration",
        late_dev <= 0.05, f"deviation {late_dev:.4f} (tolerance 0.05)"))

    rng = substream(seed, "diag-check", 0)
    iid = [rng.standard_normal(1000) for _ in range(4)]
    r = rhat(iid)
    e = ess(rng.standard_normal(5000))
    results.append(CheckResult(
        "diagnostics behave on independent draws",
        0.99 <= r <= 1.05 and 0.8 <= e / 5000 <= 1.2,
        f"rhat {r:.4f}, ess/n {e / 5000:.3f}"))
    return results
