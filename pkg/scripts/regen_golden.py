#!/usr/bin/env python3
"""Regenerate the golden posterior table for the committed 3-unit fixture.

Deliberately independent of the package: the model densities, stratum
probabilities, enumeration, and contrast are all re-derived here from
scratch with scipy and itertools, so agreement with the package's
enumerator is a real cross-check rather than a tautology.

Usage: python scripts/regen_golden.py
"""

import itertools
import json
import math
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "seqlate" / "fixtures"

NT, CO, AT = 0, 1, 2


def stratum_logprobs(theta, x1):
    u = np.concatenate([[1.0], x1])
    logits = np.array([float(np.dot(theta["gamma_nt"], u)), 0.0,
                       float(np.dot(theta["gamma_at"], u))])
    return logits - logsumexp(logits)


def receipt(c, z):
    if c == NT:
        return 0
    if c == AT:
        return 1
    return z


def x2_mean(theta, c, x1, w1):
    a = np.asarray(theta["alpha"])
    p = len(x1)
    feats = np.concatenate([[1.0], x1, [w1, 1.0 if c == AT else 0.0,
                                        1.0 if c == NT else 0.0]])
    assert feats.shape[0] == p + 4
    return float(a @ feats)


def y_mean(theta, c, x1, x2, w1, w2):
    b = np.asarray(theta["beta"])
    p = len(x1)
    feats = np.concatenate([[1.0], x1, [x2, w1, w2, w1 * w2,
                                        1.0 if c == AT else 0.0,
                                        1.0 if c == NT else 0.0]])
    assert feats.shape[0] == p + 7
    return float(b @ feats)


def unit_log_factor(theta, unit, c):
    x1 = np.asarray(unit["x1"])
    if receipt(c, unit["z1"]) != unit["w1"] or receipt(c, unit["z2"]) != unit["w2"]:
        return -np.inf
    lp = stratum_logprobs(theta, x1)[c]
    lp += norm.logpdf(unit["x2"], loc=x2_mean(theta, c, x1, unit["w1"]),
                      scale=theta["sigma_x"])
    lp += norm.logpdf(unit["y"],
                      loc=y_mean(theta, c, x1, unit["x2"], unit["w1"], unit["w2"]),
                      scale=theta["sigma_y"])
    return float(lp)


def complier_contrast(theta, unit):
    x1 = np.asarray(unit["x1"])

    def x2_at(w1):
        if w1 == unit["w1"]:
            return unit["x2"]
        return x2_mean(theta, CO, x1, w1)

    def y_at(w1, w2):
        if (w1, w2) == (unit["w1"], unit["w2"]):
            return unit["y"]
        return y_mean(theta, CO, x1, x2_at(w1), w1, w2)

    return y_at(1, 1) - y_at(0, 0)


def main():
    doc = json.loads((FIXTURES / "three_unit.json").read_text())
    units = doc["units"]
    thetas = doc["grid"]["thetas"]
    weights = doc["grid"]["weights"]
    n, k = len(units), len(thetas)

    L = np.array([[[unit_log_factor(th, u, c) for c in range(3)]
                   for u in units] for th in thetas])
    diffs = np.array([[complier_contrast(th, u) for u in units] for th in thetas])

    configs = list(itertools.product(range(3), repeat=n))
    logpost = np.empty((len(configs), k))
    for j, cfg in enumerate(configs):
        for ki in range(k):
            logpost[j, ki] = math.log(weights[ki]) + sum(
                L[ki, i, c] for i, c in enumerate(cfg))
    log_evidence = float(logsumexp(logpost))
    probs = np.exp(logpost - log_evidence)
    probs[~np.isfinite(logpost)] = 0.0

    theta_probs = probs.sum(axis=0)
    joint = probs.sum(axis=1)
    marginals = np.zeros((n, 3))
    late_num = 0.0
    dropped = 0.0
    for j, cfg in enumerate(configs):
        for i, c in enumerate(cfg):
            marginals[i, c] += joint[j]
        co_units = [i for i, c in enumerate(cfg) if c == CO]
        if not co_units:
            dropped += joint[j]
            continue
        for ki in range(k):
            late_num += probs[j, ki] * float(np.mean(diffs[ki, co_units]))
    late_mean = late_num / (1.0 - dropped)

    golden = {
        "theta_probs": theta_probs.tolist(),
        "compliance_marginals": marginals.tolist(),
        "joint_probs": joint.tolist(),
        "late_mean": late_mean,
        "late_dropped_mass": dropped,
        "log_evidence": log_evidence,
    }
    out = FIXTURES / "golden_three_unit.json"
    out.write_text(json.dumps(golden, indent=2) + "\n")
    print(f"wrote {out}")
    print(f"  theta_probs = {np.round(theta_probs, 6).tolist()}")
    print(f"  late_mean   = {late_mean:.6f}, dropped mass = {dropped:.6f}")


if __name__ == "__main__":
    main()
