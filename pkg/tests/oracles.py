"""Independent reference implementations used only by the tests."""

import csv
from collections import defaultdict

import numpy as np


def fista_lasso(X, y, lam, iters=200_000, tol=1e-13):
    """Accelerated proximal gradient on ||y - X^T theta||^2 + lam ||theta||_1, with restarts."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    L = 2.0 * np.linalg.norm(X, 2) ** 2
    if L == 0:
        return np.zeros(X.shape[0])
    theta = np.zeros(X.shape[0])
    z, s = theta.copy(), 1.0

    def obj(v):
        r = y - X.T @ v
        return r @ r + lam * np.abs(v).sum()

    prev = obj(theta)
    for _ in range(iters):
        grad = -2.0 * X @ (y - X.T @ z)
        u = z - grad / L
        new = np.sign(u) * np.maximum(np.abs(u) - lam / L, 0.0)
        cur = obj(new)
        if cur > prev and s > 1.0:  # adaptive restart, only while momentum is on
            z, s = theta.copy(), 1.0
            continue
        s_next = 0.5 * (1 + np.sqrt(1 + 4 * s * s))
        z = new + (s - 1) / s_next * (new - theta)
        step = np.abs(new - theta).max()
        theta, s, prev = new, s_next, cur
        if step < tol * (1 + np.abs(theta).max()):
            break
    return theta


def mc_censored_variance(a, b, sigma1, n, rng):
    """Empirical variance of clip(e, a, b) and its standard error."""
    x = np.clip(sigma1 * rng.standard_normal(n), a, b)
    var = x.var(ddof=1)
    # standard error of the sample variance from the fourth central moment
    m4 = np.mean((x - x.mean()) ** 4)
    se = np.sqrt(max(m4 - var**2, 0.0) / n)
    return var, se


def inverse_power_min_eig(M, iters=500, shift=None):
    """Smallest eigenvalue of a symmetric PSD matrix via shifted inverse iteration."""
    M = np.asarray(M, float)
    n = M.shape[0]
    shift = -1e-9 * max(1.0, np.abs(M).max()) if shift is None else shift
    A = M - shift * np.eye(n)
    v = np.ones(n) / np.sqrt(n)
    for _ in range(iters):
        w = np.linalg.solve(A, v)
        v = w / np.linalg.norm(w)
    return float(v @ M @ v)


def reaggregate_csv(path):
    """{(variant, sigma1): {round: (mean, min, max)}} of cum_regret, straight from the CSV."""
    vals = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vals[(row["variant"], float(row["sigma1"]))][int(row["round"])].append(float(row["cum_regret"]))
    return {k: {r: (sum(v) / len(v), min(v), max(v)) for r, v in rounds.items()}
            for k, rounds in vals.items()}
