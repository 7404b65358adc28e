"""Independent NumPy pilot for the delocalization fixture.

Samples the scaled adjacency matrix of G(n, lam/n), adds n^(-3/4) times a
symmetric Gaussian matrix, and records the fraction of eigenvectors with
infinity norm below epsilon. Shares no code or random streams with the
Rust crate.

    python3 scripts/pilot_deloc.py > crates/core/tests/fixtures/deloc_pilot.json
"""

import json
import math
import sys

import numpy as np

N = 2000
EPSILON = 0.2
LAMBDAS = [2.0, 8.0, 32.0]
SEEDS = 10
MASTER = 20240611


def scaled_adjacency(n, lam, rng):
    upper = np.triu(rng.random((n, n)) < lam / n, 1)
    return (upper | upper.T).astype(float) / math.sqrt(lam)


def gaussian_symmetric(n, rng):
    g = np.triu(rng.standard_normal((n, n)))
    return g + np.triu(g, 1).T


def main():
    rng = np.random.default_rng(MASTER)
    out = {"n": N, "epsilon": EPSILON, "gamma": 0.75, "seeds": SEEDS, "rows": []}
    for lam in LAMBDAS:
        fractions, bulk = [], []
        for _ in range(SEEDS):
            b = scaled_adjacency(N, lam, rng) + N ** -0.75 * gaussian_symmetric(N, rng)
            w, u = np.linalg.eigh(b)
            fractions.append(float(np.mean(np.abs(u).max(axis=0) < EPSILON)))
            bulk.append(float(np.mean(np.abs(w) <= 2.0)))
            print(f"lambda={lam} fraction={fractions[-1]:.4f}", file=sys.stderr, flush=True)
        out["rows"].append(
            {
                "lambda": lam,
                "delocalized_fraction": float(np.mean(fractions)),
                "delocalized_fraction_sd": float(np.std(fractions, ddof=1)),
                "bulk_fraction": float(np.mean(bulk)),
            }
        )
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
