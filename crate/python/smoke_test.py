"""Smoke test for the rfrechet extension.

Build first, from the repository root:

    PYO3_BUILD_EXTENSION_MODULE=1 cargo build --release -p robust-frechet-py
    cp target/release/librfrechet.so python/rfrechet.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import rfrechet  # noqa: E402


def main():
    assert rfrechet.frobenius([[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [1.0, 1.0]]) == math.sqrt(2.0)
    levels = [0.25, 0.5, 0.75]
    assert abs(rfrechet.wasserstein(levels, [0.0, 1.0, 2.0], [1.0, 2.0, 3.0]) - math.sqrt(0.5)) < 1e-12

    data = rfrechet.Dataset.beta_matrices(40, 4, seed=3)
    assert (data.n, data.p, data.kind) == (40, 1, "matrix")
    dirty, idx = data.contaminate(0.2, 50.0, seed=3)
    assert len(idx) == 8

    std = rfrechet.fit_standard(dirty, [0.5])
    assert abs(sum(std.leverages) - 40.0) < 1e-9

    lam, gamma, trace = rfrechet.tune(dirty)
    assert len(trace) == 100 and lam > 0.0
    fit = rfrechet.fit_robust(dirty, [0.5], lam, gamma)
    assert fit.converged
    assert set(idx) <= set(fit.outliers())
    est = fit.estimate
    assert len(est) == 4 and all(est[j][k] == est[k][j] for j in range(4) for k in range(4))
    assert abs(est[0][0] - 1.0) < abs(std.estimate[0][0] - 1.0)

    dist = rfrechet.Dataset.normal_distributions(30, seed=1)
    assert dist.kind == "distribution" and len(dist.responses()[0]) == 81
    q = rfrechet.fit_robust(dist, [0.5], rfrechet.lambda_max(dist)).estimate
    assert all(a <= b for a, b in zip(q, q[1:]))

    try:
        rfrechet.Dataset.from_matrices([[0.0], [1.0]], [[[1.0, 2.0], [3.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]])
    except rfrechet.RfrError as e:
        assert e.code == "invariant_error", e.code
    else:
        raise AssertionError("asymmetric matrix accepted")

    agg = rfrechet.simulate(n=30, proportion=0.2, shift=100.0, replications=3, seed=7)
    assert agg["robust"] < agg["standard"]
    print("smoke test passed:", repr(data), repr(fit), {k: round(v, 3) for k, v in agg.items()})


if __name__ == "__main__":
    main()
