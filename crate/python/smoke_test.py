"""Smoke test for the treegibbs_py extension module.

Build and install with

    pip install --no-build-isolation -e crates/python

then run ``python3 python/smoke_test.py``.
"""

import json
import math

import treegibbs_py as tg


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    assert close(tg.threshold("sos", 2, 1), 1.953, 1e-3)
    assert close(tg.threshold("log", 6, 10), 3.924, 1e-3)
    c = tg.constants(2, 2)
    assert close(c["rho"], 0.473, 1e-3)
    assert close(c["eta"], 0.152, 1e-3)
    assert c["lambda"] == 0.5

    q = tg.TransferOperator.sos(2.4, radius=60)
    assert q(0) == 1.0
    assert close(q(1), math.exp(-2.4), 1e-15)
    assert q.deviation_norm(2) < c["eta"]

    sol = tg.solve(q, 2, [0, 5])
    assert sol.certified, [x for x in sol.certificate if not x["pass"]]
    assert sol.residual < 1e-10

    chain = sol.chain()
    pi = chain.pi
    assert close(sum(pi), 1.0, 1e-12)
    for row in chain.transition[55:66]:
        assert close(sum(row), 1.0, 1e-9)
    report = chain.theorem_report()
    assert report["pass"], [x for x in report["checks"] if not x["pass"]]
    assert not chain.theorem_report([0, 7])["pass"]
    exported = json.loads(chain.to_json())
    assert len(exported["transition"]) == len(pi) ** 2

    trees = chain.sample_trees(3, 200, 1)
    assert trees == chain.sample_trees(3, 200, 1)
    assert all(len(t) == 22 for t in trees)

    small = tg.solve(tg.TransferOperator.sos(2.4, radius=20), 2, [0])
    assert small.chain().dlr_violation() < 1e-8

    fc = tg.FuzzyChain(q, 5, 2, [0, 1])
    measured, bound, ok = fc.hypothesis
    assert ok and measured <= bound
    states, increments, w = fc.sample_branch(50, 3)
    assert len(states) == 51 and len(increments) == 50 and w[-1] == sum(increments)
    for k, inc in enumerate(increments):
        assert (inc - (states[k + 1] - states[k])) % 5 == 0
    points = fc.delocalization([4, 16], 0, 20000, 2)
    assert [p[0] for p in points] == [4, 16]

    try:
        tg.solve(tg.TransferOperator.sos(0.5, radius=60), 2, [0])
    except tg.TreeGibbsError as e:
        assert str(e).startswith("ThresholdExceeded"), e
    else:
        raise AssertionError("expected ThresholdExceeded")

    print("smoke test passed")


if __name__ == "__main__":
    main()
