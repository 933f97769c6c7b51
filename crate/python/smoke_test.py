"""Smoke test for the Python bindings.

Build first:  pip install --no-build-isolation -e crates/py
Run:          python python/smoke_test.py
"""

import json
import math

import fastslow_py as fs


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    m = fs.FastSlowMap("chialvo")
    assert (m.n, m.k) == (2, 1)

    folds, flip, mu, phi0 = fs.chialvo_closed_form(1.5)
    z = m.critical_point([1.5])
    close(z[0], phi0, 1e-12)
    (re, im), = m.multipliers(z)
    close(re, mu, 1e-10)
    close(im, 0.0, 1e-15)

    # The layer map fixes the critical manifold.
    img = m.evaluate(z, 0.0)
    close(max(abs(a - b) for a, b in zip(img, z)), 0.0, 1e-12)

    hits = m.singularities(0.036, 5.0, 4000)
    assert [h[1] for h in hits] == ["Fold", "Fold", "Flip"], hits
    for (coord, _, _, _), want in zip(hits, folds + [flip]):
        close(coord, want, 1e-8)

    x, crit, first, numeric = m.slow_manifold(1.1, 2.9, 91, 1e-3)
    assert len(x) == len(numeric) == 91
    assert max(abs(a[0] - b[0]) for a, b in zip(first, numeric)) < 1e-2

    p = m.projection(z)
    pp = [[sum(p[i][k] * p[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
    close(max(abs(pp[i][j] - p[i][j]) for i in range(2) for j in range(2)), 0.0, 1e-12)

    orbit = m.iterate([0.25, 2.0], 1e-3, 10)
    assert len(orbit) == 11

    label, report, _ = fs.run_regime("II", 1e-3)
    assert label == "Relaxation"
    assert json.loads(report)["schema"] == 1

    rows = fs.euler_study([0.04, 0.02], [0.2], 41)
    close(rows[0][2] / rows[1][2], 4.0, 0.5)

    rep = json.loads(fs.analyze(json.dumps({"model": "euler:linear", "h_sweep": [0.5, 1.5]})))
    assert [r["classification"] for r in rep["step_sweep"]] == ["Attracting", "Repelling"]

    try:
        fs.FastSlowMap("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown model accepted")

    try:
        fs.analyze('{"model": "chialvo", "eps": }')
    except ValueError as e:
        assert "line 1" in str(e)
    else:
        raise AssertionError("malformed config accepted")

    assert issubclass(fs.NumericalError, RuntimeError)
    assert math.isfinite(m.reduced_step(z, 1e-3)[1])
    print("ok")


if __name__ == "__main__":
    main()
