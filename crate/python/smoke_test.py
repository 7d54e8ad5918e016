"""Smoke test for the squeezefit_py extension module."""

import squeezefit_py as sf


def main():
    points = [[0.0, 0.0], [2.0, 0.0]]
    labels = [0, 1]

    out = sf.solve(points, labels, delta=2.0)
    m = out["M"]
    assert abs(m[0][0] - 1.0) < 1e-2 and abs(m[1][1]) < 1e-2, m
    assert abs(out["trace"] - 1.0) < 1e-6, out["trace"]

    rep = sf.certify(points, labels, [[1.0, 0.0], [0.0, 0.0]], 2.0)
    assert rep["verdict"] == "certified", rep

    short = sf.certify(points, labels, [[0.5, 0.0], [0.0, 0.0]], 2.0)
    assert short["verdict"] == "failed" and short["violating_pair"] == (0, 1), short

    try:
        sf.solve(points, labels, delta=3.0)
    except ValueError:
        pass
    else:
        raise AssertionError("delta above the minimum distance should fail")

    print("squeezefit_py", sf.__version__, "ok")


if __name__ == "__main__":
    main()
