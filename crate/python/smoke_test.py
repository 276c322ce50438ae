"""Smoke test of the pymohrcoulomb extension module."""

import math
import tempfile

import pymohrcoulomb as mc


def main():
    mat = mc.Material(young=20000.0, poisson=0.49, c0=50.0, phi=20.0, psi=20.0)
    expected = 50.0 / math.tan(math.radians(20.0))
    assert abs(mat.apex_pressure - expected) < 1e-10 * expected

    out = mat.return_map([1e-2, 1e-2, 1e-2, 0.0, 0.0, 0.0])
    assert out["branch"] == "apex", out
    assert all(abs(s - expected) < 1e-8 * expected for s in out["stress"][:3])

    elastic = mat.return_map([-1e-5, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert elastic["branch"] == "elastic" and elastic["dlambda"] == 0.0

    c = mat.tangent([6e-3, -2e-3, -4e-3, 8e-3, 0.0, 2e-3])
    assert len(c) == 6 and all(len(row) == 6 for row in c)

    assert "point-driver" in mc.presets()
    report = mc.validate(mc.preset("slope2d-assoc-hardening"))
    assert "nodes" in report

    with tempfile.TemporaryDirectory() as tmp:
        summary = mc.run(mc.preset("point-driver"), output_dir=tmp, workers=1)
        assert "stress_path.csv" in summary["files"]

    try:
        mc.validate("problem = 3")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed config accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
