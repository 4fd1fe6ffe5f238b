import math
import stat
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from airfoil_ddpm.aero import (
    AeroFeatures,
    GeometryError,
    OperatingPoint,
    SolverConfigError,
    SolverProtocolError,
    evaluate_batch,
    evaluate_one,
    evaluate_surrogate,
    evaluate_xfoil,
    max_thickness,
    nominal_thickness_params,
    parse_polar,
    xfoil_script,
)
from airfoil_ddpm.cst import CstParams, ShapeClass, discretize, is_self_intersecting, surface_height

SHAPE = ShapeClass()
ALPHA5 = OperatingPoint(1e6, 5.0)


def symmetric(a0=0.4, coeffs=(0.3, 0.25, 0.2, 0.3, 0.2)):
    return CstParams(a0, tuple(coeffs), tuple(coeffs))


def random_valid(rng):
    while True:
        v = np.concatenate([rng.uniform(0.3, 1.0, 1), rng.uniform(-0.5, 1.5, 10)])
        p = CstParams.from_vector(v)
        if not is_self_intersecting(p):
            return p


# --- independent oracle: discrete vortex panels on the camber line ---------------

def vortex_panels(p, alpha, n):
    """Lumped vortex at 1/4 panel, collocation at 3/4 panel; returns (cl, cm_c/4)."""
    xe = 0.5 * (1 - np.cos(np.pi * np.arange(n + 1) / n))
    ye = 0.5 * (surface_height(p, SHAPE, "upper", xe) + surface_height(p, SHAPE, "lower", xe))
    dx = np.diff(xe)
    xv, xc = xe[:-1] + 0.25 * dx, xe[:-1] + 0.75 * dx
    influence = 1.0 / (2 * np.pi * (xc[:, None] - xv[None, :]))
    gamma = np.linalg.solve(influence, alpha - np.diff(ye) / dx)
    cl = 2 * gamma.sum()
    return cl, -2 * np.sum(gamma * xv) + cl / 4


def vortex_extrapolated(p, alpha):
    coarse = np.array(vortex_panels(p, alpha, 400))
    fine = np.array(vortex_panels(p, alpha, 1600))
    return (4 * fine - coarse) / 3  # first-order convergence


class TestSurrogate:
    def test_symmetric_zero_alpha(self):
        f = evaluate_surrogate(symmetric(), SHAPE, OperatingPoint(1e6, 0.0)).features
        assert f.cl == 0.0 and f.cm == 0.0
        assert f.cd > 0

    def test_flat_plate_lift(self):
        f = evaluate_surrogate(symmetric(), SHAPE, ALPHA5).features
        assert f.cl == pytest.approx(2 * math.pi * math.radians(5), abs=1e-12)
        assert f.cl == pytest.approx(0.5483, abs=1e-4)

    def test_alpha_linearity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            p = random_valid(rng)
            c0, c1, c2 = (evaluate_surrogate(p, SHAPE, OperatingPoint(1e6, a)).features for a in (0.0, 4.0, 8.0))
            assert c2.cl - c0.cl == pytest.approx(2 * (c1.cl - c0.cl), abs=1e-10)
            assert c2.cl - c0.cl == pytest.approx(2 * math.pi * math.radians(8), abs=1e-10)
            assert c0.cm == pytest.approx(c2.cm, abs=1e-12)

    def test_matches_vortex_panel_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(3):
            p = random_valid(rng)
            f = evaluate_surrogate(p, SHAPE, ALPHA5).features
            cl, cm = vortex_extrapolated(p, math.radians(5))
            assert f.cl == pytest.approx(cl, abs=2e-4)
            assert f.cm == pytest.approx(cm, abs=2e-4)

    def test_drag_proxy(self):
        p = nominal_thickness_params(0.12)
        f = evaluate_surrogate(p, SHAPE, ALPHA5).features
        tau = max_thickness(p, SHAPE)
        cf = 0.074 * 1e6 ** -0.2
        assert tau == pytest.approx(0.12, abs=2e-3)
        assert f.cd == pytest.approx(2 * cf * (1 + 2 * tau + 60 * tau**4) + 0.01 * f.cl**2, rel=1e-14)

    def test_max_thickness_brute(self):
        p = random_valid(np.random.default_rng(5))
        x = np.linspace(0, 1, 20001)
        brute = np.max(surface_height(p, SHAPE, "upper", x) - surface_height(p, SHAPE, "lower", x))
        assert max_thickness(p, SHAPE) == pytest.approx(brute, rel=1e-3)

    def test_self_intersecting_raises(self):
        with pytest.raises(GeometryError):
            evaluate_surrogate(CstParams(0.3, (-0.5,) * 5, (-0.5,) * 5))

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-0.5, 1.5), min_size=10, max_size=10), st.floats(0.3, 1.0))
    def test_finite_and_positive_drag(self, coeffs, a0):
        p = CstParams(a0, tuple(coeffs[:5]), tuple(coeffs[5:]))
        r = evaluate_one(p, ALPHA5)
        if is_self_intersecting(p):
            assert not r.converged and r.error
        else:
            assert np.all(np.isfinite(r.features.as_array())) and r.features.cd > 0

    def test_operating_point_validation(self):
        with pytest.raises(ValueError):
            OperatingPoint(0.0, 5.0)


class TestBatch:
    def test_order_and_isolation(self):
        good = symmetric()
        bad = CstParams(0.3, (-0.5,) * 5, (-0.5,) * 5)
        res = evaluate_batch([good, bad, nominal_thickness_params()], ALPHA5)
        assert [r.converged for r in res] == [True, False, True]
        assert res[1].features is None and "self-intersecting" in res[1].error
        assert res[0].features == evaluate_surrogate(good).features

    def test_parallelism_identical(self):
        rng = np.random.default_rng(9)
        foils = [CstParams.from_vector(np.concatenate([rng.uniform(0.3, 1, 1), rng.uniform(-0.5, 1.5, 10)])) for _ in range(40)]
        a = evaluate_batch(foils, ALPHA5, parallelism=1)
        b = evaluate_batch(foils, ALPHA5, parallelism=4)
        assert [r.features for r in a] == [r.features for r in b]
        assert [r.error for r in a] == [r.error for r in b]

    def test_empty(self):
        assert evaluate_batch([], ALPHA5) == []

    def test_unknown_solver(self):
        with pytest.raises(SolverConfigError):
            evaluate_batch([symmetric()], ALPHA5, solver="panel")

    def test_features_roundtrip(self):
        f = AeroFeatures(0.5, 0.01, -0.1)
        assert AeroFeatures.from_array(f.as_array()) == f


# --- XFOIL adapter against a scripted stand-in ---------------------------------------

FAKE = """\
#!{python}
import os, sys, time
mode = os.environ.get("FAKE_XFOIL_MODE", "ok")
script = sys.stdin.read().splitlines()
polar = script[script.index("PACC") + 1]
if mode == "sleep":
    time.sleep(5)
if mode == "nopolar":
    print("crashed"); sys.exit(0)
assert any(l.startswith("LOAD ") for l in script) and "VISC 1e+06" in script
with open(polar, "w") as fh:
    fh.write(" XFOIL polar\\n\\n  alpha    CL        CD       CDp       CM     Top_Xtr  Bot_Xtr\\n")
    fh.write(" ------- -------- --------- --------- -------- -------- --------\\n")
    if mode == "ok":
        fh.write("   5.000   0.5512   0.00731   0.00201  -0.0012   0.5000   0.9000\\n")
"""

POLAR_OK = """\
       alpha    CL        CD       CDp       CM     Top_Xtr  Bot_Xtr
      ------ -------- --------- --------- -------- -------- --------
       5.000   0.5512   0.00731   0.00201  -0.0012   0.5000   0.9000
"""


@pytest.fixture
def fake_xfoil(tmp_path, monkeypatch):
    exe = tmp_path / "xfoil"
    exe.write_text(FAKE.format(python=sys.executable))
    exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
    monkeypatch.setenv("XFOIL_PATH", str(exe))
    return monkeypatch


class TestXfoilAdapter:
    def test_parse_polar(self):
        f = parse_polar(POLAR_OK)
        assert (f.cl, f.cd, f.cm) == (0.5512, 0.00731, -0.0012)

    def test_parse_polar_no_rows(self):
        assert parse_polar(POLAR_OK.splitlines()[0] + "\n" + POLAR_OK.splitlines()[1] + "\n") is None

    def test_parse_polar_garbage(self):
        with pytest.raises(SolverProtocolError):
            parse_polar("no table here\n")
        with pytest.raises(SolverProtocolError):
            parse_polar("----- ----\n 5.0 abc\n")

    def test_script_contents(self):
        s = xfoil_script("a.dat", "p.txt", ALPHA5).splitlines()
        assert "LOAD a.dat" in s and "VISC 1e+06" in s and "ALFA 5" in s and "ITER 100" in s
        assert s[-1] == "QUIT"

    def test_converged_run(self, fake_xfoil):
        r = evaluate_one(nominal_thickness_params(), ALPHA5, solver="xfoil")
        assert r.converged and r.solver_id == "xfoil"
        assert r.features == AeroFeatures(0.5512, 0.00731, -0.0012)

    def test_not_converged(self, fake_xfoil):
        fake_xfoil.setenv("FAKE_XFOIL_MODE", "nodata")
        r = evaluate_xfoil(discretize(nominal_thickness_params()), ALPHA5)
        assert not r.converged and r.error is None

    def test_timeout_is_not_converged(self, fake_xfoil):
        fake_xfoil.setenv("FAKE_XFOIL_MODE", "sleep")
        r = evaluate_xfoil(discretize(nominal_thickness_params()), ALPHA5, timeout=0.5)
        assert not r.converged

    def test_missing_polar_is_protocol_error(self, fake_xfoil):
        fake_xfoil.setenv("FAKE_XFOIL_MODE", "nopolar")
        with pytest.raises(SolverProtocolError) as info:
            evaluate_xfoil(discretize(nominal_thickness_params()), ALPHA5)
        assert "crashed" in info.value.output
        r = evaluate_one(nominal_thickness_params(), ALPHA5, solver="xfoil")
        assert not r.converged and r.error

    def test_self_intersecting_skips_binary(self, fake_xfoil):
        r = evaluate_one(CstParams(0.3, (-0.5,) * 5, (-0.5,) * 5), ALPHA5, solver="xfoil")
        assert not r.converged and "self-intersecting" in r.error

    def test_missing_binary(self, monkeypatch, tmp_path):
        monkeypatch.setenv("XFOIL_PATH", str(tmp_path / "nope"))
        monkeypatch.setenv("PATH", str(tmp_path))
        with pytest.raises(SolverConfigError):
            evaluate_batch([symmetric()], ALPHA5, solver="xfoil")
