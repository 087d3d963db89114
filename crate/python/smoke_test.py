"""Smoke test for the hypflow Python extension.

Build and install first:  pip install --no-build-isolation crates/hypflow-py
Run:                      python python/smoke_test.py   (or pytest python/)
"""

import math

import hypflow


def test_version():
    assert hypflow.__version__.count(".") == 2


def test_registry_and_classification():
    names = {e["name"] for e in hypflow.list_examples()}
    assert {"burgers1d", "vdw", "kgz", "symmetric"} <= names
    assert hypflow.classify("vdw", "elliptic")["regime"] == "Elliptic"
    assert hypflow.classify("kgz", "witness")["regime"] == "NonSemisimpleTransition"
    assert hypflow.classify("burgers1d", F2=0.0)["regime"] == "HyperbolicPersistent"


def test_errors_map_to_exceptions():
    for call in (lambda: hypflow.classify("no-such-system"), lambda: hypflow.classify("vdw", bogus=1.0)):
        try:
            call()
        except hypflow.ConfigError:
            pass
        else:
            raise AssertionError("expected ConfigError")


def test_branch_rates():
    b = hypflow.branch("vdw", "model")
    assert b["ell"] == 0.5
    assert abs(b["branch"]["f0"] - 1.0) < 1e-8
    assert 0 < b["gamma_minus"] <= b["gamma_plus"]


def test_flow_envelopes():
    r = hypflow.flow("model-block", 1e-3)
    assert abs(r["frobenius_norms"][0] - math.sqrt(2.0)) < 1e-14
    assert r["upper"]["bounded"] and r["lower"]["bounded_below"]
    assert r["liouville_residual"] < 1e-8


def test_airy_against_scipy():
    from scipy.special import airy

    for x in (-3.0, -0.5, 0.0, 1.2, 4.0):
        ai, aip = hypflow.airy_ai(complex(x, 0.0))
        ref = airy(x)
        assert abs(ai - ref[0]) < 1e-12 * max(1.0, abs(ref[0]))
        assert abs(aip - ref[1]) < 1e-12 * max(1.0, abs(ref[1]))
    w0 = hypflow.wronskian_exact()
    for tau in (-5.0, 0.0, 5.0):
        assert abs(hypflow.wronskian(tau) - w0) < 1e-8 * abs(w0)


def test_wavepacket_calculus():
    eps, h = 1e-2, 0.5
    u = hypflow.build_wavepacket(eps, h, [1.0, 0.0], 256)
    assert u.dim == 2 and u.n == 256
    same = hypflow.op_eps_multiplier(lambda xi: 1.0, u, eps, h)
    assert (same - u).l2_norm() < 1e-13 * u.l2_norm()
    r = hypflow.composition_residual(
        lambda xi: xi / math.sqrt(1 + xi * xi), lambda xi: math.sqrt(1 + xi * xi), u, eps, h
    )
    assert r < 1e-12
    back = hypflow.GridFunction.from_bytes(u.to_bytes())
    assert (back - u).l2_norm() == 0.0
    assert hypflow.eps_sobolev_norm(u, 2.0, eps, h) > 0


def test_simulate_reports_growth():
    rep = hypflow.simulate("burgers1d", [1e-2, 1e-3], state="uniform")
    assert len(rep["rows"]) == 2
    assert rep["rows"][1]["ratio"] > rep["rows"][0]["ratio"]
    control = hypflow.simulate("symmetric", [1e-2, 1e-3], h=0.5, gamma_minus=0.5)
    assert control["verdict"] in ("stable", "inconclusive")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
    print("smoke test passed")
