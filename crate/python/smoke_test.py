"""Smoke test for the contact_kinetics_py extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/*.whl
"""

import math
import sys

import contact_kinetics_py as ck


def close(a, b, tol):
    return max(abs(x - y) for x, y in zip(a, b)) < tol


def main():
    m = ck.Model("s1xs2")
    assert m.contact_margin() > 0
    assert set(m.knots()) == {"Gamma", "gamma"}
    assert {"T1", "T2"} <= set(m.regions())

    rho = ck.rho()
    p = m.sample(1, 3)[0]
    q = rho.flow(p, 1.0)
    assert close(rho.inverse(q, 1.0), p, 1e-9)
    r2 = p[1] ** 2 + p[2] ** 2
    assert abs(rho.hamiltonian(p, 0.4) - r2) < 1e-12

    rr = rho.compose(rho)
    assert rr.oracle_discrepancy(m.sample(4, 1), [0.37, 1.9]) < 1e-5
    assert ck.concatenate([rho, ck.zeta()]).label

    cert = ck.beta().certify_positivity(m, 12, 4, region="T2")
    assert cert["min"] > 0, cert["min"]

    try:
        ck.Model("nosuch")
    except ck.ContactError as e:
        assert "nosuch" in str(e)
    else:
        raise AssertionError("unknown model accepted")

    rep = ck.verify("s3")
    assert rep["pass"], [c["name"] for c in rep["certificates"] if not c["pass"]]

    glued = ck.lutz("s3")
    assert glued["pass"]
    assert glued["chart_table"].startswith("# chart-table v1")
    h = ck.hopf()
    assert abs(h.hamiltonian([1.0, 0.0, 0.0, 0.0], math.pi) - 1.0) < 1e-12

    print("python smoke test passed:", ck.__version__)
    return 0


if __name__ == "__main__":
    sys.exit(main())
