"""Smoke test for the rotalg_py extension.

Build and install first:

    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math
import sys

import rotalg_py as rp


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    return bool(cond)


def main():
    results = []

    v0, _ = rp.theta(3, 0j, 0.5)
    v1, _ = rp.theta(3, complex(math.pi / 2, 0), 0.5)
    results.append(check(abs(v0 - (1 + math.sqrt(2)) * v1) < 1e-12, "theta special value"))

    gp = rp.GaussParams.from_beta(3.0)
    results.append(check(abs(gp.beta**2 - 4 * (gp.alpha**2 + 1)) < 1e-12, "beta/alpha coupling"))
    results.append(check(abs(gp.H(1.0, -1.0) - gp.H_quad(1.0, -1.0)) < 1e-8, "H closed form vs quadrature"))
    lo, hi = gp.psi_extrema(0)
    results.append(check(1 < lo <= hi < 5, f"psi_0 window [{lo:.6f}, {hi:.6f}]"))

    b = gp.build_b()
    results.append(check(b.flip().max_coeff_diff(b) < 1e-12, "flip(b) = b"))
    results.append(check(b.adjoint().max_coeff_diff(b) < 1e-12, "b self-adjoint"))

    x = rp.TwistedPoly(0.3)
    x.add_term(1, 0, 1 + 0j)
    y = x.fourier().fourier().fourier().fourier()
    results.append(check(y.max_coeff_diff(x) < 1e-14, "sigma^4 = id"))

    results.append(check(rp.omega([1, 2, 3, 4], 2, 7, brute=True) == rp.omega([1, 2, 3, 4], 2, 7), "omega"))

    frames = rp.frames("engineered:3.5,6", count=2, exponent=2.0)
    results.append(check([f.q for f in frames][0] == "25", "engineered frames"))
    results.append(check(all(f.commutation_error() < 1e-12 for f in frames), "lattice commutation phases"))

    report = json.loads(rp.verify("engineered:3.5,6", count=2, exponent=2.0))
    u1 = [r["cutdown_U1_total"] for r in report["rows"]]
    results.append(check(len(u1) == 2 and u1[1] < u1[0], "cutdown decreases"))

    try:
        rp.verify(count=0)
        results.append(check(False, "count=0 rejected"))
    except RuntimeError as e:
        results.append(check("exit code 1" in str(e), "count=0 rejected"))

    passed = sum(results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
