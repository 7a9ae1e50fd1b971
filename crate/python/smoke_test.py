"""Smoke test for the `moilab` extension module.

Build and run from the repository root:

    cargo build --release -p moilab-py --features extension-module
    cp target/release/libmoilab_py.so python/moilab.so
    python3 python/smoke_test.py
"""

import cmath
import math
import sys

import moilab


def close(a, b, tol):
    return abs(a - b) <= tol


def check(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}")
    return ok


def norm(m):
    return max(sum(abs(x) for x in row) for row in m)


def sub(a, b):
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def main():
    results = []
    exp = moilab.Function.exp()

    dd = moilab.divided_difference(exp, [0.0, 1.0])
    results.append(check("divided difference", close(dd, math.e - 1.0, 1e-13), f"{dd}"))

    dd = moilab.divided_difference(exp, [0.5, 0.5, 0.5])
    results.append(check("confluent divided difference", close(dd, math.exp(0.5) / 2, 1e-12), f"{dd}"))

    h = moilab.HermitianOperator([[1.0, 0.5], [0.5, -0.3]])
    v = moilab.HermitianOperator([[0.2, 1j], [-1j, 0.1]])
    fh = h.apply(exp)
    ev = h.eigenvalues()
    tr = fh[0][0] + fh[1][1]
    results.append(check("functional calculus trace", close(tr, sum(math.exp(x) for x in ev), 1e-12), f"{tr}"))

    # T^{H,H}(V) is the Frechet derivative of exp at H in direction V.
    t1 = moilab.moi(exp, h, [v.matrix()])
    t1b = moilab.moi(exp, [h, h], [v.matrix()])
    results.append(check("moi single vs list of operators", norm(sub(t1, t1b)) < 1e-13))

    r = moilab.derivative_identity_residual(exp, h, v, 2)
    results.append(check("derivative identity", r < 1e-6, f"{r:.3e}"))

    tay = moilab.taylor_expand(exp, h, v, 3)
    rem = tay["remainder_norms"]
    results.append(check("taylor remainders decrease", all(a > b for a, b in zip(rem, rem[1:])), f"{rem}"))

    poly = moilab.Function.poly([0.3, -1.0, 0.5, 0.2])
    comb = moilab.combinatorial_expand(poly, h, [v.matrix(), v.matrix()], 2)
    results.append(check("combinatorial polynomial exactness", comb["remainder_norms"][-1] < 1e-10,
                         f"{comb['remainder_norms']}"))

    model = moilab.Model.diag_family(2000, 0.1)
    grid = [10 ** (-3 + 0.25 * k) for k in range(7)]
    heat = moilab.heat_trace_expansion(model, 3, grid)
    slopes = heat["slopes"][1:]
    results.append(check("heat trace remainder slopes",
                         all(close(s, n / 2, 0.15) for n, s in enumerate(slopes, start=1)), f"{slopes}"))

    cm, c0, _ = moilab.theta_asymptotic(2000, [10 ** (-3 + 0.25 * k) for k in range(9)])
    results.append(check("theta leading coefficient", close(cm, math.sqrt(math.pi) / 2, 1e-4), f"{cm}"))
    results.append(check("theta constant", close(c0, -0.5, 1e-3), f"{c0}"))

    z, tail = moilab.zeta_partial("mangoldt-over-log", 2.0, 100000)
    want = math.log(math.pi ** 2 / 6)
    results.append(check("log zeta(2)", close(z, want, 1e-4) and tail > abs(z - want), f"{z.real} tail {tail:.2e}"))

    gauss = moilab.Function.gauss()
    hs, est = moilab.hs_apply(gauss, h.matrix())
    results.append(check("Helffer-Sjostrand calculus", norm(sub(hs, h.apply(gauss))) < 1e-4, f"est {est:.2e}"))

    order = moilab.analytic_order(1.0)
    results.append(check("analytic order of Theta", order is not None and close(order, 1.0, 0.05), f"{order}"))

    try:
        moilab.HermitianOperator([[0.0, 1.0], [0.0, 0.0]])
        results.append(check("non-Hermitian input rejected", False))
    except ValueError as e:
        results.append(check("non-Hermitian input rejected", True, str(e)))

    print(f"moilab {moilab.__version__}: {sum(results)}/{len(results)} passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
