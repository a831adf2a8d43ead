"""Symbolic derivation of the reduced order-5/2 boundary-value problem.

This is the slow, independent route to the forcing functions that
`crestwave.reduction` hard-codes: the composite ansatz (corner background
+ angle-linear slaved pair + forced e^{-2q} correction, with the surface
angle zeta = -pi/6 + (nu/3) e^{-q/2} + dP e^{-q}) is substituted into the
primitive transformed system

    (A)  psib_q = (P/D) Psih + (z/D) zeta_q psib_z
    (B)  Psih_q = (zeta_q/D) (z Psih)_z - (P/D) psib_zz
                  + e^{-2q} (D/P) omhat(psib)
    (C)  Psih^2 + psib_z^2 = -2 (D/P)^2 e^{-3q} sin(zeta)     at z = P

(P = pi/2, D = zeta + P) and expanded in eps = e^{-q/2}.  Orders eps^3 and
eps^4 of (A)/(B) and eps^6/eps^7 of (C) must vanish identically; the next
orders give the interior forcings g1, g2 and the Robin datum g3 of

    d'' + (25/9) d = (2/3) g2 - (10/9) g1 ,
    d'(0) = 0 ,      d'(P) - d(P)/sqrt(3) = g3 ,

whose exact solution yields the second surface-angle coefficient
lam = d(P)/nu^2 in closed form.

Run from the repository root:

    python3 tools/derive_reduction.py

Regenerates tests/data/reduction_oracle.json (sampled g1, g2, g3, lam, and
the d-profile) against which the runtime assembler is tested node-wise.
Needs sympy; runtime is a couple of minutes.
"""

import json
import pathlib

import sympy as sp

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" \
    / "reduction_oracle.json"


def main():
    q, z, eps = sp.symbols("q z eps", positive=True)
    nu, w1 = sp.symbols("nu w1", real=True)
    # boundary placeholders for the unknown order-5/2 profile
    dP, dpP, eP = sp.symbols("dP dpP eP", real=True)

    P = sp.pi / 2

    Ubar = sp.Rational(2, 3) * sp.exp(-3 * q / 2) * sp.cos(z)
    Ustar = nu / 12 * (3 - 2 * sp.cos(4 * z / 3)) * sp.exp(-2 * q)
    Vstar = -sp.Rational(4, 3) * Ustar

    xi = nu / 3 * sp.exp(-q / 2) + dP * sp.exp(-q)
    zeta = -sp.pi / 6 + xi
    D = zeta + P
    xiq = sp.diff(xi, q)

    psib = Ubar + 3 / sp.pi * z * sp.diff(Ubar, z) * xi + Ustar
    Psih = (sp.Rational(2, 3) * sp.diff(Ubar, q)
            - 3 / sp.pi * sp.diff(z * Ubar, z) * xi + Vstar)

    def omhat(p):
        return nu + w1 * p  # w1 must drop out of order 5/2 (it does)

    EA = sp.diff(psib, q) - (P / D) * Psih - z * xiq / D * sp.diff(psib, z)
    EB = (sp.diff(Psih, q) - xiq / D * sp.diff(z * Psih, z)
          + (P / D) * sp.diff(psib, z, 2)
          - sp.exp(-2 * q) * (D / P) * omhat(psib))

    def in_eps(expr, order):
        e = expr.subs(q, -2 * sp.log(eps))
        return sp.expand(sp.series(e, eps, 0, order + 1).removeO())

    print("expanding interior relation A ...")
    EA_series = in_eps(EA, 5)
    for k in (3, 4):
        c = sp.simplify(EA_series.coeff(eps, k))
        assert c == 0, f"A fails to vanish at eps^{k}: {c}"
        print(f"  order eps^{k}: 0 (ok)")
    g1 = sp.simplify(-EA_series.coeff(eps, 5))
    print("  g1(z) =", sp.nsimplify(g1))
    assert g1.coeff(w1) == 0 and sp.expand(g1).coeff(dP) == 0

    print("expanding interior relation B ...")
    EB_series = in_eps(EB, 5)
    for k in (3, 4):
        c = sp.simplify(EB_series.coeff(eps, k))
        assert c == 0, f"B fails to vanish at eps^{k}: {c}"
        print(f"  order eps^{k}: 0 (ok)")
    g2 = sp.simplify(-EB_series.coeff(eps, 5))
    print("  g2(z) =", sp.nsimplify(g2))
    assert g2.coeff(w1) == 0 and sp.expand(g2).coeff(dP) == 0

    print("expanding surface relation C ...")
    psib_z_P = (sp.diff(psib, z)
                + dpP * sp.exp(-sp.Rational(5, 2) * q)).subs(z, P)
    Psih_P = (Psih + eP * sp.exp(-sp.Rational(5, 2) * q)).subs(z, P)
    EC = (Psih_P ** 2 + psib_z_P ** 2
          + 2 * (D / P) ** 2 * sp.exp(-3 * q) * sp.sin(zeta))
    EC_series = in_eps(EC, 8)
    for k in (6, 7):
        c = sp.simplify(EC_series.coeff(eps, k))
        assert c == 0, f"C fails to vanish at eps^{k}: {c}"
        print(f"  order eps^{k}: 0 (ok)")
    c8 = sp.expand(sp.simplify(EC_series.coeff(eps, 8)))
    assert sp.simplify(c8.coeff(eP)) == 0, "companion boundary value leaks in"
    assert sp.nsimplify(c8.coeff(dpP)) == sp.Rational(-4, 3)
    K = sp.simplify(c8.subs({dP: 0, dpP: 0}))
    g3 = sp.simplify(sp.Rational(3, 4) * K)
    print("  g3 =", sp.nsimplify(g3), "=", sp.N(g3.subs(nu, 1), 15))

    print("solving the reduced problem exactly ...")
    d = sp.Function("d")
    rhs = sp.expand(sp.Rational(2, 3) * g2 - sp.Rational(10, 9) * g1)
    sol = sp.dsolve(sp.Eq(d(z).diff(z, 2) + sp.Rational(25, 9) * d(z), rhs),
                    d(z)).rhs
    C1, C2 = sp.symbols("C1 C2")
    bottom = sp.diff(sol, z).subs(z, 0)
    robin = (sp.diff(sol, z) - sol / sp.sqrt(3)).subs(z, P) - g3
    cs = sp.solve([bottom, robin], [C1, C2], dict=True)[0]
    dsol = sp.simplify(sol.subs(cs))
    lam = sp.simplify(dsol.subs(z, P) / nu ** 2)
    print("  lam (exact) =", sp.nsimplify(lam))
    print("  lam (num)   =", sp.N(lam, 17))

    # ---- freeze the oracle --------------------------------------------
    n = 65
    zs = [sp.Rational(k, n - 1) * P for k in range(n)]
    g1f = sp.lambdify(z, g1.subs(nu, 1), "math")
    g2f = sp.lambdify(z, g2.subs(nu, 1), "math")
    df = sp.lambdify(z, dsol.subs(nu, 1), "math")
    zf = [float(sp.N(v, 17)) for v in zs]
    payload = {
        "z": zf,
        "g1": [g1f(v) for v in zf],
        "g2": [g2f(v) for v in zf],
        "g3_over_omega1_sq": float(sp.N(g3.subs(nu, 1), 17)),
        "lambda": float(sp.N(lam, 17)),
        "d_profile": [df(v) for v in zf],
        "note": "regenerated by tools/derive_reduction.py; do not edit",
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=1))
    print("wrote", OUT)


if __name__ == "__main__":
    main()
