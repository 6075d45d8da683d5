#!/usr/bin/env python3
"""Independent reference values for the C++ test suites.

Every quantity here is computed by a method deliberately different from the
library implementation (interval bisection instead of Newton, grid minimization
instead of closed forms, scalar recurrences instead of field solves).  The
printed values are frozen into the C++ tests as literals; rerun this script to
regenerate them.
"""
import math


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def graph_value(kind, s):
    """Single-valued branch of each monotone graph (bounded-domain aware)."""
    if kind[0] == "linear":
        return kind[1] * s
    if kind[0] == "poly":
        return kind[2] * s ** kind[1]
    if kind[0] == "log":
        return kind[1] * math.log((1 + s) / (1 - s))
    raise ValueError(kind)


def potential(kind, s):
    if kind[0] == "linear":
        return 0.5 * kind[1] * s * s
    if kind[0] == "poly":
        return kind[2] * abs(s) ** (kind[1] + 1) / (kind[1] + 1)
    if kind[0] == "log":
        if abs(s) >= 1.0:
            return math.inf
        c = kind[1]
        return c * ((1 + s) * math.log1p(s) + (1 - s) * math.log1p(-s))
    raise ValueError(kind)


def resolvent_bisect(kind, lam, r):
    """Solve s + lam*graph(s) = r by bisection.

    The log kind is bisected in the artanh variable t (s = tanh t), which keeps
    the bracket well-posed even when the root sits within one ulp of +-1.
    """
    if kind[0] == "log":
        c = kind[1]
        b = abs(r) / (2 * lam * c) + 1.0
        t = bisect(lambda t: math.tanh(t) + 2 * lam * c * t - r, -b, b, 300)
        return math.tanh(t)
    b = abs(r) + 1.0
    return bisect(lambda s: s + lam * graph_value(kind, s) - r, -b, b, 300)


def moreau_grid(kind, lam, r):
    """min_s potential(s) + (r-s)^2/(2 lam) on a fine grid + local refine."""
    if kind[0] == "log":
        lo, hi = -1.0 + 1e-12, 1.0 - 1e-12
    else:
        lo, hi = r - 5 * lam * max(1, abs(r)) - 5, r + 5 * lam * max(1, abs(r)) + 5

    def obj(s):
        return potential(kind, s) + (r - s) ** 2 / (2 * lam)

    n = 400001
    best = min(range(n), key=lambda i: obj(lo + (hi - lo) * i / (n - 1)))
    s0 = lo + (hi - lo) * best / (n - 1)
    h = (hi - lo) / (n - 1)
    a, b = max(lo, s0 - 2 * h), min(hi, s0 + 2 * h)
    for _ in range(120):  # golden-section refine
        m1, m2 = a + 0.381966 * (b - a), b - 0.381966 * (b - a)
        if obj(m1) < obj(m2):
            b = m2
        else:
            a = m1
    s = 0.5 * (a + b)
    return obj(s)


def constant_state_sequence(lam, tau, a, m0, steps):
    """Spatially constant two-unknown recurrence of the coupled step.

    Unknowns (m+, mu) solve  (m+-m)/tau + lam*mu = 0  and with w=(m+-m)/tau
    lam*w + a/(1+lam*a)*w + lam*m+ + 1/lam*w = 0, i.e. the zero-potential,
    zero-source step restricted to constants.
    """
    al = a / (1 + lam * a)
    ms, mus = [], []
    m = m0
    for _ in range(steps):
        w = -(lam * lam) * m / (lam * lam + lam * al + 1 + lam * lam * tau)
        m = m + tau * w
        ms.append(m)
        mus.append(-w / lam)
    return ms, mus


def initial_rates_scalar(lam, a, m):
    """mu0, du0 for a constant datum, zero potentials/sources."""
    al = a / (1 + lam * a)
    mu0 = lam * m / (1 + lam * lam + lam * al)
    return mu0, -lam * mu0


def main():
    print("# resolvents by bisection")
    for kind, lam, r in [
        (("poly", 3, 2.0), 0.1, 1.5),
        (("poly", 5, 0.5), 0.25, -2.0),
        (("log", 1.5), 0.2, 0.8),
        (("log", 1.0), 0.05, -3.0),
    ]:
        j = resolvent_bisect(kind, lam, r)
        print(f"resolvent {kind} lam={lam} r={r}: J={j!r} yosida={(r - j) / lam!r}")

    print("\n# moreau envelopes by grid minimization")
    for kind, lam, r in [
        (("linear", 1.0), 1.0, 1.0),
        (("poly", 3, 2.0), 0.1, 1.5),
        (("log", 1.5), 0.2, 0.8),
    ]:
        print(f"moreau {kind} lam={lam} r={r}: {moreau_grid(kind, lam, r)!r}")

    print("\n# constant-state recurrence lam=0.5 tau=0.01 a=1 m0=0.8, 10 steps")
    ms, mus = constant_state_sequence(0.5, 0.01, 1.0, 0.8, 10)
    for k, (m, mu) in enumerate(zip(ms, mus), 1):
        print(f"step {k}: m={m!r} mu={mu!r}")

    print("\n# initial rates for constant datum, lam=0.5 a=1 m=0.8")
    mu0, du0 = initial_rates_scalar(0.5, 1.0, 0.8)
    print(f"mu0={mu0!r} du0={du0!r}")

    print("\n# manufactured-solution source amplitudes, lam=0.1 eps=0.1 a=b=1")
    lam, eps, a, b = 0.1, 0.1, 1.0, 1.0
    k2 = 5 * math.pi**2
    a_g = k2 - a / (1 + lam * a) - 1 / (lam + k2)
    a_gg = -lam - b / (1 + lam * b) + 4 * math.pi**2 * eps
    print(f"A_g={a_g!r} A_gGamma={a_gg!r} kappa2={k2!r}")

    print("\n# second-estimate constants, poly(3,1) lam=0.1 m0=0.3 delta=1.0")
    j = resolvent_bisect(("poly", 3, 1.0), 0.1, 1.3)
    bl_hi = (1.3 - j) / 0.1
    j = resolvent_bisect(("poly", 3, 1.0), 0.1, -0.7)
    bl_lo = (-0.7 - j) / 0.1
    k2pp = max(abs(bl_hi), abs(bl_lo)) * (0.3 + 1.0)
    print(f"beta_l(1.3)={bl_hi!r} beta_l(-0.7)={bl_lo!r} k0pp={k2pp!r}")


if __name__ == "__main__":
    main()
