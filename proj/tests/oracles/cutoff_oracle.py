"""Independent high-precision oracle for equilibrium cutoffs.

Solves  n*log I(1-n p) + log I(p) = (1/(1/(n+1) - p)) * int_p^{1-n p} log I(t) dt
with mpmath quadrature and bisection at 40 digits. Values printed here are
frozen into the C++ test suites.
"""
import mpmath as mp

mp.mp.dps = 40


def solve(inv, n):
    def g(p):
        lhs = n * mp.log(inv(1 - n * p)) + mp.log(inv(p))
        integ = mp.quad(lambda t: mp.log(inv(t)), [p, mp.mpf(1) / (n + 1), 1 - n * p])
        return lhs - integ / (mp.mpf(1) / (n + 1) - p)

    lo, hi = mp.mpf("1e-6"), mp.mpf(1) / (n + 1) - mp.mpf("1e-12")
    glo, ghi = g(lo), g(hi)
    assert glo * ghi < 0, (glo, ghi)
    for _ in range(140):
        mid = (lo + hi) / 2
        gm = g(mid)
        if gm * glo > 0:
            lo, glo = mid, gm
        else:
            hi = mid
    p = (lo + hi) / 2
    c = inv(1 - n * p) ** n * inv(p)
    return p, c


def int_m(inv, n, p_low, c):
    """int_0^1 m(x) dx in level space, via percentile substitution x = I(p)."""
    p_high = 1 - n * p_low
    dinv = lambda p: mp.diff(inv, p)

    def m_of_p(p):
        if p <= p_low:
            return -inv(1 - n * p) ** n
        if p < p_high:
            return -c / inv(p)
        return -inv(p) ** (n - 1) * inv((1 - p) / n)

    return mp.quad(lambda p: m_of_p(p) * dinv(p), [0, p_low, p_high, 1])


if __name__ == "__main__":
    uniform = lambda p: p
    beta21 = lambda p: mp.sqrt(p)
    for name, inv in (("uniform", uniform), ("beta(2,1)", beta21)):
        for n in (2, 3):
            p, c = solve(inv, n)
            im = int_m(inv, n, p, c)
            print(f"{name} n={n}: p_low={mp.nstr(p, 20)} C={mp.nstr(c, 20)} int_m={mp.nstr(im, 20)}")
