"""Independent high-precision evaluation of the four security-bound formulas.

Used once to freeze the reference values in tests/oracle_values.py. Written
directly from the closed forms with mpmath, sharing no code with the package.
Install the ``oracle`` extra to run it.
"""

from __future__ import annotations

from mpmath import mp, mpf, exp, log, sqrt

mp.dps = 50


def H2(x):
    x = mpf(x)
    if x == 0 or x == 1:
        return mpf(0)
    return -x * log(x, 2) - (1 - x) * log(1 - x, 2)


def code(n, q, rate):
    return mpf(2) ** (n * (H2(q) - rate))


def info_z(n, n_z, n_x, r, m, paz, pax, es, er):
    n, n_z, n_x = mpf(n), mpf(n_z), mpf(n_x)
    rel = exp(-2 * (n_z / (n + n_z)) ** 2 * n * mpf(er) ** 2) + code(n, mpf(paz) + mpf(er), r / n)
    sec = exp(-2 * (n_x / (n + n_x)) ** 2 * n * mpf(es) ** 2) + code(n, mpf(pax) + mpf(es), (n - r - m) / n)
    return rel + 2 * m * sqrt(sec)


def bb84(n, r, m, pa, es, er):
    n = mpf(n)
    rel = exp(-n * mpf(er) ** 2 / 2) + code(n, mpf(pa) + mpf(er), r / n)
    sec = exp(-n * mpf(es) ** 2 / 2) + code(n, mpf(pa) + mpf(es), (n - r - m) / n)
    return rel + 2 * m * sqrt(sec)


def efficient(N, n, n_z, n_x, p, r, m, pa, es, er):
    N, n, n_z, n_x, p = mpf(N), mpf(n), mpf(n_z), mpf(n_x), mpf(p)
    cz = exp(-N * p ** 2 / 2)
    cx = exp(-N * (1 - p) ** 2 / 2)
    ez = p * N / 2 - n_z
    ex = (1 - p) * N / 2 - n_x
    rel = (cz + exp(-2 * (n_z / (n + n_z)) ** 2 * ez * mpf(er) ** 2)
           + cx + exp(-2 * (n_x / (n + n_x)) ** 2 * ex * mpf(er) ** 2)
           + code(n, mpf(pa) + mpf(er), r / n))
    sec = (cz + exp(-2 * (n_x / (n + n_x)) ** 2 * ez * mpf(es) ** 2)
           + cx + exp(-2 * (n_z / (n + n_z)) ** 2 * ex * mpf(es) ** 2)
           + code(n, mpf(pa) + mpf(es), (n - r - m) / n))
    return rel + 2 * m * sqrt(sec)


def modified(t_z, t_x, n_z, n_x, r, m, pa, es, er):
    t_z, t_x, n_z, n_x = mpf(t_z), mpf(t_x), mpf(n_z), mpf(n_x)
    n = t_z + t_x
    rel = (exp(-2 * (n_z / (t_z + n_z)) ** 2 * t_z * mpf(er) ** 2)
           + exp(-2 * (n_x / (t_x + n_x)) ** 2 * t_x * mpf(er) ** 2)
           + code(n, mpf(pa) + mpf(er), r / n))
    sec = (exp(-2 * (n_x / (t_z + n_x)) ** 2 * t_z * mpf(es) ** 2)
           + exp(-2 * (n_z / (t_x + n_z)) ** 2 * t_x * mpf(es) ** 2)
           + code(n, mpf(pa) + mpf(es), (n - r - m) / n))
    return rel + 2 * m * sqrt(sec)


POINTS = {
    "bb84": [
        dict(n=10000, r=3500, m=2000, pa=0.05, es=0.02, er=0.02),
        dict(n=2000, r=700, m=400, pa=0.03, es=0.02, er=0.025),
        dict(n=50000, r=12500, m=25000, pa=0.02, es=0.01, er=0.01),
    ],
    "bb84-info-z": [
        dict(n=10000, n_z=5000, n_x=5000, r=4000, m=1500, paz=0.05, pax=0.05, es=0.02, er=0.02),
        dict(n=4000, n_z=2000, n_x=1000, r=1200, m=800, paz=0.03, pax=0.08, es=0.02, er=0.02),
        dict(n=20000, n_z=20000, n_x=20000, r=6000, m=8000, paz=0.04, pax=0.04, es=0.01, er=0.01),
    ],
    "efficient": [
        dict(N=40000, n=30000, n_z=5000, n_x=5000, p=0.5, r=10500, m=4500, pa=0.05, es=0.02, er=0.02),
        dict(N=40000, n=30000, n_z=3000, n_x=7000, p=0.4, r=9000, m=12000, pa=0.03, es=0.02, er=0.02),
        dict(N=100000, n=80000, n_z=10000, n_x=10000, p=0.5, r=24000, m=28000, pa=0.04, es=0.01, er=0.0125),
    ],
    "modified-efficient": [
        dict(t_z=10000, t_x=10000, n_z=5000, n_x=5000, r=7000, m=3000, pa=0.05, es=0.02, er=0.02),
        dict(t_z=6000, t_x=4000, n_z=3000, n_x=2000, r=3000, m=4000, pa=0.03, es=0.02, er=0.02),
        dict(t_z=30000, t_x=30000, n_z=15000, n_x=15000, r=15000, m=27000, pa=0.02, es=0.01, er=0.01),
    ],
}

FORMULAS = {"bb84": bb84, "bb84-info-z": info_z, "efficient": efficient, "modified-efficient": modified}

if __name__ == "__main__":
    for variant, points in POINTS.items():
        for pt in points:
            print(variant, pt, mp.nstr(FORMULAS[variant](**pt), 20))
    print("1-2H2(0.05)", mp.nstr(1 - 2 * H2(mpf("0.05")), 20))
    print("hoeff(100,100,0.1)", mp.nstr(exp(-2 * mpf(1) / 4 * 100 * mpf("0.01")), 20))
