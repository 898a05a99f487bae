"""Exact variance of coupled EM level summands for the scalar linear model.

Over one coarse step the fine path multiplies by F = (a + s D1)(a + s D2) and the
coarse path by C = b + s (D1 + D2), with a = 1 + r h, b = 1 + 2 r h and
independent D1, D2 ~ N(0, h).  Pairs are independent, so every moment of the
summand follows from E F, E C, E F^2, E C^2 and E F C raised to the number of
pairs.  Evaluated in 60-digit arithmetic to avoid cancellation.

    python scripts/exact_level_variance.py [--levels 2-7]
"""

import argparse

import mpmath as mp

from accelmlmc.sde import GBM_R, GBM_SIGMA, GBM_X0

mp.mp.dps = 60


def level_variance(l, r=GBM_R, s=GBM_SIGMA, x0=GBM_X0, T=1):
    h = mp.mpf(T) / 2**l
    a, b = 1 + r * h, 1 + 2 * r * h
    EF, EC = a * a, b
    EF2 = (a * a + s * s * h) ** 2
    EC2 = b * b + 2 * s * s * h
    EFC = a * a * b + 2 * a * s * s * h
    n = 2 ** (l - 1)
    second = x0**2 * (EF2**n + EC2**n - 2 * EFC**n)
    return h, second - (x0 * (EF**n - EC**n)) ** 2


def slope(levels):
    pts = [level_variance(l) for l in levels]
    xs = [mp.log(h) for h, _ in pts]
    ys = [mp.log(v) for _, v in pts]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", default="2-7")
    lo, hi = map(int, ap.parse_args().levels.split("-"))
    for l in range(lo, hi + 1):
        h, v = level_variance(l)
        print(f"l={l:2d} h={mp.nstr(h, 6):>10s} var={mp.nstr(v, 8)}")
    print(f"least-squares slope over levels {lo}..{hi}: {mp.nstr(slope(range(lo, hi + 1)), 5)}")
    for a, b in ((3, 7), (5, 10), (12, 18)):
        print(f"  reference window {a}..{b}: {mp.nstr(slope(range(a, b + 1)), 5)}")


if __name__ == "__main__":
    main()
