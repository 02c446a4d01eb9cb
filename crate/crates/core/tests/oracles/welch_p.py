#!/usr/bin/env python3
"""Welch t statistic, dof and two-sided p by Simpson integration of the t density.

Usage: welch_p.py "1 2 3 4 5" "2 3 4 5 6"
"""
import math
import sys


def welch(xs, ys):
    nx, ny = len(xs), len(ys)
    mx, my = sum(xs) / nx, sum(ys) / ny
    vx = sum((x - mx) ** 2 for x in xs) / (nx - 1)
    vy = sum((y - my) ** 2 for y in ys) / (ny - 1)
    sx, sy = vx / nx, vy / ny
    t = (mx - my) / math.sqrt(sx + sy)
    dof = (sx + sy) ** 2 / (sx ** 2 / (nx - 1) + sy ** 2 / (ny - 1))
    return t, dof


def density(x, dof):
    c = math.exp(math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2)) / math.sqrt(dof * math.pi)
    return c * (1 + x * x / dof) ** (-(dof + 1) / 2)


def simpson(f, a, b, n):
    h = (b - a) / n
    s = f(a) + f(b)
    for i in range(1, n):
        s += (4 if i % 2 else 2) * f(a + i * h)
    return s * h / 3


def two_sided_p(t, dof):
    # P(|T| >= |t|) = 1 - 2 * integral_0^|t| density
    return 1 - 2 * simpson(lambda x: density(x, dof), 0.0, abs(t), 200_000)


if __name__ == "__main__":
    xs = [float(v) for v in sys.argv[1].split()]
    ys = [float(v) for v in sys.argv[2].split()]
    t, dof = welch(xs, ys)
    print(f"t={t!r} dof={dof!r} p={two_sided_p(t, dof)!r}")
