#!/usr/bin/env python3
"""Writes probe tables `name, x..., y..., F, f` for the SMD and WRA suites.

Scalar loop implementations, kept separate from the Rust code on purpose.
Run from this directory: `python3 generate.py`.
"""
import math
import random

EPS = 1e-12


# ---------------------------------------------------------------- SMD

def smd_split(k, dx, dy):
    r = dx // 2
    p = dx - r
    free = dy - r
    if k == 6:
        s = 2 * (free // 4)
        q = free - s
    else:
        s = 0
        q = free
    return p, q, r, s


def smd_bounds(k, dx, dy):
    p, q, r, s = smd_split(k, dx, dy)
    if k in (1, 3):
        u2, l2 = (-5.0, 10.0), (-math.pi / 2 + EPS, math.pi / 2 - EPS)
    elif k in (2, 7):
        u2, l2 = (-5.0, 1.0), (EPS, math.e)
    elif k == 4:
        u2, l2 = (-1.0, 1.0), (-1.0 + EPS, -1.0 + math.e)
    else:
        u2, l2 = (-5.0, 10.0), (-5.0, 10.0)
    bx = [(-5.0, 10.0)] * p + [u2] * r
    by = [(-5.0, 10.0)] * (q + s) + [l2] * r
    return bx, by


def smd(k, dx, dy, x, y):
    p, q, r, s = smd_split(k, dx, dy)
    xu1, xu2 = x[:p], x[p:]
    xl1, xl2 = y[:q + s], y[q + s:]

    F1 = 0.0
    for a in xu1:
        F1 += a * a
    f1 = F1
    if k == 7:
        F1 = 1.0
        prod = 1.0
        for i, a in enumerate(xu1):
            F1 += a * a / 400.0
            prod *= math.cos(a / math.sqrt(i + 1))
        F1 -= prod
        f1 = 0.0
        for a in xu1:
            f1 += a ** 3
    if k == 8:
        n = len(xu1)
        sq = 0.0
        cs = 0.0
        for a in xu1:
            sq += a * a
            cs += math.cos(2 * math.pi * a)
        F1 = 20.0 + math.e - 20.0 * math.exp(-0.2 * math.sqrt(sq / n)) - math.exp(cs / n)
        f1 = 0.0
        for a in xu1:
            f1 += abs(a)

    sq1 = 0.0
    for a in xl1[:q]:
        sq1 += a * a
    rosen = 0.0
    for i in range(len(xl1) - 1):
        rosen += (xl1[i + 1] - xl1[i] ** 2) ** 2 + (xl1[i] - 1.0) ** 2
    rast = float(len(xl1))
    for a in xl1:
        rast += a * a - math.cos(2 * math.pi * a)

    if k in (1, 3):
        F2, f2 = sq1, (sq1 if k == 1 else rast)
    elif k in (2, 7):
        F2, f2 = -sq1, sq1
    elif k == 4:
        F2, f2 = -sq1, rast
    elif k in (5, 8):
        F2, f2 = -rosen, rosen
    else:
        tail = 0.0
        for a in xl1[q:]:
            tail += a * a
        pairs = 0.0
        for i in range(q, q + s - 1, 2):
            pairs += (xl1[i + 1] - xl1[i]) ** 2
        F2 = -sq1 + tail
        f2 = sq1 + pairs

    F3 = 0.0
    f3 = 0.0
    for u, l in zip(xu2, xl2):
        if k == 1:
            d = u - math.tan(l)
        elif k in (2, 7):
            d = u - math.log(l)
        elif k == 3:
            d = u * u - math.tan(l)
        elif k == 4:
            d = abs(u) - math.log(1.0 + l)
        elif k == 5:
            d = abs(u) - l * l
        elif k == 6:
            d = u - l
        else:
            d = u - l ** 3
        F3 += u * u + (d * d if k in (1, 3) else -d * d)
        f3 += d * d
    return F1 + F2 + F3, f1 + f2 + f3


# ---------------------------------------------------------------- WRA

def wra(k, dx, dy, x, y):
    m = min(dx, dy)
    xy = 0.0
    for i in range(m):
        xy += x[i] * y[i]
    xx = sum(a * a for a in x)
    yy = sum(b * b for b in y)
    if k == 1:
        F = xy
    elif k == 2:
        F = 0.0
        for i in range(m):
            F += (x[i] - 1.0) * (y[i] - 1.0)
    elif k == 3:
        F = 0.5 * xx + xy
    elif k == 4:
        F = 0.5 * xx + xy + 0.5 * yy
    elif k == 5:
        F = 0.5 * xx + xy - 0.5 * yy
    elif k == 6:
        F = 0.0
        for a in x:
            F += 0.5 * (a - 1.0) ** 2
        for i in range(m):
            F += (x[i] - 1.0) * (y[i] + 1.0)
        for b in y:
            F -= 0.5 * (b + 1.0) ** 2
    elif k == 7:
        F = sum(abs(a) for a in x) + xy - yy / 20.0
    elif k == 8:
        F = xx + xy - yy
    elif k == 9:
        F = 0.5 * xx + xy - 0.5 * yy
        for b in y:
            F -= 1.0 - math.cos(2 * math.pi * b)
    elif k == 10:
        F = -0.25 * xx + xy - 0.5 * yy
    else:
        def kappa(i, d):
            return 1.0 if d == 1 else 10.0 ** (6.0 * i / (d - 1))
        F = xy
        for i, a in enumerate(x):
            F += 0.5 * kappa(i, dx) * a * a
        for j, b in enumerate(y):
            F -= 0.5 * kappa(j, dy) * b * b
    return F, -F


# ---------------------------------------------------------------- output

def fmt(v):
    return "%.17g" % v


def write(path, rows):
    with open(path, "w") as fh:
        fh.write("# name, x..., y..., F, f\n")
        for name, x, y, F, f in rows:
            fh.write(", ".join([name] + [fmt(v) for v in x + y] + [fmt(F), fmt(f)]) + "\n")


def probes(rng, bx, by, n):
    pts = []
    for _ in range(n):
        pts.append(([rng.uniform(lo, hi) for lo, hi in bx], [rng.uniform(lo, hi) for lo, hi in by]))
    return pts


def main():
    rng = random.Random(20240613)
    rows = []
    dx, dy = 5, 10
    for k in range(1, 9):
        bx, by = smd_bounds(k, dx, dy)
        for x, y in probes(rng, bx, by, 6):
            F, f = smd(k, dx, dy, x, y)
            rows.append(("smd%d" % k, x, y, F, f))
    write("smd_5_10.txt", rows)

    rows = []
    dx, dy = 5, 5
    box = [(-3.0, 3.0)] * 5
    for k in range(1, 12):
        for x, y in probes(rng, box, box, 6):
            F, f = wra(k, dx, dy, x, y)
            rows.append(("wra%d" % k, x, y, F, f))
    write("wra_5_5.txt", rows)


if __name__ == "__main__":
    main()
