"""Brute-force reference values for the Boolean-side tests.

Independent of the Rust implementation: monotone functions are found by
filtering every truth table, spectra are computed point by point with
Fractions, and bound ratios are plain float formula evaluations.

Usage: python3 boolean_oracle.py [n]
"""
import itertools
import json
import math
import sys
from fractions import Fraction as Fr


def points(n):
    # index bit i-1 <-> x_i, x_i = 2*b_i - 1
    return [tuple(2 * ((idx >> i) & 1) - 1 for i in range(n)) for idx in range(1 << n)]


def index_of(x):
    return sum(1 << i for i, xi in enumerate(x) if xi == 1)


def value(table, x):
    return (table >> index_of(x)) & 1


def with_coord(x, i, v):
    y = list(x)
    y[i] = v
    return tuple(y)


def is_monotone(n, table):
    for x in points(n):
        for i in range(n):
            if value(table, with_coord(x, i, 1)) < value(table, with_coord(x, i, -1)):
                return False
    return True


def is_antipodal(n, table):
    return all(value(table, x) == 1 - value(table, tuple(-v for v in x)) for x in points(n))


def deriv(table, i, x):
    return value(table, with_coord(x, i, 1)) - value(table, with_coord(x, i, -1))


def spectra(n, table):
    pts = points(n)
    N = len(pts)
    mean = Fr(sum(value(table, x) for x in pts), N)
    inf = [Fr(sum(abs(deriv(table, i, x)) for x in pts), N) for i in range(n)]
    V = [[Fr(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            s = 0
            for x in pts:
                s += deriv(table, i, with_coord(x, j, 1)) - deriv(table, i, with_coord(x, j, -1))
            V[i][j] = Fr(s, N)
    fourier = {}
    for S in range(1 << n):
        acc = 0
        for x in pts:
            chi = 1
            for i in range(n):
                if (S >> i) & 1:
                    chi *= x[i]
            acc += value(table, x) * chi
        fourier[S] = Fr(acc, N)
    return dict(mean=mean, inf=inf, V=V, fourier=fourier)


def cor(n, f, g):
    pts = points(n)
    N = len(pts)
    efg = Fr(sum(value(f, x) * value(g, x) for x in pts), N)
    ef = Fr(sum(value(f, x) for x in pts), N)
    eg = Fr(sum(value(g, x) for x in pts), N)
    return efg - ef * eg


def rhs_all(sf, sg, n):
    a, b = sf["inf"], sg["inf"]
    m1 = sum(a[i] * b[i] for i in range(n))
    m2 = sum(sf["V"][i][j] * sg["V"][i][j] for i in range(n) for j in range(n))
    out = {}
    m1f = float(m1)
    out["talagrand"] = 0.0 if m1 == 0 else m1f / math.log(math.e / m1f)
    kms = 0.0
    for i in range(n):
        if a[i] > 0 and b[i] > 0:
            kms += float(a[i] * b[i]) / math.sqrt(math.log(math.e / float(a[i])) * math.log(math.e / float(b[i])))
    out["kms"] = kms
    if m1 == 0:
        out["main_tal"] = 0.0
    else:
        first = m1f / math.sqrt(math.log(math.e / m1f))
        out["main_tal"] = first if m2 == 0 else min(first, float(m1 * m1) / abs(float(m2)))
    coord = 0.0
    for i in range(n):
        p = a[i] * b[i]
        if p == 0:
            continue
        vi = sum(sf["V"][i][j] * sg["V"][i][j] for j in range(n))
        first = 1.0 / math.sqrt(math.log(math.e / float(p)))
        term = first if vi == 0 else min(first, float(p) / abs(float(vi)))
        coord += float(p) * term
    out["main_coord"] = coord
    return m1, m2, out


def hexstr(n, table):
    digits = max(1, ((1 << n) + 3) // 4)
    return "".join("%x" % ((table >> (4 * k)) & 0xF) for k in range(digits))


def scan(n):
    mono = [t for t in range(1 << (1 << n)) if is_monotone(n, t)]
    spec = {t: spectra(n, t) for t in mono}
    best = {}
    harris = 0
    for f in mono:
        for g in mono:
            c = cor(n, f, g)
            if c < 0:
                harris += 1
            _, _, rhs = rhs_all(spec[f], spec[g], n)
            for name, r in rhs.items():
                if r > 0:
                    ratio = float(c) / r
                    if name not in best or ratio < best[name][0]:
                        best[name] = (ratio, hexstr(n, f), hexstr(n, g))
    return len(mono), harris, best


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 4
    count, harris, best = scan(n)
    print(json.dumps({"n": n, "count": count, "harris_violations": harris,
                      "minima": {k: {"ratio": v[0], "f_hex": v[1], "g_hex": v[2]} for k, v in best.items()}},
                     indent=2))
