"""Slow, loop-based reference implementations used to cross-check the
vectorised library code.  Nothing here imports the package's numerics."""

import math


def mean(v):
    return sum(v) / len(v)


def cov(a, b):
    ma, mb = mean(a), mean(b)
    return sum((x - ma) * (y - mb) for x, y in zip(a, b)) / (len(a) - 1)


def components(a, b, l):
    c1, c2 = (0.01 * l) ** 2, (0.03 * l) ** 2
    ma, mb = mean(a), mean(b)
    s1 = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1)
    s2 = (2 * cov(a, b) + c2) / (cov(a, a) + cov(b, b) + c2)
    return s1, s2


def dist_eq1_sq(a, b, l):
    ma, mb = mean(a), mean(b)
    x = [v - ma for v in a]
    y = [v - mb for v in b]
    c = (len(a) - 1) * (0.03 * l) ** 2
    num = sum((p - q) ** 2 for p, q in zip(x, y))
    return num / (sum(p * p for p in x) + sum(q * q for q in y) + c)


def windows(img, window, stride):
    h, w = len(img), len(img[0])
    out = []
    for r in range(0, h - window + 1, stride):
        for c in range(0, w - window + 1, stride):
            out.append([img[r + i][c + j] for i in range(window) for j in range(window)])
    return out


def frob_distance(img_a, img_b, l, window, stride, mode):
    total = 0.0
    for a, b in zip(windows(img_a, window, stride), windows(img_b, window, stride)):
        if mode == "eq1":
            total += dist_eq1_sq(a, b, l)
        else:
            s1, s2 = components(a, b, l)
            total += max(2 - s1 - s2, 0.0)
    return math.sqrt(total)


def double_center(D):
    """-1/2 H D H with H built explicitly and multiplied out by loops."""
    n = len(D)
    H = [[(1.0 if i == j else 0.0) - 1.0 / n for j in range(n)] for i in range(n)]

    def mm(A, B):
        return [[sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)] for i in range(n)]

    HDH = mm(mm(H, D), H)
    return [[-0.5 * v for v in row] for row in HDH]


def mmd2_biased(Kxx, Kyy, Kxy):
    nx, ny = len(Kxx), len(Kyy)
    xx = sum(Kxx[i][j] for i in range(nx) for j in range(nx)) / (nx * nx)
    yy = sum(Kyy[i][j] for i in range(ny) for j in range(ny)) / (ny * ny)
    xy = sum(Kxy[i][j] for i in range(nx) for j in range(ny)) / (nx * ny)
    return xx + yy - 2 * xy


def mmd2_unbiased(Kxx, Kyy, Kxy):
    nx, ny = len(Kxx), len(Kyy)
    xx = sum(Kxx[i][j] for i in range(nx) for j in range(nx) if i != j) / (nx * (nx - 1))
    yy = sum(Kyy[i][j] for i in range(ny) for j in range(ny) if i != j) / (ny * (ny - 1))
    xy = sum(Kxy[i][j] for i in range(nx) for j in range(ny)) / (nx * ny)
    return xx + yy - 2 * xy
