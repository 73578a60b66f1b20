"""Independent full-enumeration counts and closed-form values used as test oracles."""
from fractions import Fraction as Fr
from itertools import product


def divergence_free(k, dims, assign):
    n = len(dims)
    m = len(k[0])
    cells = list(product(*[range(d) for d in dims]))
    index = {c: i for i, c in enumerate(cells)}
    for c in cells:
        for r in range(m):
            s = Fr(0)
            for ax in range(n):
                back = list(c)
                back[ax] = (back[ax] - 1) % dims[ax]
                s += k[assign[index[c]]][r][ax] - k[assign[index[tuple(back)]]][r][ax]
            if s != 0:
                return False
    return True


def count(k, dims):
    cells = 1
    for d in dims:
        cells *= d
    return sum(divergence_free(k, dims, a) for a in product(range(len(k)), repeat=cells))


def diag(*v):
    return [[Fr(v[i]) if i == j else Fr(0) for j in range(len(v))] for i in range(len(v))]


if __name__ == "__main__":
    half = Fr(1, 2)
    q = (half, half, half)
    lam = (Fr(0), 1 / (1 - q[0]), q[1] / (q[0] + q[1] - q[0] * q[1]))
    p = (1 - q[0]) * (1 - q[1]) * (1 - q[2])
    s1 = lam
    a3 = tuple(((1 - p) * s - q[1] * (1 - q[2])) / q[2] for s in s1)
    s2 = tuple((1 - q[0]) * s for s in s1)
    s3 = tuple(q[1] + (1 - q[1]) * s for s in s2)
    print("A3 =", a3, "S1 =", s1, "S2 =", s2, "S3 =", s3)
    dists = [sum(float(x) ** 2 for x in s1) ** 0.5,
             sum((float(x) - 1) ** 2 for x in s1) ** 0.5,
             sum((float(x) - float(y)) ** 2 for x, y in zip(s1, a3)) ** 0.5]
    print("min |S1 - A_i| =", min(dists))
    print("{0, I} 4x4:", count([diag(0, 0), diag(1, 1)], (4, 4)))
    print("{0, diag(1,0)} 4x4:", count([diag(0, 0), diag(1, 0)], (4, 4)))
    print("{0, I, A3} 2x2x2:", count([diag(0, 0, 0), diag(1, 1, 1), diag(*a3)], (2, 2, 2)))
