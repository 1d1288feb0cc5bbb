"""Per-formula evaluation of the classification metrics with exact rationals."""
from fractions import Fraction as F
from mpmath import mp, mpf, sqrt

mp.dps = 40


def metrics(cm):
    k = len(cm)
    s = sum(map(sum, cm))
    t = [sum(cm[i]) for i in range(k)]
    p = [sum(cm[i][j] for i in range(k)) for j in range(k)]
    c = sum(cm[i][i] for i in range(k))
    prec = [F(cm[j][j], p[j]) if p[j] else F(0) for j in range(k)]
    rec = [F(cm[i][i], t[i]) if t[i] else F(0) for i in range(k)]
    f1 = [2 * a * b / (a + b) if a + b else F(0) for a, b in zip(prec, rec)]
    num = c * s - sum(a * b for a, b in zip(p, t))
    den = sqrt(mpf(s * s - sum(a * a for a in p)) * mpf(s * s - sum(b * b for b in t)))
    return F(c, s), sum(prec) / k, sum(rec) / k, sum(f1) / k, (mpf(num) / den if den else mpf(0))


if __name__ == "__main__":
    acc, P, R, F1, mcc = metrics([[5, 1, 0], [0, 4, 2], [1, 0, 7]])
    for name, v in [("acc", acc), ("P", P), ("R", R), ("F1", F1)]:
        print(name, mp.nstr(mpf(v.numerator) / v.denominator, 20))
    print("MCC", mp.nstr(mcc, 20))
