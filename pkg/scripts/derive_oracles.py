"""Recompute the high-precision reference values frozen into the test suite.

Every value comes from the defining sums or formulas evaluated in mpmath at
60 digits (more where the quantity sits near 1e-900), independently of the
package code.  Slow: about a minute and a half, dominated by the infinite
canonical-protocol sums.
"""

import mpmath as mp

mp.mp.dps = 60


def entropy(x):
    x = mp.mpf(x)
    return -(x * mp.log(x, 2) + (1 - x) * mp.log(1 - x, 2))


def ed(gamma, dps=60):
    with mp.workdps(dps):
        F = (1 + mp.mpf(gamma)) / 2
        return entropy(mp.mpf(1) / 2 + mp.sqrt(F * (1 - F)))


def gamma_opt(p, beta, n):
    p, beta = mp.mpf(p), mp.mpf(beta)
    q = 1 - p
    s = mp.fsum(q ** (k1 + k2 - 2) * p * p * beta ** (2 * abs(k2 - k1) + 2 * (n - max(k1, k2)) + 3)
                for k1 in range(1, n + 1) for k2 in range(1, n + 1))
    return s / (1 - q**n) ** 2


def gamma_can(p, beta):
    p, beta = mp.mpf(p), mp.mpf(beta)
    q = 1 - p
    return mp.nsum(lambda k1, k2: q ** (k1 + k2 - 2) * p * p * beta ** (2 * abs(k2 - k1) + 3),
                   [1, mp.inf], [1, mp.inf])


def gamma_level(p, beta, n_in, n_out, convention):
    p, beta = mp.mpf(p), mp.mpf(beta)
    q = 1 - p
    num = den = 0
    for k1 in range(1, n_out + 1):
        for k2 in range(1, n_out + 1):
            w = p * p * q ** (k1 + k2 - 2)
            if convention == "paper":
                core = 2 * (n_out - k1) + 2
            else:
                core = 2 * abs(k2 - k1) + 2 * (n_out - max(k1, k2)) + 2
            num += w * beta ** (n_in * core + 1)
            den += w
    return num / den


def mean_wait(p):
    p = mp.mpf(p)
    return (3 - 2 * p) / (p * (2 - p))


def gamma_can_level(j, p, beta, p_S, tail="1e-14"):
    p, beta, p_S = mp.mpf(p), mp.mpf(beta), mp.mpf(p_S)
    p_j = p if j == 1 else p_S
    q_j = 1 - p_j
    waits = mp.mpf(1)
    for l in range(1, j):
        waits *= mean_wait(p if l == 1 else p_S)
    beta_j = beta ** (2 ** (j - 1))
    K = int(mp.ceil(mp.log(mp.mpf(tail)) / mp.log(q_j))) + 50
    return mp.fsum(p_j * p_j * q_j ** (k1 + k2 - 2) * beta_j**3 * beta ** (2 * waits * abs(k2 - k1))
                   for k1 in range(1, K) for k2 in range(1, K))


def show(label, value):
    print(f"{label:40s} {mp.nstr(value, 20)}")


if __name__ == "__main__":
    show("H(0.11)", entropy("0.11"))
    show("E(F=0.9)", ed("0.8"))
    for g in ("1e-3", "1e-6", "1e-12"):
        show(f"E(gamma={g})", ed(g, 80))
    for lg in (-30, -200, -1000):
        with mp.workdps(2000):
            show(f"ln E(ln gamma={lg})", mp.log(ed(mp.exp(lg), 2000)))
    for pt in [("0.5", "0.6", 2), ("0.1", "0.9", 5), ("0.05", "0.99", 10), ("0.3", "0.3", 3),
               ("0.9", "0.1", 10)]:
        show(f"gamma_opt{pt}", gamma_opt(*pt))
    for pt in [("0.5", "0.6"), ("0.05", "0.99"), ("0.9", "0.1")]:
        show(f"gamma_can{pt}", gamma_can(*pt))
    for args in [("0.5", "0.6", 1, 2), ("0.3", "0.8", 2, 3), ("0.2", "0.9", 1, 4),
                 ("0.6", "0.95", 3, 2)]:
        for conv in ("paper", "symmetric"):
            show(f"gamma_level{args}[{conv}]", gamma_level(*args, conv))
    for j in (1, 2, 3):
        show(f"gamma_can_level(j={j}, 0.02, 0.2, 0.5)", gamma_can_level(j, "0.02", "0.2", "0.5"))
    p, beta = mp.mpf("0.5"), mp.mpf("0.6")
    show("rate_obp(0.5, 0.6, n=1)", (1 - (1 - p)) ** 2 / 2 * ed(beta**3))
    show("rate_cp(0.5, 0.6)", 1 / (2 * mean_wait(p)) * ed(gamma_can("0.5", "0.6")))

    # beta = 0.99: where the one-attempt buffer overtakes two attempts
    def rate(pp, n):
        pp = mp.mpf(pp)
        return (1 - (1 - pp) ** n) ** 2 / n * ed(gamma_opt(pp, "0.99", n))

    with mp.workdps(40):
        show("n_opt 2->1 crossover at beta=0.99", mp.findroot(lambda x: rate(x, 1) - rate(x, 2), 0.56))
