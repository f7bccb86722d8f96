import math

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def brute_gamma_opt(p: float, beta: float, n: int) -> float:
    """Normalised double sum over charging steps, canonical exponent."""
    q = 1.0 - p
    terms = [
        q ** (k1 + k2 - 2) * p * p * beta ** (2 * abs(k2 - k1) + 2 * (n - max(k1, k2)) + 3)
        for k1 in range(1, n + 1)
        for k2 in range(1, n + 1)
    ]
    return math.fsum(terms) / (1.0 - q**n) ** 2


def truncated_gamma_can(p: float, beta: float, tail: float = 1e-14) -> float:
    """Infinite CP double sum, cut where the remaining geometric mass drops below ``tail``."""
    q = 1.0 - p
    if q == 0.0:
        return beta**3
    K = math.ceil(math.log(tail) / math.log(q)) + 1
    total = []
    for k1 in range(1, K + 1):
        for k2 in range(1, K + 1):
            total.append(q ** (k1 + k2 - 2) * p * p * beta ** (2 * abs(k2 - k1) + 3))
    return math.fsum(total)


def direct_gamma_level(p_in, beta_i, n_in, n_out, convention):
    q = 1.0 - p_in
    num, den = [], []
    for k1 in range(1, n_out + 1):
        for k2 in range(1, n_out + 1):
            w = p_in * p_in * q ** (k1 + k2 - 2)
            if convention == "paper":
                core = 2 * (n_out - k1) + 2
            else:
                core = 2 * abs(k2 - k1) + 2 * (n_out - max(k1, k2)) + 2
            num.append(w * beta_i ** (n_in * core + 1))
            den.append(w)
    return math.fsum(num) / math.fsum(den)


# --------------------------------------------------------------------------
# acceptance summary: one pass/fail line per criterion
# --------------------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[props["criterion"]] = (props["title"], report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        title, outcome = _ACCEPTANCE[k]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {verdict}  {title}")
