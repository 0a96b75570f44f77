import os
import sys

import gmpy2
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bordercx.polyring import CycloScalar, LaurentScalar, LinearForm

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

small_rats = st.builds(gmpy2.mpq, st.integers(-6, 6), st.integers(1, 4))


@st.composite
def cyclo(draw, N=6):
    k = draw(st.integers(0, N - 1))
    return CycloScalar.zeta(N, k) * draw(small_rats) + draw(small_rats)


@st.composite
def laurent(draw, N=6, lo=-2, hi=2):
    out = LaurentScalar.of(0)
    for e in range(lo, hi + 1):
        if draw(st.booleans()):
            out = out + LaurentScalar.eps(e, draw(cyclo(N)))
    return out


@st.composite
def forms(draw, n=3, N=6, lo=0, hi=2):
    return LinearForm([draw(laurent(N, lo, hi)) for _ in range(n)])


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: heavier exact computations")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    rows = getattr(mod, "RESULTS", None)
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(rows):
            terminalreporter.write_line(line)
