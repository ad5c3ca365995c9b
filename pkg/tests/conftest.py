from __future__ import annotations

import os
import sys
from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def rationals(max_num: int = 9, max_den: int = 4):
    return st.builds(
        Fraction,
        st.integers(-max_num, max_num),
        st.integers(1, max_den),
    )


def distinct_lambdas(n: int, max_num: int = 6, max_den: int = 3):
    return st.lists(rationals(max_num, max_den), min_size=n, max_size=n, unique=True)


def cusp_lists(min_n: int = 1, max_n: int = 2):
    @st.composite
    def build(draw):
        n = draw(st.integers(min_n, max_n))
        lams = draw(distinct_lambdas(n))
        gams = draw(st.lists(rationals(6, 3), min_size=n, max_size=n))
        return list(zip(lams, gams))

    return build()


def vacua(max_r: int = 4):
    @st.composite
    def build(draw):
        from bispectral.operators import AiryVacuum

        r = draw(st.integers(2, max_r))
        a = draw(st.lists(rationals(3, 2), min_size=r - 2, max_size=r - 2))
        return AiryVacuum(r, a)

    return build()
