import itertools
import math
import random

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from poetrat.errors import DegenerateInput, LengthMismatch
from poetrat.metrics.correlation import average_ranks, correlate, kendall, pearson, spearman

XS, YS = [1, 2, 3, 4], [1, 3, 2, 4]


def kendall_oracle(xs, ys):
    """Tau-b from pair counts: (C - D) / sqrt((n0 - n1)(n0 - n2))."""
    c = d = 0
    for i, j in itertools.combinations(range(len(xs)), 2):
        s = (xs[i] - xs[j]) * (ys[i] - ys[j])
        c += s > 0
        d += s < 0
    n0 = len(xs) * (len(xs) - 1) // 2
    n1 = sum(k * (k - 1) // 2 for k in (xs.count(v) for v in set(xs)))
    n2 = sum(k * (k - 1) // 2 for k in (ys.count(v) for v in set(ys)))
    return (c - d) / math.sqrt((n0 - n1) * (n0 - n2))


class TestHandValues:
    def test_pearson(self):
        # cov = 4, var_x = var_y = 5 (sums of squared deviations)
        assert pearson(XS, YS) == pytest.approx(0.8, abs=1e-9)

    def test_spearman(self):
        # 1 - 6 * 2 / (4 * 15)
        assert spearman(XS, YS) == pytest.approx(1 - 6 * 2 / (4 * (16 - 1)), abs=1e-9)

    def test_kendall(self):
        # 5 concordant, 1 discordant of 6 pairs
        assert kendall(XS, YS) == pytest.approx(4 / 6, abs=1e-9)

    @pytest.mark.parametrize("fn", [pearson, spearman, kendall])
    def test_perfect(self, fn):
        assert fn([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
        assert fn([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)
        assert fn([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)


class TestDegenerate:
    @pytest.mark.parametrize("fn", [pearson, spearman, kendall])
    def test_zero_variance(self, fn):
        with pytest.raises(DegenerateInput):
            fn([3, 3, 3], [1, 2, 3])

    @pytest.mark.parametrize("fn", [pearson, spearman, kendall])
    def test_too_short_or_mismatched(self, fn):
        with pytest.raises(DegenerateInput):
            fn([1], [1])
        with pytest.raises(LengthMismatch):
            fn([1, 2], [1, 2, 3])

    def test_report_marks_undefined(self):
        rep = correlate([3, 3, 3], [1, 2, 3])
        assert rep.pearson_r is None and rep.kendall_tau is None and rep.n == 3


def test_average_ranks_ties():
    assert average_ranks([10, 20, 20, 30]) == [1.0, 2.5, 2.5, 4.0]


@pytest.mark.parametrize("seed", range(30))
def test_against_scipy(seed):
    rng = random.Random(seed)
    xs = [rng.randint(1, 5) for _ in range(25)] + [1, 5]
    ys = [rng.randint(1, 5) for _ in range(25)] + [2, 3]
    assert pearson(xs, ys) == pytest.approx(stats.pearsonr(xs, ys)[0], abs=1e-9)
    assert spearman(xs, ys) == pytest.approx(stats.spearmanr(xs, ys)[0], abs=1e-9)
    assert kendall(xs, ys) == pytest.approx(stats.kendalltau(xs, ys, variant="b")[0], abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_kendall_matches_pair_oracle(seed):
    rng = random.Random(seed)
    xs = [rng.randint(1, 6) for _ in range(20)]
    ys = [rng.randint(1, 6) for _ in range(20)]
    assert kendall(xs, ys) == kendall_oracle(xs, ys)


values = st.lists(st.integers(-50, 50), min_size=3, max_size=15)


@given(values, st.data())
def test_rank_correlations_monotone_invariant(xs, data):
    ys = data.draw(st.lists(st.integers(-50, 50), min_size=len(xs), max_size=len(xs)))
    assume(len(set(xs)) > 1 and len(set(ys)) > 1)
    fx = [x ** 3 + 7 for x in xs]
    fy = [math.exp(y / 10) for y in ys]
    assert spearman(fx, fy) == pytest.approx(spearman(xs, ys), abs=1e-9)
    assert kendall(fx, fy) == pytest.approx(kendall(xs, ys), abs=1e-9)


@given(values, st.data(), st.floats(0.1, 100), st.floats(-100, 100))
def test_pearson_affine_invariant(xs, data, a, b):
    ys = data.draw(st.lists(st.integers(-50, 50), min_size=len(xs), max_size=len(xs)))
    assume(len(set(xs)) > 1 and len(set(ys)) > 1)
    assert pearson([a * x + b for x in xs], ys) == pytest.approx(pearson(xs, ys), abs=1e-9)


@given(values, st.data())
def test_bounded(xs, data):
    ys = data.draw(st.lists(st.integers(-50, 50), min_size=len(xs), max_size=len(xs)))
    assume(len(set(xs)) > 1 and len(set(ys)) > 1)
    for fn in (pearson, spearman, kendall):
        assert -1.0 <= fn(xs, ys) <= 1.0
