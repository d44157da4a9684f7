import math
import random

import numpy as np
import pytest

from invertkit.expr import eval_array, eval_scalar, parse_model
from invertkit.interval import ACCEPTED, BOUNDARY, REJECTED, Box, Interval, volume
from invertkit.psi import (
    InversionProblem,
    Kind,
    PavingIncomplete,
    PsiConfig,
    _probability,
    box_from_spec,
    classify,
    dyadic_columns,
    invert,
    invert_decomposed,
    probability,
)

from conftest import SYSTEM_2D, WAVELET


def identity(R, P):
    return InversionProblem.from_text("x", [R], [P])


class TestProbability:
    def test_half_overlap(self):
        assert _probability(Box([(0, 1)]), Box([(0.5, 2)])) == 0.5

    def test_contained(self):
        assert _probability(Box([(0.2, 0.3)]), Box([(0, 1)])) == 1.0

    def test_disjoint(self):
        assert _probability(Box([(2, 3)]), Box([(0, 1)])) == 0.0

    def test_touching_is_zero(self):
        assert _probability(Box([(1, 2)]), Box([(0, 1)])) == 0.0

    def test_degenerate(self):
        P = Box([(0, 1), (0, 1)])
        assert _probability(Box([(0.5, 0.5), (0.2, 0.3)]), P) == 1.0
        assert _probability(Box([(2, 2), (0.2, 0.3)]), P) == 0.0
        assert _probability(Box([(0.5, 0.5), (0.5, 1.5)]), P) == 0.5

    def test_tiny_overlap_stays_positive(self):
        p = _probability(Box([(0, 1e200)]), Box([(-1, 1e-200)]))
        assert 0 < p < 1

    def test_multi_output_is_product(self):
        p = _probability(Box([(0, 2), (0, 4)]), Box([(1, 5), (-1, 1)]))
        assert p == pytest.approx(0.5 * 0.25)

    def test_invalid_image(self):
        prob = InversionProblem.from_text("(log x)", [(-1, 1)], [(0, 1)])
        assert probability(prob, [(-1, 1)]) is None


class TestClassify:
    def test_accept_reject(self):
        prob = identity((0, 4), (0, 1))
        cfg = PsiConfig(0.01)
        assert classify(prob, cfg, [(0.2, 0.5)]).kind is Kind.ACCEPT
        assert classify(prob, cfg, [(2, 3)]).kind is Kind.REJECT

    def test_threshold(self):
        prob = identity((0, 4), (0, 1))
        cfg = PsiConfig(0.01)
        c = classify(prob, cfg, [(0.997, 1.002)])
        assert c.kind is Kind.BOUNDARY and 0 < c.probability < 1
        assert classify(prob, cfg, [(0.9, 1.1)]).kind is Kind.BISECT

    def test_threshold_p03(self):
        # image [0, 1] against P = [0.7, 5]: p = 0.3, vol(X) = resolution / 2
        prob = identity((0, 4), (0.7, 5))
        c = classify(prob, PsiConfig(2.0), [(0, 1)])
        assert c.probability == pytest.approx(0.3)
        assert c.kind is Kind.BOUNDARY

    def test_invalid_image(self):
        prob = InversionProblem.from_text("(/ 1 x)", [(-1, 1)], [(0, 1)])
        assert classify(prob, PsiConfig(0.1), [(-1, 1)]).kind is Kind.BISECT
        assert classify(prob, PsiConfig(0.1), [(-0.01, 0.01)]).kind is Kind.BOUNDARY


class TestInvert:
    def test_trivial_accept(self):
        pv = invert(identity((0, 1), (0, 1)), PsiConfig(1e-3))
        assert pv.accepted == [Box([(0, 1)])]
        assert pv.rejected == [] and pv.boundary == []

    def test_identity_half(self):
        pv = invert(identity((0, 2), (0, 1)), PsiConfig(1e-3))
        vols = pv.volumes()
        assert vols["accepted"] == pytest.approx(1.0, abs=2e-3)
        assert vols["boundary"] <= 2e-3
        assert all(b.issubset(Box([(0.99, 1.01)])) for b in pv.boundary)
        assert pv.tiles_R()
        xs = np.linspace(0, 2, 10_001)
        codes = pv.membership(xs[:, None])
        inside = xs < 1 - 2e-3
        outside = xs > 1 + 2e-3
        assert np.all(codes[inside] & (ACCEPTED | BOUNDARY))
        assert np.all(codes[inside] & REJECTED == 0)
        assert np.all(codes[outside] & ACCEPTED == 0)

    def test_depth_first_order(self):
        pv = invert(identity((0, 4), (0, 1.5)), PsiConfig(0.5))
        assert pv.accepted == [Box([(0, 1)]), Box([(1, 1.5)])]
        assert pv.rejected == [Box([(1.5, 2)]), Box([(2, 4)])]
        assert pv.boundary == []

    def test_wavelet_membership(self):
        prob = InversionProblem.from_text(WAVELET, [(-2, 2)], [(-0.25, 0.5)])
        pv = invert(prob, PsiConfig.from_width(1e-3, 1))
        xs = np.linspace(-2, 2, 4001)
        ys = eval_array(prob.model.components[0], xs)
        codes = pv.membership(xs[:, None])
        inside = (ys > -0.25) & (ys < 0.5)
        outside = (ys < -0.25) | (ys > 0.5)
        assert np.all(codes[inside] & (ACCEPTED | BOUNDARY))
        assert np.all(codes[outside] & (REJECTED | BOUNDARY))
        assert not np.any(codes[outside] & ACCEPTED)
        assert not np.any(codes[inside] & REJECTED)

    def test_max_boxes(self):
        prob = identity((0, 2), (0, 1.3))
        with pytest.raises(PavingIncomplete) as info:
            invert(prob, PsiConfig(1e-6, max_boxes=10))
        err = info.value
        assert err.processed == 10
        assert err.paving.tiles_R()

    def test_box_count_bound(self):
        prob = InversionProblem.from_text(SYSTEM_2D, [(-5, 5), (-5, 5)], [(-5, 5), (-5, 5)])
        cfg = PsiConfig.from_width(0.2, 2)
        pv = invert(prob, cfg)
        n = len(pv.accepted) + len(pv.rejected) + len(pv.boundary)
        assert n <= volume(prob.R) / cfg.resolution * 4
        assert pv.tiles_R()


@pytest.fixture(scope="module")
def paving():
    prob = InversionProblem.from_text(SYSTEM_2D, [(-5, 5), (-5, 5)], [(-5, 5), (-5, 5)])
    return prob, invert(prob, PsiConfig.from_width(0.1, 2))


class TestSoundness:
    def _samples(self, box, n, rnd):
        return [[rnd.uniform(lo, hi) for lo, hi in box] for _ in range(n)]

    def test_accepted_inner(self, paving):
        prob, pv = paving
        rnd = random.Random(5)
        for b in rnd.sample(pv.accepted, min(30, len(pv.accepted))):
            for pt in self._samples(b, 1000, rnd):
                y = eval_scalar(prob.model, pt)
                assert y is not None and prob.P.contains_point(y)

    def test_rejected_outer(self, paving):
        prob, pv = paving
        rnd = random.Random(6)
        for b in rnd.sample(pv.rejected, min(30, len(pv.rejected))):
            for pt in self._samples(b, 1000, rnd):
                y = eval_scalar(prob.model, pt)
                assert y is None or not prob.P.contains_point(y)


class TestDecomposition:
    def test_columns_power_of_two(self):
        R = Box([(0, 4), (0, 1)])
        slabs = dyadic_columns(R, 4)
        assert len(slabs) == 4
        for i, s in enumerate(slabs):
            assert {b[0] for b in s} == {Interval(i, i + 1)}
            assert math.fsum(volume(b) for b in s) == 1.0

    def test_columns_odd(self):
        slabs = dyadic_columns(Box([(0, 4)]), 3)
        assert [len(s) for s in slabs] == [2, 1, 1]
        assert [b for s in slabs for b in s] == [Box([(i, i + 1)]) for i in range(4)]

    def test_workers_one_is_invert(self):
        prob = identity((0, 2), (0, 1))
        cfg = PsiConfig(1e-3)
        assert invert_decomposed(prob, cfg) == invert(prob, cfg)

    def test_identity_two_workers(self):
        prob = identity((0, 2), (0, 1))
        pv = invert_decomposed(prob, PsiConfig(1e-3, workers=2))
        assert pv.accepted[0] == Box([(0, 1)])
        assert pv.tiles_R()
        xs = np.linspace(0, 2, 2001)[:, None]
        assert np.array_equal(pv.membership(xs), invert(prob, PsiConfig(1e-3)).membership(xs))

    @pytest.mark.parametrize("workers", [2, 3])
    def test_2d_membership_matches(self, workers):
        prob = InversionProblem.from_text(SYSTEM_2D, [(-5, 5), (-5, 5)], [(-5, 5), (-5, 5)])
        cfg = PsiConfig.from_width(0.2, 2)
        g = np.linspace(-5, 5, 60)
        pts = np.array([(a, b) for a in g for b in g])
        one = invert(prob, cfg).membership(pts)
        many = invert_decomposed(prob, PsiConfig.from_width(0.2, 2, workers=workers)).membership(pts)
        assert np.array_equal(one, many)


class TestProblem:
    def test_arity_mismatch(self):
        with pytest.raises(ValueError, match="inputs"):
            InversionProblem(parse_model("(+ x y)", 2), Box([(0, 1)]), Box([(0, 1)]))
        with pytest.raises(ValueError, match="outputs"):
            InversionProblem.from_text("x", [(0, 1)], [(0, 1), (0, 1)])

    def test_zero_volume_R(self):
        with pytest.raises(ValueError):
            identity((1, 1), (0, 1))

    def test_config(self):
        with pytest.raises(ValueError):
            PsiConfig(0)
        with pytest.raises(ValueError):
            PsiConfig(1, workers=0)
        assert PsiConfig.from_width(0.05, 2).resolution == pytest.approx(0.0025)

    def test_box_from_spec(self):
        assert box_from_spec([-2, 2]) == Box([(-2, 2)])
        assert box_from_spec([[0, 1], [2, 3]]) == Box([(0, 1), (2, 3)])


def test_deterministic():
    prob = InversionProblem.from_text(WAVELET, [(-2, 2)], [(-0.25, 0.5)])
    cfg = PsiConfig.from_width(1e-3, 1)
    assert invert(prob, cfg).to_json() == invert(prob, cfg).to_json()
