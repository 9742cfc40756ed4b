import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiwave.schedules import KINDS, NoiseSchedule, build_schedule

RHO = 7.0


class TestBuildSchedule:
    def test_single_step_degenerates(self):
        s = build_schedule("karras_rho7", 1, 0.1, 10.0)
        np.testing.assert_allclose(s.sigmas, [10.0, 0.0])

    def test_linear_example(self):
        s = build_schedule("linear_sigma", 4, 0.1, 10.0)
        np.testing.assert_allclose(s.sigmas, [10.0, 6.7, 3.4, 0.1, 0.0], atol=1e-12)

    def test_karras_matches_power_interpolation(self):
        # independent evaluation of the rho=7 rule at interior points
        n, lo, hi = 10, 0.05, 20.0
        s = build_schedule("karras_rho7", n, lo, hi)
        for i in (0, 3, 7, 9):
            t = i / (n - 1)
            expected = (hi ** (1 / RHO) + t * (lo ** (1 / RHO) - hi ** (1 / RHO))) ** RHO
            assert s.sigmas[i] == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    @given(n=st.integers(1, 300), lo=st.floats(1e-4, 0.9), span=st.floats(1.1, 1e4))
    @settings(max_examples=40, deadline=None)
    def test_monotone_and_endpoints(self, kind, n, lo, span):
        s = build_schedule(kind, n, lo, lo * span)
        assert (np.diff(s.sigmas) < 0).all()
        assert s.sigmas[-1] == 0.0
        assert s.sigma_max == pytest.approx(lo * span)
        assert s.step_count == n

    @pytest.mark.parametrize("kind", KINDS)
    def test_doubling_refines_within_hull(self, kind):
        coarse = build_schedule(kind, 25, 0.01, 10.0)
        fine = build_schedule(kind, 50, 0.01, 10.0)
        assert fine.sigmas.min() <= coarse.sigmas.min()
        assert fine.sigmas.max() >= coarse.sigmas.max()
        assert ((coarse.sigmas >= fine.sigmas.min()) & (coarse.sigmas <= fine.sigmas.max())).all()

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            build_schedule("karras_rho7", 10, 1.0, 0.5)
        with pytest.raises(ValueError):
            build_schedule("karras_rho7", 10, 0.0, 1.0)
        with pytest.raises(ValueError):
            build_schedule("karras_rho7", 0, 0.1, 1.0)
        with pytest.raises(ValueError, match="unknown schedule"):
            build_schedule("cosine", 10, 0.1, 1.0)


class TestNoiseSchedule:
    def test_terminal_zero_required(self):
        with pytest.raises(ValueError, match="terminal"):
            NoiseSchedule(np.array([10.0, 1.0, 0.5]))

    def test_strictly_decreasing_required(self):
        with pytest.raises(ValueError, match="strictly decreasing"):
            NoiseSchedule(np.array([10.0, 10.0, 0.0]))

    def test_sigma_min_is_last_positive_level(self):
        s = build_schedule("karras_rho7", 5, 0.2, 8.0)
        assert s.sigma_min == pytest.approx(0.2)

    def test_degenerate_grid_allowed_directly(self):
        s = NoiseSchedule(np.array([0.0]))
        assert s.step_count == 0
