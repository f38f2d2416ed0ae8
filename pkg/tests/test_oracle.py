import numpy as np
import pytest

import magprop as mp
from magprop.errors import AdjudicationError, ConvergenceError, ValidationError
from magprop.oracle import _sliced_quadratic_form


class TestSlicedForm:
    def test_shape_and_symmetry(self):
        for nsl in (2, 3, 7):
            shat, b, c0 = _sliced_quadratic_form(0.9, 1.1, np.array([0.3, -0.2]), nsl)
            assert shat.shape == (4 * nsl - 2, 4 * nsl - 2)
            assert b.shape == (4 * nsl - 2,)
            assert np.array_equal(shat, shat.T)
            assert isinstance(c0, float)

    def test_free_form_has_no_position_coupling(self):
        shat, b, c0 = _sliced_quadratic_form(1.0, 0.0, np.array([0.5, 0.5]), 4)
        # at k = 0 the x-x and x-p couplings vanish; only p-p and p-x chain terms remain
        assert c0 == 0.0
        for j in range(1, 4):
            xs = slice(4 * (j - 1) + 2, 4 * (j - 1) + 4)
            assert np.array_equal(shat[xs, xs], np.zeros((2, 2)))


class TestTimeSlicing:
    @pytest.mark.parametrize("nsl", [2, 3, 8, 64])
    def test_free_case_is_exact_per_slice(self, nsl):
        # for k = 0 every slice count reproduces the free kernel; only the
        # regularization limit is approximate
        q = mp.CPQuery(t=0.8, k=0.0, y1=0.3, y2=-0.4)
        got = mp.time_sliced_propagator(q, nsl)
        want = mp.propagator(q)
        assert abs(got - want) / abs(want) < 1e-8

    def test_magnetic_case_converges_to_closed_form(self):
        q = mp.CPQuery(t=0.7, k=1.0, y1=0.2, y2=0.1)
        got = mp.time_sliced_propagator(q, 256)
        want = mp.propagator(q)
        assert abs(got - want) / abs(want) < 1e-2

    def test_slice_count_reduces_error_first_order(self):
        # the broken-path integral converges like 1/N in the slice count
        q = mp.CPQuery(t=0.7, k=1.0, y1=0.2, y2=0.1)
        want = mp.propagator(q)
        errs = [
            abs(mp.time_sliced_propagator(q, nsl) - want) / abs(want)
            for nsl in (64, 256)
        ]
        assert errs[1] < 0.35 * errs[0]

    def test_input_validation(self):
        q = mp.CPQuery(t=0.5, k=1.0, y1=0.0, y2=0.0)
        with pytest.raises(ValidationError):
            mp.time_sliced_propagator(q, 1)
        with pytest.raises(ValidationError):
            mp.time_sliced_propagator(q, 2.5)
        with pytest.raises(ValidationError):
            mp.time_sliced_propagator(q, 8, eps0=0.0)
        with pytest.raises(ValidationError):
            mp.time_sliced_propagator(
                mp.CPQuery(t=0.5, k=1.0, y1=0.0, y2=0.0, y3=1.0), 8
            )

    def test_exhausted_levels_raise(self):
        q = mp.CPQuery(t=0.5, k=1.0, y1=0.0, y2=0.0)
        with pytest.raises(ConvergenceError):
            mp.time_sliced_propagator(q, 8, max_levels=1)


class TestPdeResidual:
    def test_winner_is_second_order(self):
        r_h = mp.pde_residual(mp.ADJUDICATED_VARIANT, 0.7, 1.0, 0.2, 0.1, 1e-3, 1e-3)
        r_h2 = mp.pde_residual(mp.ADJUDICATED_VARIANT, 0.7, 1.0, 0.2, 0.1, 5e-4, 5e-4)
        order = np.log2(r_h / r_h2)
        assert r_h < 1e-4
        assert 1.8 < order < 2.2

    @pytest.mark.parametrize(
        "variant",
        [v for v in mp.VARIANTS if v != mp.ADJUDICATED_VARIANT],
        ids=lambda v: v.label(),
    )
    def test_losers_keep_an_order_one_defect(self, variant):
        r_win = mp.pde_residual(mp.ADJUDICATED_VARIANT, 0.7, 1.0, 0.2, 0.1)
        r_lose = mp.pde_residual(variant, 0.7, 1.0, 0.2, 0.1)
        assert r_lose > 1e2 * r_win

    def test_stencil_validation(self):
        with pytest.raises(ValidationError, match="leaves the domain"):
            mp.pde_residual(mp.ADJUDICATED_VARIANT, 5e-4, 1.0, 0.0, 0.0, 1e-3, 1e-3)
        with pytest.raises(ValidationError, match="caustic"):
            mp.pde_residual(mp.ADJUDICATED_VARIANT, np.pi / 2 + 1e-3, 1.0, 0.0, 0.0, 1e-3, 1e-3)
        with pytest.raises(ValidationError):
            mp.pde_residual(mp.ADJUDICATED_VARIANT, 0.7, 1.0, 0.0, 0.0, -1e-3, 1e-3)


class TestShortTime:
    def test_winner_reproduces_the_bump(self):
        defect = mp.short_time_check(mp.ADJUDICATED_VARIANT, 1.0)
        assert defect < 1e-3

    def test_wrong_prefactor_misses_by_order_one(self):
        defect = mp.short_time_check(mp.KernelVariant("kt_over", "plus"), 1.0)
        assert defect > 0.5

    def test_wrong_phase_sign_misses_by_order_one(self):
        defect = mp.short_time_check(mp.KernelVariant("k_over", "minus"), 1.0)
        assert defect > 0.5

    def test_zero_amplitude(self):
        assert mp.short_time_check(mp.ADJUDICATED_VARIANT, 1.0, amplitude=0.0) == 0.0

    def test_amplitude_scales(self):
        d1 = mp.short_time_check(mp.ADJUDICATED_VARIANT, 0.5, amplitude=1.0)
        d3 = mp.short_time_check(mp.ADJUDICATED_VARIANT, 0.5, amplitude=3.0)
        assert d3 == pytest.approx(3 * d1, rel=1e-6, abs=1e-9)

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            mp.short_time_check(mp.ADJUDICATED_VARIANT, 1.0, sigma=0.0)
        with pytest.raises(ValidationError):
            mp.short_time_check(mp.ADJUDICATED_VARIANT, np.inf)
        with pytest.raises(ValidationError, match="too large"):
            mp.short_time_check(mp.ADJUDICATED_VARIANT, np.pi / 2 / 1e-2)


class TestAdjudication:
    def test_selects_the_packaged_variant(self):
        report = mp.adjudicate()
        assert report.selected == mp.ADJUDICATED_VARIANT
        assert report.convergence[-1][1] < 1e-2
        assert report.convergence[-1][1] < report.convergence[0][1]
        assert set(report.pde_residuals) == {v.label() for v in mp.VARIANTS}
        assert set(report.short_time_defect) == {v.label() for v in mp.VARIANTS}
        assert len(report.confidence_notes) == 3

    def test_deterministic(self):
        a = mp.adjudicate()
        b = mp.adjudicate()
        assert a.selected == b.selected
        assert a.slicing_value == b.slicing_value
        assert a.convergence == b.convergence

    def test_degenerate_field_free_case(self):
        report = mp.adjudicate(k=0.0)
        assert report.selected == mp.ADJUDICATED_VARIANT
        assert report.convergence == ()
        assert "continuity" in report.confidence_notes[0]

    def test_no_survivor_raises_with_scores(self):
        # two slices are far too coarse for the 1% slicing gate
        with pytest.raises(AdjudicationError, match="scores"):
            mp.adjudicate(slices=2)
