import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ericksen_lab import frequency as fq
from ericksen_lab.cone import ConeParams
from ericksen_lab.grid import LineFieldState, box_domain

ORIGIN = (0.0, 0.0, 0.0)


def _constant(dims=(17, 17, 17), h=1.0 / 16.0, c=(0.2, 0.5, -0.1)):
    dom = box_domain(dims, h, (-0.5, -0.5, -0.5))
    return LineFieldState(dom, np.broadcast_to(np.asarray(c), dom.dims + (3,)).copy(), ConeParams())


def test_constant_field_has_zero_energy_and_frequency():
    D, E, H, N = fq.frequency_quantities(_constant(), ORIGIN, 0.3)
    assert D == pytest.approx(0.0, abs=1e-14)
    assert N == pytest.approx(0.0, abs=1e-14)
    # H = |u|^2 times the sphere area, up to quadrature
    u2 = 4.0 * (0.2 ** 2 + 0.5 ** 2 + 0.1 ** 2)
    assert H == pytest.approx(u2 * 4.0 * np.pi * 0.09, rel=1e-3)


def test_homogeneous_lift_has_constant_frequency(lift32):
    prof = fq.frequency_profile(lift32, ORIGIN, [0.125, 0.2, 0.3, 0.4])
    assert len(prof.radii) == 4 and not prof.dropped
    assert np.ptp(prof.N) <= 0.03
    assert np.all(np.abs(prof.N - 0.25) <= 0.03)


def test_lift_renormalised_energy_nondecreasing(lift32):
    prof = fq.frequency_profile(lift32, ORIGIN, np.linspace(0.125, 0.4, 6))
    assert np.all(np.diff(prof.E) >= -1e-3 * prof.E[:-1])


def test_radii_clamped_and_reported(lift32):
    h = lift32.domain.h
    prof = fq.frequency_profile(lift32, ORIGIN, [h, 0.2, 0.49])
    assert list(prof.radii) == [0.2]
    assert sorted(r for r, _ in prof.dropped) == [h, 0.49]
    unclamped = fq.frequency_profile(lift32, ORIGIN, [2 * h], clamp=False)
    assert len(unclamped.radii) == 1


def test_ball_outside_domain_rejected(lift32):
    with pytest.raises(fq.DomainError):
        fq.frequency_quantities(lift32, (0.3, 0.0, 0.0), 0.3)


def test_zero_field_frequency_undefined():
    z = _constant(c=(0.0, 0.0, 0.0))
    with pytest.raises(fq.FrequencyUndefinedError):
        fq.frequency_quantities(z, ORIGIN, 0.25)
    prof = fq.frequency_profile(z, ORIGIN, [0.25, 0.3])
    assert len(prof.radii) == 0 and len(prof.dropped) == 2


def _profile(N):
    r = np.linspace(0.1, 0.4, len(N))
    N = np.asarray(N, dtype=float)
    return fq.FrequencyProfile(np.zeros(3), r, N, N, np.ones_like(N), N)


def test_monotone_check_on_synthetic_profiles():
    assert fq.check_frequency_monotone(_profile([0.25] * 5), slack=0.0).passed
    rep = fq.check_frequency_monotone(_profile([0.5, 0.4, 0.3]), slack=0.0)
    assert not rep.passed
    assert [(v[2], v[3]) for v in rep.violations] == [(0.5, 0.4), (0.4, 0.3)]
    assert fq.check_frequency_monotone(_profile([0.5, 0.47]), slack=0.05).passed
    with pytest.raises(ValueError):
        fq.check_frequency_monotone(_profile([0.5]))


def test_doubling_constant_field_ratio_four():
    rep = fq.check_doubling(_constant(), ORIGIN, 0.15, 0.3)
    assert rep.passed
    assert rep.H_R / rep.H_r == pytest.approx(4.0, rel=1e-3)


def test_doubling_homogeneous_lift(lift32):
    rep = fq.check_doubling(lift32, ORIGIN, 0.2, 0.4)
    assert rep.passed
    assert rep.H_R / rep.H_r == pytest.approx(2 ** 2.5, rel=0.03)
    with pytest.raises(ValueError):
        fq.check_doubling(lift32, ORIGIN, 0.3, 0.2)


def test_blowup_normalisation_at_h_1_64(lift64):
    up = fq.blowup_rescale(lift64, ORIGIN, 0.2, n=129)
    assert up.domain.h == pytest.approx(1.0 / 64.0)
    assert fq.ball_mean_u2(up, ORIGIN, 1.0) == pytest.approx(1.0, abs=1e-2)


def test_blowup_unit_normalisation_is_resampling():
    c = np.array([0.5, 0.0, 0.0])  # |u|^2 = k |w|^2 = 1
    st = _constant(dims=(33, 33, 33), h=1.0 / 32.0, c=c)
    up = fq.blowup_rescale(st, ORIGIN, 0.25, n=17)
    np.testing.assert_allclose(up.values[up.domain.active], np.broadcast_to(c, (int(up.domain.active.sum()), 3)),
                               atol=1e-12)


def test_blowups_of_homogeneous_field_agree_across_radii(lift64):
    base = fq.homogeneity_defect(lift64, ORIGIN, [0.1, 0.2], n=33)
    assert base <= 0.06
    x = lift64.domain.coords
    bump = np.exp(-np.sum((x - [0.1, 0.0, 0.0]) ** 2, axis=-1) / 0.003)[..., None] * [0.0, 0.0, 0.3]
    bumped = lift64.with_values(lift64.values + bump)
    assert fq.homogeneity_defect(bumped, ORIGIN, [0.1, 0.2], n=33) > 1.5 * base


def test_frequency_scaling_covariance(lift64):
    up = fq.blowup_rescale(lift64, ORIGIN, 0.4, n=65)
    n_up = fq.frequency_quantities(up, ORIGIN, 0.5)[3]
    n_orig = fq.frequency_quantities(lift64, ORIGIN, 0.2)[3]
    assert n_up == pytest.approx(n_orig, abs=0.03)


def test_degenerate_blowup():
    dom = box_domain((17, 17, 17), 1.0 / 16.0, (-0.5, -0.5, -0.5))
    v = np.zeros(dom.dims + (3,))
    v[np.linalg.norm(dom.coords, axis=-1) > 0.45] = [1.0, 0.0, 0.0]
    with pytest.raises(fq.DegenerateBlowupError):
        fq.blowup_rescale(LineFieldState(dom, v), ORIGIN, 0.2, n=9)


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.01, 100.0), flip=st.booleans(), r=st.sampled_from([0.15, 0.25, 0.35]))
def test_frequency_scale_and_sign_invariance(lift32, lam, flip, r):
    ref = fq.frequency_quantities(lift32, ORIGIN, r)[3]
    vals = lam * lift32.values * (-1.0 if flip else 1.0)
    got = fq.frequency_quantities(lift32.with_values(vals), ORIGIN, r)[3]
    assert got == pytest.approx(ref, rel=1e-12)
