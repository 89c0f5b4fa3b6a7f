import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from blochrate import (
    LorentzianSpectrum,
    SystemParams,
    TabulatedSpectrum,
    build_report,
    eigenvalues,
    integrate_effective_bloch,
    lorentz_line,
    measured_oscillation_frequency,
    steady_state,
    thresholds,
    zeta_lorentzian,
    zeta_numeric,
    zeta_peaked,
)

rates = st.floats(min_value=1e-2, max_value=1e2,
                  allow_nan=False, allow_infinity=False)
nonneg = st.floats(min_value=0.0, max_value=1e2,
                   allow_nan=False, allow_infinity=False)


# ----------------------------------------------------------------------
# incoherence fraction

@pytest.mark.parametrize("delta,gamma_perp,expected", [
    (0.0, 0.5, 0.0),
    (1.0, 0.5, 0.5),       # symmetry point delta = 2*gamma_perp
    (5.0, 0.5, 5.0 / 6.0),
    (10.0, 0.5, 10.0 / 11.0),
])
def test_zeta_closed_form_values(delta, gamma_perp, expected):
    assert math.isclose(zeta_lorentzian(delta, gamma_perp), expected,
                        rel_tol=1e-15)


def test_zeta_quadrature_matches_closed_form():
    s = LorentzianSpectrum(peak=1.0, fwhm=10.0)
    assert abs(zeta_numeric(s, 0.5) - 10.0 / 11.0) <= 1e-6


def test_zeta_flat_spectrum_saturates():
    gp = 0.5
    x = np.linspace(-1000.0 * gp, 1000.0 * gp, 4001)
    flat = TabulatedSpectrum(omega=x, values=np.ones_like(x))
    assert abs(zeta_numeric(flat, gp) - 1.0) <= 1e-3


def test_zeta_narrow_lorentzian_limit():
    gp = 1.0
    delta = 1e-3 * gp
    s = LorentzianSpectrum(peak=1.0, fwhm=delta)
    approx = delta / (2.0 * gp)
    assert abs(zeta_numeric(s, gp) - approx) / approx <= 1e-3


@given(log_ratio=st.floats(min_value=-3.0, max_value=3.0),
       gamma_perp=rates)
@settings(max_examples=30, deadline=None)
def test_zeta_quadrature_consistency_sweep(log_ratio, gamma_perp):
    delta = gamma_perp * 10.0 ** log_ratio
    s = LorentzianSpectrum(peak=2.0, fwhm=delta)
    assert abs(zeta_numeric(s, gamma_perp)
               - zeta_lorentzian(delta, gamma_perp)) <= 1e-6


def test_zeta_peaked_delta_spectrum_limit():
    gp = 1.0
    delta = 1e-3 * gp
    u = math.pi * delta * 1.0 / 2.0          # area of the narrow Lorentzian
    z = zeta_peaked(u, w21=1.0, gamma_perp=gp, center=0.0)
    assert abs(z - zeta_lorentzian(delta, gp)) / z <= 1e-3


def test_zeta_peaked_detuning_halves_at_one_linewidth():
    z0 = zeta_peaked(1.0, w21=1.0, gamma_perp=2.0, center=0.0)
    z1 = zeta_peaked(1.0, w21=1.0, gamma_perp=2.0, center=2.0)
    assert math.isclose(z1, 0.5 * z0, rel_tol=1e-15)
    assert zeta_peaked(0.0, w21=1.0, gamma_perp=2.0, center=0.0) == 0.0


def test_lorentz_line_normalization():
    assert math.isclose(lorentz_line(0.0), 1.0 / math.pi, rel_tol=1e-15)
    assert math.isclose(lorentz_line(1.0), 1.0 / (2.0 * math.pi),
                        rel_tol=1e-15)


# ----------------------------------------------------------------------
# fixed point and eigenmodes

def test_steady_state_values():
    assert steady_state(SystemParams(a=1.0, delta=5.0, omega0=0.0)) == -1.0
    p = SystemParams(a=1.0, delta=10.0, omega0=math.sqrt(22.0))  # zeta*bw21 = 2
    assert math.isclose(steady_state(p), -0.2, rel_tol=1e-14)
    p2 = SystemParams(a=1.0, delta=5.0, omega0=math.sqrt(11.0))
    assert math.isclose(steady_state(p2), -3.0 / 14.0, rel_tol=1e-14)


def test_steady_state_agrees_with_long_integration():
    p = SystemParams(a=1.0, delta=5.0, omega0=math.sqrt(11.0))
    trace = integrate_effective_bloch(p, 50.0, 1e-3)
    assert abs(trace.n[-1] - steady_state(p)) <= 1e-6


def test_eigenvalues_decoupled_limit():
    p = SystemParams(a=1.0, delta=10.0, omega0=0.0)
    m = eigenvalues(p)
    assert math.isclose(m.lam_plus.real, -1.0, rel_tol=1e-12)
    assert math.isclose(m.lam_minus.real, -p.gamma_eff, rel_tol=1e-12)
    assert not m.oscillatory


def test_eigenvalues_oscillatory_case():
    m = eigenvalues(SystemParams(a=1.0, delta=1.0, omega0=6.0))
    assert math.isclose(m.discriminant, -144.0, rel_tol=1e-12)
    assert math.isclose(m.frequency, 6.0, rel_tol=1e-12)
    assert m.oscillatory
    assert m.lam_plus == m.lam_minus.conjugate()


def test_eigenvalues_strong_incoherence_split():
    p = SystemParams(a=1.0, delta=1e3, omega0=1.0)
    m = eigenvalues(p)
    slow = -(p.a + 2.0 * p.zeta_bw21)
    assert abs(m.lam_plus.real - slow) / abs(slow) <= 1e-2
    assert abs(m.lam_minus.real + p.gamma_eff) / p.gamma_eff <= 1e-2


@given(a=rates, delta=nonneg, omega0=nonneg, gamma_dc=nonneg)
@settings(max_examples=200)
def test_trace_and_determinant_identities(a, delta, omega0, gamma_dc):
    p = SystemParams(a=a, delta=delta, omega0=omega0, gamma_dc=gamma_dc)
    m = eigenvalues(p)
    tr = m.lam_plus + m.lam_minus
    det = m.lam_plus * m.lam_minus
    scale = p.gamma_eff + p.a
    assert abs(tr - (-scale)) <= 1e-12 * scale
    want = p.gamma_eff * (p.a + 2.0 * p.zeta_bw21)
    # reconstructing det from the roots cancels near-degenerate digits, so
    # the honest scale is eps*trace^2, not eps*det
    assert abs(det - want) <= 1e-13 * max(want, scale * scale, 1.0)
    assert m.lam_plus.real < 0 and m.lam_minus.real < 0


@given(a=rates, delta=nonneg, omega0=nonneg, gamma_dc=nonneg)
@settings(max_examples=200)
def test_oscillation_flag_equivalences(a, delta, omega0, gamma_dc):
    p = SystemParams(a=a, delta=delta, omega0=omega0, gamma_dc=gamma_dc)
    m = eigenvalues(p)
    fl = thresholds(p)
    assert m.oscillatory == (m.discriminant < 0)
    assert m.oscillatory == (m.lam_plus.imag != 0)
    assert fl.oscillation == m.oscillatory


@given(a=rates, spread=st.floats(min_value=5.0, max_value=100.0),
       pump=st.floats(min_value=2.0, max_value=50.0),
       split=st.floats(min_value=0.1, max_value=1.0))
@settings(max_examples=200)
def test_deep_oscillations_are_underdamped(a, spread, pump, split):
    # linewidth plus dephasing at least 5x the decay, pump at least twice
    # the oscillation threshold: there the damping cannot exceed twice the
    # ring frequency
    total = spread * a
    delta = total * split
    gamma_dc = 0.5 * (total - delta)
    bound = (delta + 2.0 * gamma_dc - a) ** 2 / (16.0 * delta)
    omega0 = math.sqrt(pump * bound * delta)
    p = SystemParams(a=a, delta=delta, omega0=omega0, gamma_dc=gamma_dc)
    m = eigenvalues(p)
    assume(m.oscillatory)
    damping = -m.lam_plus.real
    assert damping <= 2.0 * m.frequency * (1.0 + 1e-9)


# ----------------------------------------------------------------------
# regime flags

def test_flags_quiet_regime():
    fl = thresholds(SystemParams(a=1.0, delta=10.0, omega0=2.0))
    assert not fl.oscillation
    assert fl.rate_eq_valid
    assert math.isclose(fl.oscillation_bound, 81.0 / 160.0, rel_tol=1e-15)


def test_flags_oscillatory_regime():
    fl = thresholds(SystemParams(a=1.0, delta=1.0, omega0=6.0))
    assert fl.oscillation
    assert not fl.rate_eq_valid
    assert not fl.ere_regime


def test_oscillation_bound_light_incoherence_limit():
    p = SystemParams(a=1.0, delta=1e6, omega0=1.0)
    fl = thresholds(p)
    assert math.isclose(fl.oscillation_bound, p.delta / 16.0, rel_tol=1e-5)


def test_flags_coherent_limit():
    fl = thresholds(SystemParams(a=1.0, delta=0.0, omega0=2.0))
    assert fl.coherent_limit
    assert math.isnan(fl.oscillation_bound)
    assert not fl.rate_eq_valid
    # the mode pair still classifies plain Rabi flopping as oscillatory
    assert fl.oscillation


@given(a=rates, delta=nonneg, omega0=nonneg, gamma_dc=nonneg)
@settings(max_examples=200)
def test_ere_regime_implies_rate_regime(a, delta, omega0, gamma_dc):
    fl = thresholds(SystemParams(a=a, delta=delta, omega0=omega0,
                                 gamma_dc=gamma_dc))
    if fl.ere_regime:
        assert fl.rate_eq_valid
    if fl.rate_eq_valid:
        assert not fl.oscillation


# ----------------------------------------------------------------------
# oscillation frequency extraction and reporting

def test_measured_frequency_damped_cosine():
    t = np.linspace(0.0, 5.0, 5001)
    x = np.exp(-t) * np.cos(6.0 * t)
    f = measured_oscillation_frequency(t, x)
    assert abs(f - 6.0) / 6.0 <= 1e-3


def test_measured_frequency_needs_repeated_peaks():
    t = np.linspace(0.0, 5.0, 5001)
    assert math.isnan(measured_oscillation_frequency(t, np.exp(-t)))


def test_report_fields_and_ranges():
    p = SystemParams(a=1.0, delta=1.0, omega0=6.0)
    r = build_report(p)
    assert math.isclose(r.zeta, 0.5, rel_tol=1e-15)
    assert math.isclose(r.frequency, 6.0, rel_tol=1e-12)
    assert r.oscillation and not r.rate_eq_valid
    text = r.to_text()
    assert "n_infinity" in text and "lam_plus" in text
    header = r.csv_header().split(",")
    row = r.csv_row().split(",")
    assert len(header) == len(row)


def test_report_coherent_limit_marks_undefined_quantities():
    r = build_report(SystemParams(a=1.0, delta=0.0, omega0=2.0))
    assert r.coherent_limit
    assert math.isnan(r.bw21)
    assert math.isnan(r.oscillation_bound)


@given(a=rates, delta=nonneg, omega0=nonneg, gamma_dc=nonneg)
@settings(max_examples=200)
def test_report_steady_state_range(a, delta, omega0, gamma_dc):
    r = build_report(SystemParams(a=a, delta=delta, omega0=omega0,
                                  gamma_dc=gamma_dc))
    assert -1.0 <= r.n_infinity < 0.0
    if omega0 == 0.0:
        assert r.n_infinity == -1.0
