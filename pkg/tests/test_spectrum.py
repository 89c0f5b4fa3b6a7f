import math

import numpy as np
import pytest

from blochrate import (
    LorentzianSpectrum,
    SpectrumSupportError,
    TabulatedSpectrum,
    autocorrelation_kernel,
    bw21_of,
    energy_density,
    from_phase_diffusion,
    fwhm_of,
    load_tabulated,
    simulate_phases,
    spectral_density,
    spectrum_from_autocorrelation,
    spectrum_from_kernel,
    width_hint,
    wk_estimate,
)


def lorentz_table(lor, edge, core_halfwidth=50.0, dx=0.01, ratio=1.005):
    """Tabulate a Lorentzian on a linear core plus geometric tails.

    Plain wide-span grids put the whole tail into a handful of chords and
    the tau=0 kernel mass picks up their convexity bias; a ratio-capped
    tail keeps every chord close to the curve.
    """
    core = np.arange(-core_halfwidth, core_halfwidth + dx / 2, dx)
    n_tail = int(math.ceil(math.log(edge / core_halfwidth) / math.log(ratio)))
    tail = core_halfwidth * ratio ** np.arange(1, n_tail + 1)
    x = np.concatenate([-tail[::-1], core, tail]) + lor.center
    return TabulatedSpectrum(omega=x, values=spectral_density(lor, x))


# ----------------------------------------------------------------------
# models and closed forms

def test_lorentzian_density_closed_form():
    s = LorentzianSpectrum(peak=3.0, fwhm=2.0, center=1.0)
    assert spectral_density(s, 1.0) == 3.0
    # half maximum at center +- fwhm/2
    assert math.isclose(spectral_density(s, 2.0), 1.5, rel_tol=1e-15)
    assert math.isclose(spectral_density(s, 0.0), 1.5, rel_tol=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(peak=0.0, fwhm=1.0),
    dict(peak=-1.0, fwhm=1.0),
    dict(peak=1.0, fwhm=0.0),
    dict(peak=1.0, fwhm=-2.0),
    dict(peak=math.nan, fwhm=1.0),
    dict(peak=1.0, fwhm=1.0, center=math.inf),
])
def test_bad_lorentzian_rejected(kwargs):
    with pytest.raises(ValueError):
        LorentzianSpectrum(**kwargs)


def test_phase_diffusion_spectrum_has_pinned_peak():
    s = from_phase_diffusion(omega0=2.0, delta=5.0)
    assert s.fwhm == 5.0
    assert math.isclose(s.peak, 4.0 / 5.0, rel_tol=1e-15)
    # b rescales the stored density, not the physical product b*W
    s2 = from_phase_diffusion(omega0=2.0, delta=5.0, b=4.0)
    assert math.isclose(4.0 * s2.peak, 4.0 / 5.0, rel_tol=1e-15)
    with pytest.raises(ValueError):
        from_phase_diffusion(omega0=2.0, delta=0.0)


def test_bw21_of_matches_construction():
    s = from_phase_diffusion(omega0=2.0, delta=5.0, b=3.0)
    assert math.isclose(bw21_of(s, b=3.0), 4.0 / 5.0, rel_tol=1e-15)


def test_tabulated_requires_sane_table(tmp_path):
    with pytest.raises(ValueError):
        TabulatedSpectrum(omega=np.array([0.0, 1.0, 0.5]),
                          values=np.array([1.0, 2.0, 1.0]))
    with pytest.raises(ValueError):
        TabulatedSpectrum(omega=np.array([0.0, 1.0]),
                          values=np.array([1.0, -0.5]))
    bad = tmp_path / "one_col.dat"
    bad.write_text("1.0\n2.0\n")
    with pytest.raises(ValueError):
        load_tabulated(bad)


def test_load_tabulated_roundtrip(tmp_path):
    path = tmp_path / "spec.dat"
    path.write_text("# omega value\n-1.0 0.5\n0.0 2.0\n\n1.0 0.5\n")
    s = load_tabulated(path)
    assert s.center == 0.0
    assert spectral_density(s, 0.5) == 1.25
    # off-table queries read zero density
    assert spectral_density(s, 5.0) == 0.0
    with pytest.raises(SpectrumSupportError):
        bw21_of(s, omega21=5.0)


def test_energy_density_lorentzian_and_table():
    lor = LorentzianSpectrum(peak=1.0, fwhm=2.0)
    assert math.isclose(energy_density(lor), math.pi, rel_tol=1e-15)
    # truncation at +-500*fwhm keeps the missing tail mass under 0.1%
    x = np.linspace(-1000.0, 1000.0, 200001)
    tab = TabulatedSpectrum(omega=x, values=spectral_density(lor, x))
    assert abs(energy_density(tab) - math.pi) / math.pi <= 1e-3


def test_fwhm_of_gaussian_samples():
    x = np.linspace(-5.0, 5.0, 2001)
    y = np.exp(-0.5 * x ** 2)
    assert math.isclose(fwhm_of(x, y), 2.0 * math.sqrt(2.0 * math.log(2.0)),
                        rel_tol=1e-4)
    assert math.isnan(fwhm_of(x, np.ones_like(x)))


def test_width_hint_scales():
    assert width_hint(LorentzianSpectrum(peak=1.0, fwhm=6.0)) == 3.0


# ----------------------------------------------------------------------
# autocorrelation kernel

def test_kernel_closed_form_at_origin_and_tail():
    s = LorentzianSpectrum(peak=2.0, fwhm=3.0)
    k = autocorrelation_kernel(s, np.array([0.0, 100.0 / 3.0]))
    assert math.isclose(k[0], 3.0, rel_tol=1e-15)      # fwhm*peak/2
    assert abs(k[1]) < 1e-15


def test_kernel_oscillates_when_detuned():
    s = LorentzianSpectrum(peak=1.0, fwhm=2.0, center=4.0)
    tau = np.linspace(0.0, 5.0, 501)
    k = autocorrelation_kernel(s, tau, omega21=0.0)
    ref = 1.0 * np.exp(-np.abs(tau)) * np.cos(4.0 * tau)
    assert np.max(np.abs(k - ref)) < 1e-12


def test_tabulated_kernel_matches_closed_form():
    lor = LorentzianSpectrum(peak=1.0, fwhm=2.0)
    tab = lorentz_table(lor, edge=2e5)
    tau = np.linspace(0.0, 10.0, 401)
    err = autocorrelation_kernel(tab, tau) - autocorrelation_kernel(lor, tau)
    assert np.max(np.abs(err)) <= 1e-5


def test_kernel_refuses_undecayed_table():
    x = np.linspace(-5.0, 5.0, 101)
    tab = TabulatedSpectrum(omega=x, values=np.ones_like(x))
    with pytest.raises(SpectrumSupportError):
        autocorrelation_kernel(tab, np.linspace(0.0, 1.0, 11))


def test_kernel_to_spectrum_roundtrip():
    lor = LorentzianSpectrum(peak=1.0, fwhm=2.0)
    tau = np.arange(0.0, 25.0 + 1e-12, 5e-4)
    ker = autocorrelation_kernel(lor, tau)
    omega = np.linspace(-10.0, 10.0, 201)
    rec = spectrum_from_kernel(ker, tau, omega)
    truth = spectral_density(lor, omega)
    assert np.max(np.abs(rec - truth) / truth) <= 1e-5


# ----------------------------------------------------------------------
# spectral estimation from phase trajectories

def test_transform_of_exact_autocorrelation():
    # analytic e^{-delta tau/2} in, Lorentzian of the right height out
    delta, omega0 = 2.0, 2.0
    tau = np.arange(0.0, 20.0 + 1e-12, 1e-3)
    g = np.exp(-0.5 * delta * tau)
    omega = np.linspace(-8.0, 8.0, 161)
    vals = spectrum_from_autocorrelation(g, tau, omega, omega0)
    truth = spectral_density(from_phase_diffusion(omega0, delta), omega)
    assert np.max(np.abs(vals - truth) / truth.max()) <= 1e-6


def test_wk_estimate_statistics_and_window():
    t, phi = simulate_phases(2.0, 512, 30.0, 0.01, seed=6)
    omega = np.linspace(-6.0, 6.0, 121)
    est = wk_estimate(phi, 0.01, 2.0, omega, max_lag=12.0)
    assert est.window == pytest.approx(12.0)
    assert est.n_batches == 16
    assert est.stderr.shape == est.values.shape
    assert np.all(est.stderr > 0)
    assert not est.bias_warning
    # estimate is non-negative up to statistical noise
    assert np.all(est.values + 3.0 * est.stderr >= 0.0)
    truth = spectral_density(from_phase_diffusion(2.0, 2.0), omega)
    ipk = int(np.argmax(truth))
    assert abs(est.values[ipk] - truth[ipk]) <= 4.0 * est.stderr[ipk]


def test_wk_estimate_flags_truncated_window():
    # the coherence barely decays over the trajectory: leakage is real
    t, phi = simulate_phases(0.2, 64, 5.0, 0.01, seed=6)
    est = wk_estimate(phi, 0.01, 1.0, np.array([0.0]))
    assert est.bias_warning
    assert est.truncation_estimate > 0.1


def test_wk_estimate_stderr_scales_inverse_sqrt_n():
    t, phi = simulate_phases(2.0, 2048, 30.0, 0.01, seed=77)
    grid = np.array([0.0])
    full = wk_estimate(phi, 0.01, 2.0, grid, max_lag=12.0).stderr[0]
    subs = [wk_estimate(phi[512 * k:512 * (k + 1)], 0.01, 2.0, grid,
                        max_lag=12.0).stderr[0] for k in range(4)]
    pooled = math.sqrt(float(np.mean(np.square(subs))))
    # quartering the ensemble should double the error, within a factor 1.5
    assert 2.0 / 1.5 <= pooled / full <= 2.0 * 1.5


@pytest.mark.parametrize("bad", [
    dict(phi=np.zeros((1, 50)), dt=0.01),
    dict(phi=np.zeros((4, 1)), dt=0.01),
    dict(phi=np.zeros((4, 50)), dt=0.0),
    dict(phi=np.zeros((4, 50)), dt=0.01, max_lag=1e-6),
])
def test_wk_estimate_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        wk_estimate(bad["phi"], bad["dt"], 1.0, np.array([0.0]),
                    max_lag=bad.get("max_lag"))
