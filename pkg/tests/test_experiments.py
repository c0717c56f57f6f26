import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cavityspin.dynamics import DispersiveModel, EnsembleState
from cavityspin.experiments import (CONTRAST_FLOOR, Evolve, PhaseScan, PulseSequence, Record,
                                    Rotate, TimeTrace, burst_delay, crossing_time,
                                    default_phase_grid, default_tau_grid, fit_s21,
                                    noise_std_for_snr, oat_rate_scan, parallel_map, ramsey_scan,
                                    run_oat, run_ramsey, run_sequence, run_superradiance,
                                    s21_model, synthetic_s21, wrap_phase)
from cavityspin.fitting import fit_sech2_burst
from cavityspin.lineshape import Lineshape, OffsetSet, free_dephasing_coherence
from cavityspin.params import PhysicalParams, derive_rates

SR = PhysicalParams(g=1e-3, kappa=660e3, n0=1e12)
OAT = PhysicalParams.from_collective(150e3, 660e3, 22e6, gamma_2=0.0)
# kappa << delta leaves the exchange term alone, so closed forms apply exactly
UNITARY = PhysicalParams.from_collective(150e3, 1.0, 22e6, gamma_2=0.0)


# ---- sequences and traces ---------------------------------------------------

def test_sequence_validation():
    with pytest.raises(ValueError):
        PulseSequence((Rotate(0, 1.0),))
    with pytest.raises(TypeError):
        PulseSequence(("pulse", Record()))
    with pytest.raises(ValueError):
        Evolve(-1.0)
    seq = PulseSequence.hahn_echo(1.0, 1e-4, readout_phase=0.3)
    assert seq.duration == pytest.approx(1e-4)
    assert isinstance(seq.steps[-2], Rotate)


def test_trace_validation():
    with pytest.raises(ValueError):
        TimeTrace([0, 0], [1, 1], "x")
    with pytest.raises(ValueError):
        TimeTrace([0, 1], [1, math.inf], "x")
    names, units, data = TimeTrace([0, 1], [2, 3], "c", columns={"z": ([4, 5], "1")}).table()
    assert names == ["time", "c", "z"] and units == ["s", "1", "1"] and data.shape == (2, 3)


def test_phase_scan_validation():
    with pytest.raises(ValueError):
        PhaseScan(np.linspace(0, 6, 6), np.zeros(6), 0, 0, 0, 0, 1)
    with pytest.raises(ValueError):
        PhaseScan(np.linspace(0, 1, 10), np.zeros(10), 0, 0, 0, 0, 1)
    g = default_phase_grid()
    assert g.size == 16 and np.ptp(g) == pytest.approx(2 * math.pi * 15 / 16)


def test_run_sequence_ramsey_records():
    e = EnsembleState.polarized(OffsetSet(np.zeros(3)))
    _, rec = run_sequence(DispersiveModel(0.0), e, PulseSequence.ramsey(1e-4))
    assert rec[0][1]["coherence"] == pytest.approx(1.0)
    with pytest.raises(TypeError):
        run_sequence(DispersiveModel(0.0), "x", PulseSequence.ramsey(1e-4))


def test_parallel_map_order():
    assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]


def test_wrap_phase():
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


# ---- superradiance ----------------------------------------------------------

def test_superradiance_equator_peaks_at_start():
    r = derive_rates(SR)
    tr = run_superradiance(SR, math.pi / 2, 10 * 4 / (2 * math.pi * r.gamma_c))
    assert int(np.argmax(tr.values)) == 0
    assert np.all(np.diff(tr.values) <= 0)
    assert tr.unit == "1/s"
    assert tr.metadata["theta"] == math.pi / 2


def test_superradiance_three_quarter_delay():
    r = derive_rates(SR)
    td = burst_delay(r.gamma_c, 3 * math.pi / 4)
    assert 2 * math.pi * r.gamma_c * td == pytest.approx(3.525, abs=1e-3)
    tr = run_superradiance(SR, 3 * math.pi / 4, td + 10 * 4 / (2 * math.pi * r.gamma_c),
                           n_points=4001, self_decay=False)
    k = int(np.argmax(tr.values))
    assert abs(tr.times[k] - td) <= tr.times[1]
    assert td == pytest.approx(oracles.burst_delay(r.gamma_c, 3 * math.pi / 4), rel=1e-14)


def test_superradiance_sech2_fit_pi_over_6():
    r = derive_rates(SR)
    tr = run_superradiance(SR, math.pi / 6, 10 * 4 / (2 * math.pi * r.gamma_c))
    fit = fit_sech2_burst(tr, n0=SR.n0)
    assert fit["gamma_c"] == pytest.approx(r.gamma_c, rel=0.01)


def test_superradiance_guards():
    with pytest.raises(ValueError, match="epsilon"):
        run_superradiance(SR, math.pi, 1e-5)
    with pytest.raises(ValueError):
        run_superradiance(SR, 0.0, 1e-5)
    with pytest.raises(ValueError):
        run_superradiance(SR, 1.0, -1.0)
    with pytest.warns(RuntimeWarning, match="resonant"):
        run_superradiance(SR.replace(delta=1e6), 1.0, 1e-6, n_points=5)
    with pytest.warns(RuntimeWarning, match="small"):
        run_superradiance(SR.replace(n0=1.0, g=1e3), 1.0, 1e-6, n_points=5)


# ---- OAT --------------------------------------------------------------------

@pytest.mark.parametrize("theta", [math.pi / 4, 3 * math.pi / 4])
def test_oat_uniform_matches_closed_form(theta):
    scan = run_oat(UNITARY, theta, 100e-6, n_groups=100)
    expect = oracles.oat_phase(derive_rates(UNITARY).chi_n, 100e-6, theta)
    assert scan.delta_phi == pytest.approx(expect, rel=1e-6)
    assert scan.direct_delta_phi == pytest.approx(expect, rel=1e-6)
    assert scan.contrast == pytest.approx(math.sin(theta), rel=1e-6)
    assert np.all((scan.p_up >= 0) & (scan.p_up <= 1))


def test_oat_reference_rate_example():
    p = UNITARY.with_chi_n(1100.0)
    scan = run_oat(p, math.pi / 4, 100e-6, n_groups=100)
    assert abs(scan.delta_phi) == pytest.approx(0.489, abs=1e-3)


def test_oat_equator_vanishes():
    scan = run_oat(UNITARY, math.pi / 2, 100e-6, n_groups=100)
    assert abs(scan.delta_phi) < 1e-7


@settings(max_examples=10)
@given(seed=st.integers(0, 2 ** 32 - 1), theta=st.floats(0.2, 2.9))
def test_echo_refocusing_any_offsets(seed, theta):
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, gamma_2=0.0, gamma_inh=5e3)
    scan = run_oat(p, theta, 100e-6, shape=Lineshape("pseudo_voigt", 5e3, 0.3), n_groups=200,
                   strategy="random", seed=seed)
    assert abs(scan.delta_phi) < 1e-6
    assert scan.contrast == pytest.approx(math.sin(theta), abs=1e-6)


def test_oat_antisymmetry_uniform():
    for theta in (math.pi / 6, math.pi / 4, math.pi / 3):
        a = run_oat(UNITARY, theta, 100e-6, n_groups=50)
        b = run_oat(UNITARY, math.pi - theta, 100e-6, n_groups=50)
        # fit sigma is ~1e-16 here; the integrator tolerance sets the floor
        tol = 2 * max(a.delta_phi_sigma, b.delta_phi_sigma) + 1e-8
        assert abs(a.delta_phi + b.delta_phi) <= tol


def test_oat_linear_in_tau():
    fit = oat_rate_scan(UNITARY, math.pi / 4, tau_grid=np.linspace(10e-6, 500e-6, 6), n_groups=50)
    assert abs(fit["intercept"]) <= 2 * fit.error("intercept") + 1e-12
    assert fit.info["chi_n"] == pytest.approx(derive_rates(UNITARY).chi_n, rel=1e-6)


def test_oat_experimental_settings_close_to_closed_form():
    fit = oat_rate_scan(OAT, math.pi / 4, n_groups=50)
    assert fit.info["chi_n"] == pytest.approx(derive_rates(OAT).chi_n, rel=0.01)


def test_oat_zero_chi_slope():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, gamma_2=0.0)
    fit = oat_rate_scan(p, math.pi / 4, n_groups=20)
    assert abs(fit["slope"]) <= 2 * fit.error("slope") + 1e-9


def test_oat_n0_scan():
    p = PhysicalParams(g=0.015, kappa=660e3, delta=22e6, gamma_2=0.0)
    kw = dict(tau_grid=[20e-6, 60e-6, 100e-6], n0_grid=np.logspace(13, 14, 4), n_groups=20)
    fit = oat_rate_scan(p, math.pi / 4, **kw)
    assert fit.info["slope_times_delta"] == pytest.approx(p.g ** 2, rel=0.05)
    # collective decay bends the line slightly; without it the intercept vanishes
    exact = oat_rate_scan(p.replace(kappa=1.0, kappa_out=0.5), math.pi / 4, **kw)
    assert abs(exact["intercept"]) <= 2 * exact.error("intercept") + 1e-9


def test_oat_guards():
    with pytest.raises(ValueError):
        run_oat(OAT, 1.0, 0.0)
    with pytest.warns(RuntimeWarning, match="5 kappa"):
        run_oat(OAT.replace(delta=1e6), 1.0, 1e-5, n_groups=10)
    dead = PhysicalParams(g=0.0, kappa=1.0, delta=100.0, gamma_2=1e6)
    with pytest.warns(RuntimeWarning, match="contrast"):
        scan = run_oat(dead, 1.0, 1e-3, n_groups=10)
    assert scan.contrast < CONTRAST_FLOOR
    with pytest.raises(ValueError):
        oat_rate_scan(OAT, tau_grid=[1e-5, 2e-5])


# ---- Ramsey -----------------------------------------------------------------

def test_default_tau_grid():
    g = default_tau_grid()
    assert g.size == 161
    assert g[0] == pytest.approx(1e-6) and g[-1] == pytest.approx(1e-2)


def test_crossing_time():
    t = np.linspace(0, 1e-3, 1001)
    assert crossing_time(t, np.exp(-t / 1e-4)) == pytest.approx(1e-4, rel=1e-6)
    assert math.isinf(crossing_time(t, np.ones_like(t)))


def test_ramsey_free_dephasing_small():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, gamma_2=0.0)
    shape = Lineshape("gaussian", 5e3)
    tr = run_ramsey(p, shape, n_groups=2000, tau_grid=np.linspace(1e-6, 6e-4, 50))
    np.testing.assert_allclose(tr.values, free_dephasing_coherence(shape, tr.times), atol=2e-3)
    assert "s_z" in tr.columns


def test_ramsey_trivial_limit():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, gamma_2=0.0, gamma_inh=0.0)
    tr = run_ramsey(p, None, n_groups=100, tau_grid=np.linspace(1e-6, 1e-3, 20))
    np.testing.assert_allclose(tr.values, 1.0, atol=1e-12)


def test_ramsey_guards():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6)
    with pytest.raises(ValueError):
        run_ramsey(p, Lineshape("gaussian", 5e3), n_groups=50)
    with pytest.warns(RuntimeWarning):
        run_ramsey(p.replace(delta=1e6), Lineshape("gaussian", 5e3), n_groups=100,
                   tau_grid=[1e-5, 2e-5])


def test_ramsey_convergence_warning():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, gamma_2=0.0)
    with pytest.warns(RuntimeWarning, match="group count"):
        run_ramsey(p, Lineshape("lorentzian", 5e3), n_groups=100,
                   tau_grid=np.linspace(1e-6, 5e-4, 20), check_convergence=True)


def test_ramsey_scan_monotone_small():
    p = PhysicalParams(g=1e-2, kappa=660e3, delta=22e6, gamma_inh=5e3)
    traces, fits = ramsey_scan(p, [100.0, 7000.0], shape=Lineshape("gaussian", 5e3),
                               n_groups=500, tau_grid=default_tau_grid(1e-6, 1e-2, 10))
    assert fits[1].info["t2_star"] > 10 * fits[0].info["t2_star"]
    assert traces[0].metadata["t2_star_interp"] > 0


# ---- S21 --------------------------------------------------------------------

F_C = 7e9


def _grid(delta=22e6, span=3e6, n=1201):
    return np.linspace(F_C - delta - span / 2, F_C - delta + span / 2, n)


def test_s21_bare_cavity():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, kappa_out=100e3)
    assert abs(s21_model([F_C], p, F_C)[0]) == pytest.approx(2 * 100e3 / 660e3, rel=1e-14)
    crit = PhysicalParams(g=0.0, kappa=660e3, delta=22e6)
    assert abs(s21_model([F_C], crit, F_C)[0]) == pytest.approx(1.0, rel=1e-14)


@given(g=st.floats(0, 1e6), gi=st.floats(1.0, 1e5), ko=st.floats(0, 1.0))
@settings(max_examples=30)
def test_s21_matches_angular_oracle(g, gi, ko):
    p = PhysicalParams.from_collective(g, 660e3, 22e6, gamma_inh=gi, kappa_out=ko * 660e3)
    f = _grid(n=51)
    ref = oracles.s21(f, g, gi, 660e3, ko * 660e3, F_C, F_C - 22e6)
    np.testing.assert_allclose(s21_model(f, p, F_C), ref, rtol=1e-9, atol=1e-15)


def test_s21_feature_near_spin_line():
    p = PhysicalParams.from_collective(350e3, 660e3, 22e6, gamma_inh=5e3)
    bare = PhysicalParams(g=0.0, kappa=660e3, delta=22e6)
    f = _grid(span=100e3, n=2001)
    d = np.abs(s21_model(f, p, F_C) - s21_model(f, bare, F_C))
    k = int(np.argmax(d))
    # the spin line is pulled by g_coll^2 / (f_s - f_c)
    pulled = F_C - 22e6 - 350e3 ** 2 / 22e6
    assert abs(f[k] - pulled) < 100.0
    half = d > d[k] / 2
    assert np.ptp(f[half]) < 20e3


def test_s21_round_trip_noiseless():
    p = PhysicalParams.from_collective(350e3, 660e3, 22e6, gamma_inh=5e3)
    f = _grid()
    fit = fit_s21(f, synthetic_s21(f, p, F_C, amplitude=0.7 - 0.2j, baseline=0.01j),
                  660e3, 22e6, F_C)
    assert fit["g_coll"] == pytest.approx(350e3, rel=1e-9)
    assert fit["gamma_inh"] == pytest.approx(5e3, rel=1e-7)
    assert fit.converged and not fit.info["flags"]


def test_s21_noise_level():
    p = PhysicalParams.from_collective(350e3, 660e3, 22e6, gamma_inh=5e3)
    f = _grid(n=20001)
    clean = s21_model(f, p, F_C)
    noisy = synthetic_s21(f, p, F_C, snr_db=40, seed=1)
    sd = np.std(noisy - clean)
    assert sd == pytest.approx(noise_std_for_snr(clean, 40), rel=0.03)


def test_s21_no_feature():
    p = PhysicalParams(g=0.0, kappa=660e3, delta=22e6, gamma_inh=5e3)
    f = _grid()
    fit = fit_s21(f, synthetic_s21(f, p, F_C, snr_db=40, seed=2), 660e3, 22e6, F_C)
    assert abs(fit.info["g_coll_sq"]) <= 2 * fit.info["g_coll_sq_sigma"]
    assert "feature_not_found" in fit.info["flags"]


def test_s21_validation():
    f = _grid(n=11)
    with pytest.raises(ValueError):
        fit_s21(f, np.ones(10), 660e3, 22e6, F_C)
    with pytest.raises(ValueError):
        fit_s21(f, np.ones(11), 0.0, 22e6, F_C)
    with pytest.raises(ValueError):
        fit_s21(f, np.ones(11, complex), 660e3, 22e6, F_C, data="power")
    with pytest.raises(ValueError):
        s21_model([math.nan], PhysicalParams(g=0.0, kappa=1.0), 0.0)
