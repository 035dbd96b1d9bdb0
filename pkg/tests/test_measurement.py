"""Displaced-number observables, random settings, records, completeness."""

import math

import numpy as np
import pytest

from noonsim import measurement as ms
from noonsim.hilbert import HilbertLayout, QuantumState, displacement
from noonsim.protocol import noon_vector_two_cavity


def test_setting_validation():
    with pytest.raises(ms.MeasurementError):
        ms.MeasurementSetting(0.0, -0.1, 0.0, 0.0)
    with pytest.raises(ms.MeasurementError):
        ms.MeasurementSetting(0.0, 0.0, 0.0, math.pi + 0.1)


def test_record_validation():
    s = ms.MeasurementSetting(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ms.MeasurementError):
        ms.MeasurementRecord((s,), (1.5,), (0.0,))  # outside spectrum at sigma=0
    rec = ms.MeasurementRecord((s,), (0.2,), (0.1,))
    assert len(rec) == 1


def test_observable_diagonal_at_zero_displacement():
    dim, tau = 5, 0.8
    M = ms.observable(0.0, tau, dim)
    ref = np.diag([math.cos(2.0 * math.sqrt(n) * tau) for n in range(dim)])
    assert np.max(np.abs(M - ref)) < 1e-14


def test_observable_is_displaced_diagonal():
    # oracle: build with an independently padded displacement and crop
    dim, alpha, tau = 6, 0.9 + 0.4j, 1.3
    big = 60
    D = displacement(alpha, big)
    W = np.diag([math.cos(2.0 * math.sqrt(n) * tau) for n in range(big)])
    ref = (D.conj().T @ W @ D)[:dim, :dim]
    M = ms.observable(alpha, tau, dim)
    assert np.max(np.abs(M - ref)) < 1e-9
    assert np.max(np.abs(M - M.conj().T)) < 1e-12
    # spectrum within [-1, 1] up to truncation
    lam = np.linalg.eigvalsh(M)
    assert lam.min() > -1.0 - 1e-9 and lam.max() < 1.0 + 1e-9


def test_observable_identity_at_zero_time():
    M = ms.observable(0.7 - 0.2j, 0.0, 5)
    assert np.max(np.abs(M - np.eye(5))) < 1e-10


def test_expectation_matches_kron_oracle():
    rng = np.random.default_rng(2)
    dims = (3, 4)
    d = dims[0] * dims[1]
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    rho /= np.trace(rho)
    setting = ms.MeasurementSetting(0.5 + 0.1j, 0.9, -0.3j, 2.1)
    joint = np.kron(ms.observable(setting.alpha1, setting.tau1, dims[0]),
                    ms.observable(setting.alpha2, setting.tau2, dims[1]))
    want = float(np.trace(joint @ rho).real)
    assert abs(ms.expectation(rho, setting, dims) - want) < 1e-12
    assert np.max(np.abs(ms.correlated_observable(setting, dims) - joint)) < 1e-12


def test_sample_settings_distribution_and_determinism():
    N = 3
    s1 = ms.sample_settings(500, N, seed=12)
    s2 = ms.sample_settings(500, N, seed=12)
    assert s1 == s2
    radii = np.array([abs(s.alpha1) for s in s1])
    taus = np.array([s.tau1 for s in s1])
    assert radii.max() <= N + 1e-12
    # uniform on a disc of radius N: mean |alpha|^2 = N^2/2
    assert abs(np.mean(radii ** 2) - N * N / 2.0) < 0.05 * N * N
    assert 0.0 <= taus.min() and taus.max() <= math.pi
    assert abs(np.mean(taus) - math.pi / 2.0) < 0.1


def test_generate_record_noise_level():
    layout = HilbertLayout((("C1", 3), ("C2", 3)))
    psi = QuantumState(layout, noon_vector_two_cavity(2, 0.0, 3))
    settings = ms.sample_settings(2000, 2, seed=4)
    rec = ms.generate_record(psi.to_matrix(), settings, sigma=0.05, seed=4)
    clean = ms.generate_record(psi.to_matrix(), settings, sigma=0.0, seed=4)
    resid = np.asarray(rec.outcomes) - np.asarray(clean.outcomes)
    assert abs(np.std(resid) - 0.05) < 0.005
    assert all(s == 0.05 for s in rec.sigmas)


def test_completeness_rank():
    dims = (2, 2)
    # identity-only settings span {I} alone: rank 1 plus nothing new
    s0 = ms.MeasurementSetting(0.0, 0.0, 0.0, 0.0)
    assert ms.completeness_rank([s0, s0], dims) == 1
    # diagonal settings only reach the diagonal subspace
    diag = [ms.MeasurementSetting(0.0, t, 0.0, u)
            for t, u in [(0.3, 0.4), (1.1, 0.2), (2.0, 1.5), (0.7, 2.2)]]
    assert ms.completeness_rank(diag, dims) <= dims[0] * dims[1]
    # generic settings reach the full d^2
    full = ms.sample_settings(40, 1, seed=8)
    assert ms.completeness_rank(full, dims) == 16


def test_record_table_round_trip():
    layout = HilbertLayout((("C1", 2), ("C2", 2)))
    psi = QuantumState(layout, noon_vector_two_cavity(1, 0.3, 2))
    settings = ms.sample_settings(7, 1, seed=99)
    rec = ms.generate_record(psi.to_matrix(), settings, sigma=0.02, seed=99)
    back = ms.record_from_table(ms.record_to_table(rec))
    assert back.seed == rec.seed
    assert back.outcomes == rec.outcomes
    assert back.sigmas == rec.sigmas
    assert all(a == b for a, b in zip(back.settings, rec.settings))
