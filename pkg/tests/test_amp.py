import math

import numpy as np
import pytest

from uradec.amp import (AmpConfig, AmpNumericalError, amp_detect, bg_posterior, detect_frame,
                        detect_slots, evidence_row, log_bg_posterior, mmse_denoise)
from uradec.sim import FrameConfig, activity_vector, generate_frame, make_dictionaries, partial_dft


def cfg(rho=2 / 64, s2=20.0, **kw):
    return AmpConfig(rho_bg=rho, sigma_u2=s2, **kw)


def cgauss(r, v):
    return np.exp(-np.abs(r) ** 2 / v) / (np.pi * v)


def test_config_validation():
    for bad in (dict(iters=0), dict(rho_bg=0.0), dict(rho_bg=1.0), dict(sigma_u2=0.0)):
        with pytest.raises(ValueError):
            AmpConfig(**bad)
    r = AmpConfig().resolved(FrameConfig())
    assert r.rho_bg == pytest.approx(2 / 64)
    assert r.sigma_u2 == pytest.approx(20.0)
    with pytest.raises(ValueError):
        bg_posterior(1.0, 1.0, AmpConfig())


def test_posterior_matches_density_ratio(rng):
    c = cfg(0.1, 3.0)
    r = rng.normal(size=50) + 1j * rng.normal(size=50)
    nu = rng.uniform(0.2, 3.0, size=50)
    num = 0.1 * cgauss(r, nu + 3.0)
    want = num / (num + 0.9 * cgauss(r, nu))
    assert np.allclose(bg_posterior(r, nu, c), want, rtol=1e-12)


def test_posterior_at_origin():
    c = cfg(0.2, 4.0)
    nu = 1.5
    g = nu / (nu + 4.0)
    want = 0.2 * g / ((1 - 0.2) + 0.2 * g)
    assert bg_posterior(0.0, nu, c) == pytest.approx(want, rel=1e-12)
    assert want < 0.2


def test_posterior_limits():
    assert bg_posterior(1e3, 1.0, cfg()) == pytest.approx(1.0)
    assert bg_posterior(0.3, 1.0, cfg(1 - 1e-15)) == pytest.approx(1.0, abs=1e-12)


def test_posterior_monotone_in_magnitude():
    r = np.linspace(0, 10, 200)
    p = bg_posterior(r, 2.0, cfg(0.05, 5.0))
    assert np.all(np.diff(p) > 0)


def test_bad_nu():
    with pytest.raises(ValueError):
        bg_posterior(1.0, 0.0, cfg())
    with pytest.raises(ValueError):
        mmse_denoise(1.0, -1.0, cfg())


def test_denoise_zero_and_no_shrinkage():
    mean, _ = mmse_denoise(0.0, 1.0, cfg())
    assert mean == 0
    r = 3.0 + 4.0j
    mean, _ = mmse_denoise(r, 1.0, cfg(1 - 1e-12, 1e12))
    assert mean == pytest.approx(r, rel=1e-9)


def wirtinger_fd(r, nu, c, h=1e-6):
    # d mean / d r = (d/dx - i d/dy) / 2 applied to mean(x + iy)
    f = lambda z: mmse_denoise(z, nu, c)[0]
    dx = (f(r + h) - f(r - h)) / (2 * h)
    dy = (f(r + 1j * h) - f(r - 1j * h)) / (2 * h)
    return 0.5 * (dx - 1j * dy)


def test_divergence_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(100):
        c = cfg(rng.uniform(0.01, 0.5), rng.uniform(0.5, 30.0))
        nu = rng.uniform(0.3, 5.0)
        r = complex(rng.normal(scale=3), rng.normal(scale=3))
        _, div = mmse_denoise(r, nu, c)
        fd = wirtinger_fd(r, nu, c)
        assert abs(fd.imag) < 1e-6
        assert abs(div - fd.real) < 1e-6


def test_zero_observation_fixed_point():
    A = partial_dft(64, 24, 0)
    R, nu = amp_detect(np.zeros(24), A, cfg())
    assert not np.any(R)


def test_noiseless_single_user_detection():
    rng = np.random.default_rng(9)
    c = cfg(1 / 64, 20.0)
    hits = 0
    for _ in range(1000):
        A = partial_dft(64, 24, rng)
        a = int(rng.integers(64))
        Y = math.sqrt(20.0) * A.columns[:, a]
        R, _ = amp_detect(Y, A, c)
        hits += int(np.argmax(np.abs(R)) == a)
    assert hits == 1000


def test_residual_energy_not_increasing(tiny_code):
    H, gen = tiny_code
    fc = FrameConfig()
    d = make_dictionaries(64, 12, 24, 1)
    A = np.stack([x.columns for x in d])
    rng = np.random.default_rng(2)
    first, last = [], []
    for _ in range(200):
        f = generate_frame(fc, H, gen, rng, dictionaries=d)
        _, _, hist = amp_detect(f.observations, A, AmpConfig().resolved(fc), return_history=True)
        assert hist.shape == (12, 21)
        first.append(hist[:, 0].mean())
        last.append(hist[:, -1].mean())
    assert np.mean(last) <= np.mean(first)


def test_evidence_properties(tiny_code):
    H, gen = tiny_code
    fc = FrameConfig(noise_var=0.0)
    d = make_dictionaries(64, 12, 24, 3)
    f = generate_frame(fc, H, gen, 5, dictionaries=d)
    S = detect_frame(f, AmpConfig().resolved(fc))
    assert S.shape == (12, 64)
    assert np.all(S <= 0) and np.all(S >= -40.0) and np.all(np.isfinite(S))
    for l in range(12):
        if f.truth[0, l] != f.truth[1, l]:
            top2 = set(np.argsort(-S[l])[:2].tolist())
            assert top2 == set(f.truth[:, l].tolist())


def test_evidence_degenerate_prior():
    c = cfg(1 - 1e-15)
    row = evidence_row(np.array([0.0, 1.0, 2.0j]), 1.0, c)
    assert np.allclose(row, 0.0, atol=1e-12)


def test_nonfinite_raises():
    A = partial_dft(8, 4, 0)
    with pytest.raises(AmpNumericalError) as ei:
        amp_detect(np.array([np.nan, 0, 0, 0]), A, cfg(0.1, 1.0))
    assert ei.value.iteration == 0


def test_determinism(tiny_code):
    H, gen = tiny_code
    fc = FrameConfig()
    d = make_dictionaries(64, 12, 24, 3)
    f = generate_frame(fc, H, gen, 5, dictionaries=d)
    c = AmpConfig().resolved(fc)
    assert np.array_equal(detect_slots(f.observations, d, c), detect_slots(f.observations, d, c))


def test_batched_matches_per_slot(tiny_code):
    H, gen = tiny_code
    fc = FrameConfig()
    d = make_dictionaries(64, 12, 24, 3)
    f = generate_frame(fc, H, gen, 6, dictionaries=d)
    c = AmpConfig().resolved(fc)
    S = detect_slots(f.observations, d, c)
    for l in range(12):
        R, nu = amp_detect(f.observations[l], d[l], c)
        assert np.allclose(S[l], evidence_row(R, nu, c), atol=1e-12)


def test_reduced_iterations_agree_on_top_k(tiny_code):
    H, gen = tiny_code
    fc = FrameConfig()
    d = make_dictionaries(64, 12, 24, 4)
    rng = np.random.default_rng(11)
    c20 = AmpConfig().resolved(fc)
    c5 = AmpConfig(iters=5).resolved(fc)
    agree = total = 0
    for _ in range(200):
        f = generate_frame(fc, H, gen, rng, dictionaries=d)
        a = np.argsort(-detect_slots(f.observations, d, c20), axis=1)[:, :2]
        b = np.argsort(-detect_slots(f.observations, d, c5), axis=1)[:, :2]
        agree += sum(set(x) == set(y) for x, y in zip(a.tolist(), b.tolist()))
        total += 12
    assert agree / total >= 0.95


def test_log_posterior_stable():
    assert np.isfinite(log_bg_posterior(0.0, 1e-10, cfg(1e-6, 1e6)))
    assert log_bg_posterior(1e4, 1.0, cfg()) == pytest.approx(0.0, abs=1e-12)
