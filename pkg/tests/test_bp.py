import itertools

import numpy as np
import pytest

from uradec import kernels
from uradec.bp import (BpConfig, TopJBudgetError, bp_decode, check_update_direct, check_update_wht,
                       iwht, sic_decode, slot_beliefs, topj_decode, wht, xor_convolve)
from uradec.gfq import GfContext
from uradec.ldpc import ParityCheckMatrix, derive_generator, is_codeword, sample_codewords, syndrome
from uradec.presets import dataset_dictionaries
from uradec.amp import AmpConfig, detect_frame
from uradec.sim import FrameConfig, generate_frame

KERNELS = ["python"] + (["cython"] if kernels.compiled is not None else [])


def rand_msgs(rng, n, Q):
    m = rng.random((n, Q)) ** 3
    return m / m.sum(axis=1, keepdims=True)


def brute_check(ctx, incoming, coeffs, target):
    # P(x_target = a) over all assignments of the other neighbours
    out = np.zeros(ctx.Q)
    for vals in itertools.product(range(ctx.Q), repeat=len(coeffs)):
        s = 0
        w = 1.0
        for m, c, v in zip(incoming, coeffs, vals):
            s ^= ctx.mul(int(c), v)
            w *= m[v]
        # target * a = s
        out[ctx.mul(ctx.inv(int(target)), s)] += w
    return out / out.sum()


def xor_conv_oracle(u, v):
    out = np.zeros_like(u)
    for a in range(len(u)):
        for b in range(len(v)):
            out[a ^ b] += u[a] * v[b]
    return out


def test_slot_beliefs(rng):
    assert np.allclose(slot_beliefs(np.zeros((2, 64))), 1 / 64)
    S = rng.normal(size=(3, 64))
    assert np.allclose(slot_beliefs(S), slot_beliefs(S + np.array([[1.0], [-7.0], [40.0]])))
    row = np.full((1, 64), -40.0)
    row[0, 5] = 0.0
    lam = slot_beliefs(row)[0]
    # 1 - lam[5] is below one ulp of 1, so bound the off-peak mass instead
    assert np.delete(lam, 5).sum() < 64 * np.exp(-40)
    assert lam[5] == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        slot_beliefs(np.array([[np.inf, 0.0]]))


def test_wht_basics(rng):
    d = np.zeros(64)
    d[0] = 1
    assert np.array_equal(wht(d), np.ones(64))
    v = rng.normal(size=64)
    assert np.allclose(iwht(wht(v)), v, atol=1e-12)
    with pytest.raises(ValueError):
        wht(np.ones(12))


def test_wht_matches_hadamard_matrix(rng):
    Hm = np.array([[(-1) ** bin(a & b).count("1") for b in range(16)] for a in range(16)])
    v = rng.normal(size=16)
    assert np.allclose(wht(v), Hm @ v, atol=1e-12)


def test_convolution_theorem(rng):
    for _ in range(50):
        u, v = rng.random((2, 64))
        c = xor_convolve(u, v)
        assert np.allclose(c, xor_conv_oracle(u, v), atol=1e-12)
        assert np.allclose(wht(c), wht(u) * wht(v), atol=1e-10)


@pytest.mark.parametrize("Q,d", [(4, 2), (4, 3), (4, 4), (8, 3), (8, 4), (16, 3)])
def test_check_update_brute_force(Q, d, rng):
    ctx = GfContext(Q.bit_length() - 1)
    for _ in range(5):
        inc = rand_msgs(rng, d - 1, Q)
        coeffs = rng.integers(1, Q, size=d - 1)
        target = int(rng.integers(1, Q))
        want = brute_check(ctx, inc, coeffs, target)
        assert np.allclose(check_update_direct(ctx, inc, coeffs, target), want, atol=1e-10)
        assert np.allclose(check_update_wht(ctx, inc, coeffs, target), want, atol=1e-10)


def test_check_update_deterministic_and_uniform(gf64):
    pm = np.zeros((1, 64))
    pm[0, 9] = 1
    # 3 * x + 5 * 9 = 0  ->  x = 5 * 9 / 3
    want = gf64.mul(gf64.inv(3), gf64.mul(5, 9))
    for fn in (check_update_direct, check_update_wht):
        out = fn(gf64, pm, [5], 3)
        assert np.argmax(out) == want and out[want] == pytest.approx(1.0)
        u = np.full((2, 64), 1 / 64)
        assert np.allclose(fn(gf64, u, [3, 7], 11), 1 / 64)
    with pytest.raises(ValueError):
        check_update_direct(gf64, pm, [0], 3)


def test_check_update_point_masses_wht(gf64):
    inc = np.zeros((2, 64))
    inc[0, 4] = inc[1, 17] = 1
    s = gf64.mul(2, 4) ^ gf64.mul(6, 17)
    out = check_update_wht(gf64, inc, [2, 6], 9)
    assert np.argmax(out) == gf64.mul(gf64.inv(9), s)
    assert out.max() == pytest.approx(1.0)


def test_backends_agree_degree3(gf64):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        inc = rand_msgs(rng, 2, 64)
        coeffs = rng.integers(1, 64, size=2)
        t = int(rng.integers(1, 64))
        a = check_update_direct(gf64, inc, coeffs, t)
        b = check_update_wht(gf64, inc, coeffs, t)
        assert np.max(np.abs(a - b)) <= 1e-8


def tree_code():
    ctx = GfContext(2)
    # checks {0,1,2} and {2,3}: a tree
    H = ParityCheckMatrix(ctx, 2, 4, [(0, 0, 1), (0, 1, 2), (0, 2, 3), (1, 2, 2), (1, 3, 1)])
    return ctx, H


def exact_posterior(H, lam):
    words = np.array(list(itertools.product(range(H.Q), repeat=H.L)))
    words = words[is_codeword(H, words)]
    w = np.prod(lam[np.arange(H.L), words], axis=1)
    post = np.zeros((H.L, H.Q))
    for l in range(H.L):
        np.add.at(post[l], words[:, l], w)
    return post / w.sum(), words


@pytest.mark.parametrize("backend", ["direct", "wht"])
def test_tree_exactness(backend):
    _, H = tree_code()
    rng = np.random.default_rng(1)
    cfg = BpConfig(max_iters=10, backend=backend, early_exit=False)
    for _ in range(100):
        lam = rand_msgs(rng, 4, 4)
        post, words = exact_posterior(H, lam)
        assert len(words) == 16
        res = bp_decode(lam, H, cfg)
        assert np.allclose(res.marginals, post, atol=1e-8)


def test_clean_fixed_point(tiny_code, rng):
    H, gen = tiny_code
    c = sample_codewords(gen, 1, rng)[0]
    lam = np.full((12, 64), 1e-20)
    lam[np.arange(12), c] = 1
    lam /= lam.sum(axis=1, keepdims=True)
    for backend in ("direct", "wht"):
        res = bp_decode(lam, H, BpConfig(backend=backend))
        assert res.converged and res.iters == 1
        assert np.array_equal(res.hard, c)


def test_uniform_ties_lowest_index(tiny_code):
    H, _ = tiny_code
    res = bp_decode(np.full((12, 64), 1 / 64), H, BpConfig(max_iters=3))
    assert not res.hard.any()
    assert res.converged  # the all-zero word is a codeword


def test_messages_normalized_and_converged_sound(tiny_code):
    H, gen = tiny_code
    rng = np.random.default_rng(3)
    for _ in range(30):
        lam = rand_msgs(rng, 12, 64)
        res = bp_decode(lam, H, BpConfig(max_iters=5))
        assert np.allclose(res.marginals.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(res.marginals >= 0)
        if res.converged:
            assert not syndrome(H, res.hard).any()


def test_config_validation():
    with pytest.raises(ValueError):
        BpConfig(max_iters=0)
    with pytest.raises(ValueError):
        BpConfig(message_floor=0)
    with pytest.raises(ValueError):
        BpConfig(backend="fft")


def tiny_frames(H, gen, n, seed=0, K=2):
    fc = FrameConfig(K=K)
    d = dataset_dictionaries(64, 12, 24, seed)
    amp = AmpConfig().resolved(fc)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        f = generate_frame(fc, H, gen, rng, dictionaries=d)
        detect_frame(f, amp)
        out.append(f)
    return out


@pytest.mark.parametrize("name", KERNELS)
def test_kernel_builds_agree(name, tiny_code):
    H, gen = tiny_code
    for f in tiny_frames(H, gen, 20, seed=4):
        lam = slot_beliefs(f.evidence)
        for backend in ("direct", "wht"):
            ref = bp_decode(lam, H, BpConfig(backend=backend, kernels="python"))
            got = bp_decode(lam, H, BpConfig(backend=backend, kernels=name))
            assert np.array_equal(ref.hard, got.hard)
            assert np.max(np.abs(ref.marginals - got.marginals)) < 1e-12
            assert ref.iters == got.iters


@pytest.mark.parametrize("name", KERNELS)
def test_kernel_transforms_agree(name, rng):
    k = kernels.get(name)
    v = rng.normal(size=(5, 64))
    assert np.allclose(k.wht(v), kernels.python.wht(v), atol=1e-12)
    u, w = rng.random((2, 64))
    assert np.allclose(k.xor_conv(u, w), xor_conv_oracle(u, w), atol=1e-12)


def test_kernel_selection():
    assert kernels.get(None) is kernels.active
    assert kernels.get("python") is kernels.python
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_sic_k1_is_bp(tiny_code):
    H, gen = tiny_code
    for f in tiny_frames(H, gen, 10, seed=2, K=1):
        grid = sic_decode(f.evidence, H, 1)
        res = bp_decode(slot_beliefs(f.evidence), H)
        assert np.array_equal(grid[0], res.hard)


def test_sic_two_disjoint_users(tiny_code, rng):
    H, gen = tiny_code
    while True:
        t = sample_codewords(gen, 2, rng)
        if np.all(t[0] != t[1]):
            break
    S = np.full((12, 64), -40.0)
    S[np.arange(12), t[0]] = 0.0
    S[np.arange(12), t[1]] = -0.5
    for cancel in ("floor", "retry"):
        grid = sic_decode(S, H, 2, cancel=cancel)
        assert np.array_equal(grid, t)


def test_sic_retry_rescues_collision(tiny_code):
    # rows share slot symbols: flooring kills the second user's evidence there
    H, gen = tiny_code
    rng = np.random.default_rng(21)
    while True:
        t = sample_codewords(gen, 2, rng)
        if (t[0] == t[1]).sum() == 1:
            break
    S = np.full((12, 64), -40.0)
    S[np.arange(12), t[1]] = -1.0
    S[np.arange(12), t[0]] = 0.0
    grid = sic_decode(S, H, 2, cancel="retry")
    assert {tuple(r) for r in grid} == {tuple(r) for r in t}


def test_sic_validation(tiny_code):
    H, _ = tiny_code
    with pytest.raises(ValueError):
        sic_decode(np.zeros((12, 64)), H, 0)
    with pytest.raises(ValueError):
        sic_decode(np.zeros((12, 64)), H, 1, cancel="subtract")


def small_code():
    ctx = GfContext(2)
    from uradec.ldpc import build_random_ldpc
    H = build_random_ldpc(ctx, 6, 3, rng=3)
    return H


def test_topj_full_enumeration_matches_ml():
    H = small_code()
    rng = np.random.default_rng(5)
    words = np.array(list(itertools.product(range(4), repeat=6)))
    words = words[is_codeword(H, words)]
    for _ in range(30):
        S = rng.normal(size=(6, 4))
        score = S[np.arange(6), words].sum(axis=1)
        order = sorted(range(len(words)), key=lambda i: (-score[i], tuple(words[i])))
        want = words[order[:2]]
        got = topj_decode(S, H, 2, J=4)
        assert np.array_equal(got, want)


def test_topj_j1(tiny_code, rng):
    H, gen = tiny_code
    c = sample_codewords(gen, 1, rng)[0]
    S = rng.normal(size=(12, 64)) - 5
    S[np.arange(12), c] = 1.0
    assert np.array_equal(topj_decode(S, H, 1, 1)[0], c)
    # an invalid argmax sequence is still returned as padding
    S[0, c[0]] = -10
    row = topj_decode(S, H, 1, 1)[0]
    assert np.array_equal(row, np.argmax(S, axis=1))
    assert not is_codeword(H, row)


def test_topj_pads_when_short(tiny_code):
    H, _ = tiny_code
    out = topj_decode(np.zeros((12, 64)), H, 3, 1)
    assert out.shape == (3, 12)


def test_topj_budget(tiny_code):
    H, _ = tiny_code
    with pytest.raises(TopJBudgetError) as ei:
        topj_decode(np.zeros((12, 64)), H, 2, 4)
    assert ei.value.candidates == 4 ** 12
    with pytest.raises(ValueError):
        topj_decode(np.zeros((12, 64)), H, 2, 0)


def test_topj_chunking_invariant(tiny_code):
    H, gen = tiny_code
    for f in tiny_frames(H, gen, 5, seed=6):
        a = topj_decode(f.evidence, H, 2, 2)
        b = topj_decode(f.evidence, H, 2, 2, chunk=97)
        assert np.array_equal(a, b)
