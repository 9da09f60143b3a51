import numpy as np
import pytest

from uradec.bp import TopJBudgetError
from uradec.decoders import DecoderSpec, make_decoder, validate
from uradec.ldpc import sample_codewords


def clean_evidence(truth):
    S = np.full((truth.shape[1], 64), -40.0)
    for k, row in enumerate(truth):
        S[np.arange(len(row)), row] = -0.1 * k
    return S


def test_spec_validation(tiny_code):
    H, _ = tiny_code
    with pytest.raises(ValueError):
        DecoderSpec("viterbi")
    with pytest.raises(ValueError):
        validate(DecoderSpec(backend="fft"), H, 2)
    with pytest.raises(TopJBudgetError):
        validate(DecoderSpec("topj", J=4), H, 2)
    with pytest.raises(ValueError):
        validate(DecoderSpec("refine-oracle"), H, 9)
    validate(DecoderSpec("refine-oracle", T=10), H, 9)
    with pytest.raises(ValueError):
        validate(DecoderSpec(), H, 0)


@pytest.mark.parametrize("name", ["sic-bp", "topj", "refine-oracle"])
def test_clean_decodes(name, tiny_code, rng):
    H, gen = tiny_code
    while True:
        truth = sample_codewords(gen, 2, rng)
        if np.all(truth[0] != truth[1]):
            break
    dec = make_decoder(DecoderSpec(name), H, 2, scale_T=12)
    grid, stats = dec(clean_evidence(truth), truth)
    assert {tuple(r) for r in grid} == {tuple(r) for r in truth}
    if name == "sic-bp":
        assert stats["converged"]
    if name == "refine-oracle":
        assert stats["T"] == 12


def test_oracle_needs_truth(tiny_code):
    H, _ = tiny_code
    dec = make_decoder(DecoderSpec("refine-oracle"), H, 2)
    with pytest.raises(ValueError):
        dec(np.zeros((12, 64)))


def test_structured_runs(tiny_code, rng):
    H, _ = tiny_code
    dec = make_decoder(DecoderSpec("refine-structured", D=16, T=4, remask=(0.99,)), H, 3)
    grid, stats = dec(-rng.exponential(5, size=(12, 64)))
    assert grid.shape == (3, 12) and grid.min() >= 0 and stats["T"] == 4
