"""Audio Encoder, mel conditioner, and conditioning assembly tests."""

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import randomize_parameters, sine_wave
from flowvoc.conditioning import (
    CONDITIONING_CHANNELS,
    EMBEDDING_DIM,
    AudioEmbeddingPosterior,
    AudioEncoder,
    MelConditioner,
    combine_and_upsample,
    kl_to_standard_prior,
    sample_embedding,
)
from flowvoc.errors import ValidationError


def _wave_tensor(n, seed=0, batch=None):
    rng = np.random.default_rng(seed)
    shape = (n,) if batch is None else (batch, n)
    return torch.from_numpy(rng.uniform(-0.8, 0.8, shape).astype(np.float32))


class TestAudioEncoder:
    def test_embedding_is_48_dim_at_both_probe_lengths(self):
        enc = AudioEncoder().eval()
        with torch.no_grad():
            for n in (8700, 20400):
                post = enc(_wave_tensor(n))
                assert post.mean.shape == (1, EMBEDDING_DIM)
                assert post.logvar.shape == (1, EMBEDDING_DIM)
            batched = enc(_wave_tensor(4096, batch=3))
            assert batched.mean.shape == (3, EMBEDDING_DIM)

    def test_minimum_input_length(self):
        enc = AudioEncoder().eval()
        with torch.no_grad():
            enc(_wave_tensor(AudioEncoder.MIN_INPUT_LENGTH))
        with pytest.raises(ValidationError):
            enc(_wave_tensor(AudioEncoder.MIN_INPUT_LENGTH - 1))
        with pytest.raises(ValidationError):
            enc(torch.zeros(2, 3, 4096))

    def test_zero_input_with_zero_biases_gives_zero_posterior(self):
        # Every layer maps 0 -> 0 once biases vanish, so the posterior of
        # silence is exactly the prior mean regardless of the weights.
        enc = randomize_parameters(AudioEncoder(), seed=3, scale=0.2).eval()
        with torch.no_grad():
            for name, p in enc.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
            post = enc(torch.zeros(2, 4096))
        assert torch.all(post.mean == 0)
        assert torch.all(post.logvar == 0)

    def test_logvar_is_clamped(self):
        enc = randomize_parameters(AudioEncoder(), seed=5, scale=1.5).eval()
        with torch.no_grad():
            post = enc(_wave_tensor(4096, seed=8) * 0.99)
        assert torch.all(post.logvar <= 14.0)
        assert torch.all(post.logvar >= -14.0)

    def test_tone_shifted_by_whole_period_encodes_identically(self):
        # 600 Hz has an exact 40-sample period at 24 kHz; a window one period
        # later sees the same samples, so the embedding must match closely.
        enc = randomize_parameters(AudioEncoder(), seed=11, scale=0.1).eval()
        wave = sine_wave(600.0, 0.3).samples
        a = torch.from_numpy(wave[:4096].copy())
        b = torch.from_numpy(wave[40 : 4096 + 40].copy())
        with torch.no_grad():
            pa, pb = enc(a), enc(b)
        assert torch.allclose(pa.mean, pb.mean, atol=1e-3)
        assert torch.allclose(pa.logvar, pb.logvar, atol=1e-3)

    def test_distinct_inputs_give_distinct_posteriors(self):
        enc = AudioEncoder().eval()
        with torch.no_grad():
            pa = enc(_wave_tensor(4096, seed=1))
            pb = enc(torch.from_numpy(sine_wave(440.0, 4096 / 24000).samples))
        assert not torch.allclose(pa.mean, pb.mean, atol=1e-4)


class TestPosteriorOps:
    def test_sampling_moments_match_posterior(self):
        n = 100_000
        mean = torch.tensor([0.0, 1.0, -2.0, 3.0]).repeat(n, 1)
        logvar = torch.tensor([0.0, np.log(4.0), np.log(0.25), 0.0]).float().repeat(n, 1)
        g = torch.Generator().manual_seed(17)
        draws = sample_embedding(AudioEmbeddingPosterior(mean, logvar), g)
        assert draws.shape == (n, 4)
        se = torch.exp(0.5 * logvar[0]) / np.sqrt(n)
        assert torch.all((draws.mean(dim=0) - mean[0]).abs() < 4 * se)
        assert torch.allclose(draws.std(dim=0), torch.exp(0.5 * logvar[0]), rtol=0.02)
        cov = np.cov(draws.numpy().T)
        off_diag = cov - np.diag(np.diag(cov))
        assert np.all(np.abs(off_diag) < 0.03)

    def test_sampling_is_generator_deterministic(self):
        post = AudioEmbeddingPosterior(torch.zeros(2, 48), torch.zeros(2, 48))
        a = sample_embedding(post, torch.Generator().manual_seed(3))
        b = sample_embedding(post, torch.Generator().manual_seed(3))
        c = sample_embedding(post, torch.Generator().manual_seed(4))
        assert torch.equal(a, b)
        assert not torch.equal(a, c)

    def test_kl_closed_form_points(self):
        zero = AudioEmbeddingPosterior(torch.zeros(1, 48), torch.zeros(1, 48))
        assert kl_to_standard_prior(zero).item() == 0.0
        unit_mean = AudioEmbeddingPosterior(
            torch.tensor([[1.0]]), torch.tensor([[0.0]])
        )
        assert kl_to_standard_prior(unit_mean).item() == pytest.approx(0.5)
        wide = AudioEmbeddingPosterior(
            torch.tensor([[0.0]]), torch.tensor([[np.log(4.0)]]).float()
        )
        assert kl_to_standard_prior(wide).item() == pytest.approx(
            0.5 * (4.0 - 1.0 - np.log(4.0)), rel=1e-6
        )

    def test_kl_matches_torch_distributions(self):
        g = torch.Generator().manual_seed(2)
        mean = torch.randn(5, 48, generator=g)
        logvar = torch.randn(5, 48, generator=g).clamp(-3, 3)
        got = kl_to_standard_prior(AudioEmbeddingPosterior(mean, logvar))
        q = torch.distributions.Normal(mean, torch.exp(0.5 * logvar))
        p = torch.distributions.Normal(torch.zeros_like(mean), torch.ones_like(logvar))
        want = torch.distributions.kl_divergence(q, p).sum(dim=1)
        assert got.shape == (5,)
        assert torch.allclose(got, want, rtol=1e-5)

    @settings(deadline=None, max_examples=40)
    @given(
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=-6, max_value=6),
    )
    def test_kl_is_nonnegative(self, mean, logvar):
        post = AudioEmbeddingPosterior(
            torch.full((1, 3), float(mean)), torch.full((1, 3), float(logvar))
        )
        assert kl_to_standard_prior(post).item() >= 0.0


class TestMelConditioner:
    def test_output_width_is_conditioning_minus_embedding(self):
        cond = MelConditioner().eval()
        with torch.no_grad():
            out = cond(torch.randn(2, 29, 80))
        assert out.shape == (2, 29, CONDITIONING_CHANNELS - EMBEDDING_DIM)

    def test_is_bidirectional(self):
        cond = MelConditioner().eval()
        g = torch.Generator().manual_seed(0)
        mel = torch.randn(1, 20, 80, generator=g)
        bumped_tail = mel.clone()
        bumped_tail[0, -1] += 1.0
        bumped_head = mel.clone()
        bumped_head[0, 0] += 1.0
        with torch.no_grad():
            base, tail, head = cond(mel), cond(bumped_tail), cond(bumped_head)
        assert not torch.allclose(base[0, 0], tail[0, 0])
        assert not torch.allclose(base[0, -1], head[0, -1])


class TestCombineAndUpsample:
    def test_block_structure(self):
        frames = torch.arange(2 * 5 * 6, dtype=torch.float32).reshape(2, 5, 6)
        emb = torch.arange(2 * 3, dtype=torch.float32).reshape(2, 3) * 10
        out = combine_and_upsample(frames, emb, upsample_factor=4)
        assert out.shape == (2, 20, 9)
        for b in range(2):
            for t in range(5):
                block = out[b, t * 4 : (t + 1) * 4]
                row = torch.cat([frames[b, t], emb[b]])
                assert torch.equal(block, row.expand(4, 9))

    def test_zero_embedding_zeroes_trailing_columns(self):
        frames = torch.randn(1, 7, 256)
        out = combine_and_upsample(frames, torch.zeros(1, 48), upsample_factor=300)
        assert out.shape == (1, 2100, 304)
        assert torch.all(out[..., 256:] == 0)
        assert not torch.all(out[..., :256] == 0)

    def test_embedding_only_affects_trailing_columns(self):
        frames = torch.randn(1, 4, 6)
        a = combine_and_upsample(frames, torch.full((1, 2), 1.5), 3)
        b = combine_and_upsample(frames, torch.full((1, 2), -0.5), 3)
        assert torch.equal(a[..., :6], b[..., :6])
        assert not torch.equal(a[..., 6:], b[..., 6:])
