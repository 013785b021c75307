"""PSD pipeline vs the direct O(N^2) DFT oracle, plus the Parseval and
window-invariance properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dft_psd_oracle
from spectrumlab import InvalidArgument, SampleBlock, psd_pipeline

FS = 2.4e6


def make_block(samples, fs=FS, fc=600e6):
    return SampleBlock(sensor_id="t", center_freq=fc, sample_rate=fs,
                       t0_ms=0, samples=np.asarray(samples, dtype=complex))


def test_constant_input_is_all_dc():
    # All power of a constant unit signal lands in the DC bin.
    block = make_block(np.ones(8))
    seg = psd_pipeline(block, fft_size=8, n_avg=1)
    expected = np.zeros(8)
    expected[0] = 1.0                      # pre-shift indexing
    np.testing.assert_allclose(seg.bins, np.fft.fftshift(expected), atol=1e-12)
    assert seg.bins[4] == pytest.approx(1.0)   # post-shift DC position


def test_single_tone_hits_its_bin():
    n, k0 = 16, 3
    x = np.exp(2j * np.pi * k0 * np.arange(n) / n)
    seg = psd_pipeline(make_block(x), fft_size=n, n_avg=1)
    expected = np.zeros(n)
    expected[k0] = 1.0                     # unit power, one bin, pre-shift
    np.testing.assert_allclose(seg.bins, np.fft.fftshift(expected), atol=1e-12)


def test_matches_dft_oracle_random_block():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    seg = psd_pipeline(make_block(x), fft_size=256, n_avg=16)
    oracle = dft_psd_oracle(x, 256, 16)
    np.testing.assert_allclose(seg.bins, oracle, rtol=1e-6,
                               atol=oracle.max() * 1e-12)


@pytest.mark.parametrize("fft_size", [8, 16, 64, 256])
@pytest.mark.parametrize("window", ["rectangular", "hann"])
def test_oracle_equivalence_across_sizes(fft_size, window):
    rng = np.random.default_rng(fft_size)
    n_avg = 4
    x = rng.standard_normal(fft_size * n_avg) + 1j * rng.standard_normal(fft_size * n_avg)
    seg = psd_pipeline(make_block(x), fft_size, n_avg, window)
    oracle = dft_psd_oracle(x, fft_size, n_avg, window)
    np.testing.assert_allclose(seg.bins, oracle, rtol=1e-6,
                               atol=oracle.max() * 1e-12)


def test_parseval_rectangular():
    rng = np.random.default_rng(7)
    for n_avg in (1, 4, 16):
        x = rng.standard_normal(256 * n_avg) + 1j * rng.standard_normal(256 * n_avg)
        seg = psd_pipeline(make_block(x), 256, n_avg)
        energy = np.sum(np.abs(x) ** 2)
        assert np.sum(seg.bins) * n_avg * 256 == pytest.approx(energy, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       fft_size=st.sampled_from([8, 16, 64]),
       n_avg=st.integers(1, 8))
def test_parseval_property(seed, fft_size, n_avg):
    rng = np.random.default_rng(seed)
    n = fft_size * n_avg
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    seg = psd_pipeline(make_block(x), fft_size, n_avg)
    assert np.sum(seg.bins) * n_avg * fft_size == pytest.approx(
        np.sum(np.abs(x) ** 2), rel=1e-9)


def test_hann_total_power_close_to_rectangular():
    rng = np.random.default_rng(3)
    n_avg, fft_size = 64, 256
    x = rng.standard_normal(fft_size * n_avg) + 1j * rng.standard_normal(fft_size * n_avg)
    block = make_block(x)
    p_rect = np.sum(psd_pipeline(block, fft_size, n_avg, "rectangular").bins)
    p_hann = np.sum(psd_pipeline(block, fft_size, n_avg, "hann").bins)
    assert abs(p_hann - p_rect) / p_rect < 0.03


def test_segment_metadata():
    x = np.ones(1024)
    seg = psd_pipeline(make_block(x), 256, 4)
    assert seg.bin_width == pytest.approx(FS / 256)
    assert len(seg.bins) == 256
    assert seg.n_avg == 4
    assert seg.dwell_ms == pytest.approx(1000 * 1024 / FS)
    centers = seg.bin_centers()
    assert centers[0] == pytest.approx(600e6 - FS / 2)
    assert centers[128] == pytest.approx(600e6)   # DC lands mid-array


def test_rejects_bad_arguments():
    block = make_block(np.ones(100))
    with pytest.raises(InvalidArgument):
        psd_pipeline(block, fft_size=100, n_avg=1)      # not a power of two
    with pytest.raises(InvalidArgument):
        psd_pipeline(block, fft_size=256, n_avg=1)      # too few samples
    with pytest.raises(InvalidArgument):
        psd_pipeline(make_block(np.ones(256)), 256, 1, window="flattop")
