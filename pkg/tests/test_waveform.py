import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radcomsim import SPEED_OF_LIGHT
from radcomsim.errors import DimensionMismatchError, InvalidParameterError, UndefinedPaprError
from radcomsim.waveform import (OfdmConfig, OfdmFrame, generate_frame, modulate, papr_db,
                                qpsk_demap, qpsk_map, range_resolution)


def test_config_derived_values(cfg):
    assert cfg.subcarrier_spacing * cfg.n_subcarriers == cfg.bandwidth
    assert cfg.cp_length == 8
    assert cfg.symbol_duration == pytest.approx(100e-9)
    assert cfg.wavelength == pytest.approx(0.01153, rel=1e-3)


@pytest.mark.parametrize("kw", [dict(n_subcarriers=24), dict(n_subcarriers=1),
                                dict(cp_fraction=1.0), dict(carrier=1e8),
                                dict(n_symbols=0)])
def test_config_rejects(kw):
    with pytest.raises(InvalidParameterError):
        OfdmConfig(**kw)


def test_frame_deterministic(cfg):
    a, b = generate_frame(cfg, 7), generate_frame(cfg, 7)
    assert a.symbols.tobytes() == b.symbols.tobytes()
    assert a.bits.tobytes() == b.bits.tobytes()


def test_frame_shape_and_modulus():
    cfg = OfdmConfig(n_subcarriers=32, n_symbols=16)
    fr = generate_frame(cfg, 1)
    assert fr.bits.size == 1024
    assert np.allclose(np.abs(fr.symbols), 1.0, atol=1e-15)


def test_seeds_differ(cfg):
    assert not np.array_equal(generate_frame(cfg, 1).symbols, generate_frame(cfg, 2).symbols)


def test_gray_mapping_table():
    s = qpsk_map([0, 0, 0, 1, 1, 1, 1, 0]) * math.sqrt(2)
    assert list(s) == [1 + 1j, 1 - 1j, -1 - 1j, -1 + 1j]
    # Neighbouring constellation points differ in exactly one bit.
    for a, b in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        ba = qpsk_demap(s[a:a + 1])
        bb = qpsk_demap(s[b:b + 1])
        assert np.count_nonzero(ba != bb) == 1


def test_bits_round_trip(frame):
    assert np.array_equal(qpsk_demap(frame.symbols.T), frame.bits)


def test_all_ones_is_impulse():
    cfg = OfdmConfig(n_symbols=1)
    sig = modulate(OfdmFrame(np.ones((32, 1))), cfg)
    body = sig.body[0]
    assert body[0] == pytest.approx(math.sqrt(32))
    assert np.allclose(body[1:], 0, atol=1e-12)
    assert papr_db(sig) == pytest.approx(10 * math.log10(32))


def test_single_tone_constant_modulus():
    cfg = OfdmConfig(n_symbols=1)
    d = np.zeros((32, 1), dtype=complex)
    d[0, 0] = 1
    sig = modulate(OfdmFrame(d), cfg)
    assert np.allclose(np.abs(sig.body), 1 / math.sqrt(32), atol=1e-15)
    assert papr_db(sig) == pytest.approx(0.0, abs=1e-9)


def test_cyclic_prefix_copies_tail(frame, cfg):
    sig = modulate(frame, cfg)
    assert sig.samples.shape == (cfg.n_symbols, 40)
    assert np.array_equal(sig.samples[:, :8], sig.samples[:, -8:])


def test_modulate_mismatch(cfg):
    with pytest.raises(DimensionMismatchError):
        modulate(OfdmFrame(np.ones((16, 4))), cfg)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval(seed):
    cfg = OfdmConfig(n_symbols=8)
    fr = generate_frame(cfg, seed)
    sig = modulate(fr, cfg)
    e_f = np.sum(np.abs(fr.symbols) ** 2)
    e_t = np.sum(np.abs(sig.body) ** 2)
    assert abs(e_t - e_f) <= 1e-9 * e_f


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_papr_nonnegative(seed):
    cfg = OfdmConfig(n_symbols=4)
    assert papr_db(modulate(generate_frame(cfg, seed), cfg)) >= 0.0


def test_random_qpsk_median_papr():
    cfg = OfdmConfig(n_symbols=1000)
    per = papr_db(modulate(generate_frame(cfg, 5), cfg), per_symbol=True)
    assert per.shape == (1000,)
    assert 5.0 <= np.median(per) <= 12.0


def test_papr_zero_signal():
    cfg = OfdmConfig(n_symbols=1)
    with pytest.raises(UndefinedPaprError):
        papr_db(modulate(OfdmFrame(np.zeros((32, 1))), cfg))


def test_range_resolution_values():
    assert range_resolution(4e9) == pytest.approx(0.0375, rel=2e-3)
    assert range_resolution(400e6) == pytest.approx(SPEED_OF_LIGHT / 8e8)
    assert range_resolution(1e9) == pytest.approx(0.15, rel=2e-3)


@given(st.floats(1e3, 1e12), st.floats(1.001, 100.0))
def test_range_resolution_decreasing(b, factor):
    assert range_resolution(b * factor) < range_resolution(b)
