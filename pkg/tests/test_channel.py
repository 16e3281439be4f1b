"""Tests for AWGN/fading application and the link-budget Eb/N0 mapping."""

import math

import numpy as np
import pytest

from modswitch.channel import (
    ChannelKind,
    ChannelModel,
    LinkBudget,
    apply_channel,
    ebn0_to_noise_sigma,
    free_space_path_loss_db,
    link_budget_ebn0,
)
from modswitch.errors import InvalidOrderError, InvalidRateError, LengthError
from modswitch.modem import SchemeId, SymbolBlock, build_scheme, map_bits

# Q(sqrt(2)) from a 40-digit erfc evaluation.
Q_SQRT2 = 0.07864960352514257


class TestNoiseSigma:
    def test_zero_db_one_bit(self):
        assert ebn0_to_noise_sigma(0.0, 1) == pytest.approx(math.sqrt(0.5), rel=1e-15)

    def test_ten_db_one_bit(self):
        assert ebn0_to_noise_sigma(10.0, 1) == pytest.approx(math.sqrt(1 / 20), rel=1e-15)

    def test_zero_db_two_bits(self):
        assert ebn0_to_noise_sigma(0.0, 2) == pytest.approx(0.5, rel=1e-15)

    def test_infinite_sentinel(self):
        assert ebn0_to_noise_sigma(math.inf, 4) == 0.0

    def test_invalid_order(self):
        with pytest.raises(InvalidOrderError):
            ebn0_to_noise_sigma(0.0, 0)


class TestApplyChannel:
    def test_noiseless_sentinel_is_identity(self):
        bpsk = build_scheme(SchemeId.BPSK)
        block = map_bits([0, 1, 1, 0], bpsk)
        out = apply_channel(block, ChannelModel(ebn0_db=math.inf), 1, rng_seed=1)
        np.testing.assert_array_equal(out.symbols, block.symbols)

    def test_deterministic_under_seed(self):
        bpsk = build_scheme(SchemeId.BPSK)
        block = map_bits([0, 1] * 100, bpsk)
        model = ChannelModel(ebn0_db=3.0)
        a = apply_channel(block, model, 1, rng_seed=42)
        b = apply_channel(block, model, 1, rng_seed=42)
        np.testing.assert_array_equal(a.symbols, b.symbols)
        c = apply_channel(block, model, 1, rng_seed=43)
        assert not np.array_equal(a.symbols, c.symbols)

    def test_empty_block_rejected(self):
        block = SymbolBlock(np.zeros(0, dtype=complex), SchemeId.BPSK)
        with pytest.raises(LengthError):
            apply_channel(block, ChannelModel(ebn0_db=5.0), 1, rng_seed=0)

    def test_noise_variance(self):
        # Per-component empirical variance within 1% of sigma^2 at 1e6 samples.
        bpsk = build_scheme(SchemeId.BPSK)
        n = 1_000_000
        block = SymbolBlock(np.ones(n, dtype=complex), SchemeId.BPSK)
        sigma = ebn0_to_noise_sigma(0.0, 1)
        out = apply_channel(block, ChannelModel(ebn0_db=0.0), 1, rng_seed=5)
        noise = out.symbols - block.symbols
        assert np.var(noise.real) == pytest.approx(sigma**2, rel=0.01)
        assert np.var(noise.imag) == pytest.approx(sigma**2, rel=0.01)

    def test_bpsk_error_rate_matches_q_function(self):
        # Sign-decision error rate at 0 dB versus Q(sqrt(2)), 3 binomial sigma.
        bpsk = build_scheme(SchemeId.BPSK)
        n = 1_000_000
        block = SymbolBlock(np.ones(n, dtype=complex), SchemeId.BPSK)
        out = apply_channel(block, ChannelModel(ebn0_db=0.0), 1, rng_seed=17)
        rate = np.mean(out.symbols.real < 0)
        three_sigma = 3 * math.sqrt(Q_SQRT2 * (1 - Q_SQRT2) / n)
        assert abs(rate - Q_SQRT2) <= three_sigma

    def test_rayleigh_gain_energy(self):
        # One gain per call; with the noiseless sentinel the output is the
        # gain itself. E[|g|^2] = 1 within 2% over 1e5 draws.
        block = SymbolBlock(np.ones(1, dtype=complex), SchemeId.BPSK)
        model = ChannelModel(ChannelKind.FLAT_RAYLEIGH, math.inf)
        draws = np.empty(100_000)
        for i in range(len(draws)):
            out = apply_channel(block, model, 1, rng_seed=(1234, i))
            draws[i] = abs(out.symbols[0]) ** 2
        assert np.mean(draws) == pytest.approx(1.0, rel=0.02)

    def test_rayleigh_same_gain_within_block(self):
        block = SymbolBlock(np.ones(64, dtype=complex), SchemeId.BPSK)
        model = ChannelModel(ChannelKind.FLAT_RAYLEIGH, math.inf)
        out = apply_channel(block, model, 1, rng_seed=9)
        np.testing.assert_allclose(out.symbols, out.symbols[0], rtol=0, atol=1e-15)


class TestLinkBudget:
    def test_fspl_reference_point(self):
        # 20 log10(100) + 20 log10(9e8) - 147.55, evaluated at high precision.
        assert free_space_path_loss_db(100.0, 9.0e8) == pytest.approx(
            71.53485018878649, rel=1e-12
        )

    def test_distance_doubling_costs_6db(self):
        budget = LinkBudget(distance_m=100.0)
        near = link_budget_ebn0(budget, 1e6)
        far = link_budget_ebn0(LinkBudget(distance_m=200.0), 1e6)
        assert near - far == pytest.approx(20 * math.log10(2), abs=1e-9)

    def test_rate_doubling_costs_3db(self):
        budget = LinkBudget()
        slow = link_budget_ebn0(budget, 1e6)
        fast = link_budget_ebn0(budget, 2e6)
        assert slow - fast == pytest.approx(10 * math.log10(2), abs=1e-9)

    def test_invalid_rate(self):
        with pytest.raises(InvalidRateError):
            link_budget_ebn0(LinkBudget(), 0.0)

    def test_invalid_fields(self):
        with pytest.raises(ValueError):
            LinkBudget(distance_m=0.0)
        with pytest.raises(ValueError):
            ChannelModel(ebn0_db=math.nan)
