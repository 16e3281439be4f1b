"""Channel application (AWGN, optional block flat fading) and Eb/N0 bookkeeping.

Symbols have unit average energy, so for bits-per-symbol k the per-component
noise standard deviation at a given Eb/N0 is sigma = sqrt(1 / (2 k 10^(dB/10))).
``ebn0_db = math.inf`` is the noiseless sentinel (sigma = 0), used for exact
tests. All randomness is drawn from an explicit seed; equal seeds give
bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidOrderError, InvalidRateError, LengthError
from .modem import SymbolBlock

__all__ = [
    "ChannelKind",
    "ChannelModel",
    "LinkBudget",
    "ebn0_to_noise_sigma",
    "apply_channel",
    "free_space_path_loss_db",
    "link_budget_ebn0",
]


class ChannelKind(Enum):
    AWGN = "awgn"
    FLAT_RAYLEIGH = "flat-rayleigh"


@dataclass(frozen=True)
class ChannelModel:
    """Channel parameters: noise level, kind, and (unused by AWGN) interference."""

    kind: ChannelKind = ChannelKind.AWGN
    ebn0_db: float = math.inf
    interference_power: float = 0.0

    def __post_init__(self):
        if math.isnan(self.ebn0_db) or self.ebn0_db == -math.inf:
            raise ValueError("ebn0_db must be a real value or +inf")
        if self.interference_power < 0:
            raise ValueError("interference_power must be >= 0")


@dataclass(frozen=True)
class LinkBudget:
    """Free-space link budget realizing the distance -> Eb/N0 mapping."""

    tx_power_dbm: float = 20.0
    antenna_gains_db: float = 0.0
    carrier_hz: float = 9.0e8
    noise_psd_dbm_hz: float = -174.0
    distance_m: float = 100.0

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("distance_m must be > 0")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be > 0")


def ebn0_to_noise_sigma(ebn0_db: float, bits_per_symbol: int) -> float:
    """Per-component noise standard deviation for unit-energy symbols."""
    if bits_per_symbol < 1:
        raise InvalidOrderError(f"bits_per_symbol must be >= 1, got {bits_per_symbol}")
    if ebn0_db == math.inf:
        return 0.0
    ebn0_lin = 10.0 ** (ebn0_db / 10.0)
    return math.sqrt(1.0 / (2.0 * bits_per_symbol * ebn0_lin))


def _normalize_seed(seed) -> tuple:
    if isinstance(seed, (tuple, list)):
        return tuple(int(s) for s in seed)
    return (int(seed),)


def child_seed(seed, *tags: int) -> tuple:
    """Derive a deterministic sub-seed; distinct tags give independent streams."""
    return _normalize_seed(seed) + tuple(int(t) for t in tags)


def apply_channel(
    block: SymbolBlock, model: ChannelModel, bits_per_symbol: int, rng_seed
) -> SymbolBlock:
    """Pass a symbol block through the channel.

    AWGN adds i.i.d. complex Gaussian noise. FLAT_RAYLEIGH additionally
    multiplies the whole block by one complex gain with E[|g|^2] = 1
    (Rayleigh magnitude, uniform phase) drawn per call, before the noise.
    """
    if len(block) == 0:
        raise LengthError("cannot apply a channel to an empty symbol block")
    rng = np.random.default_rng(_normalize_seed(rng_seed))
    symbols = block.symbols

    if model.kind == ChannelKind.FLAT_RAYLEIGH:
        g = complex(rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
        symbols = symbols * g

    sigma = ebn0_to_noise_sigma(model.ebn0_db, bits_per_symbol)
    if sigma > 0.0:
        noise = rng.standard_normal((len(block), 2)) * sigma
        symbols = symbols + noise[:, 0] + 1j * noise[:, 1]
    elif model.kind == ChannelKind.AWGN:
        symbols = symbols.copy()

    return SymbolBlock(symbols, block.scheme_id)


def free_space_path_loss_db(distance_m: float, carrier_hz: float) -> float:
    """FSPL = 20 log10(d) + 20 log10(f) - 147.55 (d in meters, f in Hz)."""
    return 20.0 * math.log10(distance_m) + 20.0 * math.log10(carrier_hz) - 147.55


def link_budget_ebn0(budget: LinkBudget, bit_rate_bps: float) -> float:
    """Eb/N0 in dB delivered by the link budget at the given bit rate."""
    if bit_rate_bps <= 0:
        raise InvalidRateError(f"bit_rate_bps must be > 0, got {bit_rate_bps}")
    rx_power_dbm = (
        budget.tx_power_dbm
        + budget.antenna_gains_db
        - free_space_path_loss_db(budget.distance_m, budget.carrier_hz)
    )
    return rx_power_dbm - budget.noise_psd_dbm_hz - 10.0 * math.log10(bit_rate_bps)
