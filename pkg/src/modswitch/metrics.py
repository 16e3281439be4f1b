"""Closed-form BER curves and Monte Carlo BER measurement.

The closed form for a Gray-labeled rectangular grid with L1 x L2 levels and
k bits per symbol is the nearest-neighbor approximation

    Pb(gamma_b) = c * Q(sqrt(a * gamma_b))
    c = (2/k) * ((L1-1)/L1 + (L2-1)/L2)
    a = 6k / (L1^2 + L2^2 - 2)

which reduces to Q(sqrt(2 gamma_b)) for BPSK and QPSK and to
(4/k)(1 - 1/sqrt(M)) Q(sqrt(3k gamma_b / (M - 1))) for square M-QAM. The
constants are computed as exact fractions, so BPSK and QPSK evaluate
bit-identically. The Monte Carlo path (map, AWGN, demap, count) is fully
independent of the closed form and is the ground truth the curves are
checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import erfc, erfcinv

from . import channel
from .errors import InvalidRangeError, LengthError, NoTxSchemeError
from .modem import ModulationScheme, SchemeId, demap_symbols, map_bits

__all__ = [
    "BerEstimate",
    "q_function",
    "q_inverse",
    "theoretical_ber",
    "theoretical_ber_lin",
    "required_ebn0_lin",
    "measure_ber",
    "ber_sweep",
]


@dataclass(frozen=True)
class BerEstimate:
    """A Monte Carlo BER with its 95% normal-approximation half-width."""

    bit_errors: int
    bits_total: int
    ber: float
    ci95_halfwidth: float

    @classmethod
    def from_counts(cls, bit_errors: int, bits_total: int) -> "BerEstimate":
        ber = bit_errors / bits_total
        half = 1.96 * math.sqrt(ber * (1.0 - ber) / bits_total)
        return cls(bit_errors, bits_total, ber, half)


def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 * erfc(x / sqrt(2))."""
    result = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(result) if np.ndim(x) == 0 else result


def q_inverse(y: float) -> float:
    """Inverse of q_function on (0, 1)."""
    return float(math.sqrt(2.0) * erfcinv(2.0 * y))


@lru_cache(maxsize=None)
def _ber_constants(scheme_id: SchemeId) -> tuple[float, float]:
    """(c, a) for Pb = c * Q(sqrt(a * gamma_b)), exact per-scheme fractions."""
    from .modem import build_scheme

    scheme = build_scheme(scheme_id)
    if scheme.order == 0:
        raise NoTxSchemeError("NoTx has no bit error rate")
    l1, l2 = scheme.axis_levels
    k = scheme.bits_per_symbol
    c = Fraction(2, k) * (Fraction(l1 - 1, l1) + Fraction(l2 - 1, l2))
    a = Fraction(6 * k, l1 * l1 + l2 * l2 - 2)
    return float(c), float(a)


def theoretical_ber_lin(scheme: ModulationScheme, ebn0_lin: float) -> float:
    """Closed-form BER at a linear Eb/N0 (gamma_b >= 0)."""
    c, a = _ber_constants(scheme.scheme_id)
    return c * q_function(math.sqrt(a * ebn0_lin))


def theoretical_ber(scheme: ModulationScheme, ebn0_db: float) -> float:
    """Closed-form BER at an Eb/N0 given in dB (+inf gives exactly 0)."""
    if scheme.scheme_id == SchemeId.NOTX:
        raise NoTxSchemeError("NoTx has no bit error rate")
    if ebn0_db == math.inf:
        return 0.0
    return theoretical_ber_lin(scheme, 10.0 ** (ebn0_db / 10.0))


def required_ebn0_lin(scheme: ModulationScheme, target_ber: float) -> float:
    """Smallest linear Eb/N0 at which the closed-form BER meets ``target_ber``.

    Returns 0 when the target is met at every Eb/N0 (target at or above the
    scheme's zero-SNR BER of c/2).
    """
    if scheme.scheme_id == SchemeId.NOTX:
        raise NoTxSchemeError("NoTx has no bit error rate")
    c, a = _ber_constants(scheme.scheme_id)
    if target_ber >= c / 2.0:
        return 0.0
    return q_inverse(target_ber / c) ** 2 / a


def measure_ber(
    scheme: ModulationScheme, ebn0_db: float, bits_total: int, seed
) -> BerEstimate:
    """Monte Carlo BER: uniform random bits, map, AWGN, demap, count errors.

    ``bits_total`` must be a positive multiple of the scheme's bits per
    symbol. Deterministic for a given seed.
    """
    if scheme.scheme_id == SchemeId.NOTX:
        raise NoTxSchemeError("cannot measure BER of NoTx")
    k = scheme.bits_per_symbol
    if bits_total < k or bits_total % k != 0:
        raise LengthError(
            f"bits_total must be a positive multiple of k={k}, got {bits_total}"
        )
    rng = np.random.default_rng(channel.child_seed(seed, 0))
    bits = rng.integers(0, 2, size=bits_total, dtype=np.int8)
    tx = map_bits(bits, scheme)
    model = channel.ChannelModel(channel.ChannelKind.AWGN, ebn0_db)
    rx = channel.apply_channel(tx, model, k, channel.child_seed(seed, 1))
    errors = int(np.count_nonzero(demap_symbols(rx, scheme) != bits))
    return BerEstimate.from_counts(errors, bits_total)


def ber_sweep(
    scheme: ModulationScheme, ebn0_grid, bits_per_point: int, seed
) -> list[tuple[float, BerEstimate, float]]:
    """Measured and closed-form BER over an ascending Eb/N0 grid.

    Each grid point uses an independent sub-seed derived from ``seed``, so
    points may be evaluated in any order (or in parallel) with identical
    results; output order follows the grid.
    """
    grid = [float(g) for g in ebn0_grid]
    if not grid:
        raise InvalidRangeError("ebn0_grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidRangeError("ebn0_grid must be strictly ascending")
    out = []
    for i, ebn0_db in enumerate(grid):
        est = measure_ber(scheme, ebn0_db, bits_per_point, channel.child_seed(seed, i))
        out.append((ebn0_db, est, theoretical_ber(scheme, ebn0_db)))
    return out
