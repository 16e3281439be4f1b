"""Gray-mapped digital modems: constellations, bit mapping and hard-decision demapping.

Every constellation is a rectangular I/Q grid normalized to unit average
symbol energy. Points are stored indexed by their bit label, so
``scheme.points[label]`` is the transmit symbol whose k-bit label (MSB
first) equals ``label``. Per axis, labels follow the binary-reflected Gray
sequence walking the amplitude levels from most positive to most negative,
which makes every nearest-neighbor pair differ in exactly one bit.

Conventions fixed for bit-exact reproducibility:
    BPSK   0 -> +1,  1 -> -1
    QPSK   first bit selects I, second Q; 0 -> +1/sqrt(2), 1 -> -1/sqrt(2)
    QAM    first ceil(k/2) bits select the I level, the rest the Q level
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .errors import LengthError, NoTxSchemeError

__all__ = [
    "SchemeId",
    "ModulationScheme",
    "SymbolBlock",
    "SCHEME_NAMES",
    "SCHEME_BY_NAME",
    "build_scheme",
    "map_bits",
    "demap_symbols",
]


class SchemeId(IntEnum):
    """Modulation identifiers; the integer value is the on-air mod_id."""

    NOTX = 0
    BPSK = 1
    QPSK = 2
    QAM8 = 3
    QAM16 = 4
    QAM32 = 5
    QAM64 = 6


SCHEME_NAMES = {s: s.name.lower() for s in SchemeId}
SCHEME_BY_NAME = {name: s for s, name in SCHEME_NAMES.items()}

# Levels per I and Q axis. A Q count of 1 means a real-only constellation.
# Odd-k schemes are rectangular grids (wider I axis), which keeps a perfect
# per-axis Gray labeling available at every order.
_GRID_SHAPE = {
    SchemeId.BPSK: (2, 1),
    SchemeId.QPSK: (2, 2),
    SchemeId.QAM8: (4, 2),
    SchemeId.QAM16: (4, 4),
    SchemeId.QAM32: (8, 4),
    SchemeId.QAM64: (8, 8),
}


@dataclass(frozen=True, eq=False)
class ModulationScheme:
    """A constellation with Gray bit mapping and unit average symbol energy.

    Attributes
    ----------
    scheme_id : SchemeId
    order : int
        Number of constellation points M (0 for NoTx).
    bits_per_symbol : int
        k = log2(M) (0 for NoTx).
    axis_levels : tuple[int, int]
        Amplitude levels on the I and Q axes ((0, 0) for NoTx).
    points : np.ndarray
        Complex array of length M; ``points[label]`` is the symbol for the
        k-bit label ``label`` read MSB first.
    """

    scheme_id: SchemeId
    order: int
    bits_per_symbol: int
    axis_levels: tuple[int, int]
    points: np.ndarray

    @property
    def bit_labels(self) -> np.ndarray:
        """Label of each point; identity because points are stored by label."""
        return np.arange(self.order)

    @property
    def name(self) -> str:
        return SCHEME_NAMES[self.scheme_id]


@dataclass(frozen=True, eq=False)
class SymbolBlock:
    """A run of complex baseband symbols tagged with the producing scheme."""

    symbols: np.ndarray
    scheme_id: SchemeId

    def __len__(self) -> int:
        return len(self.symbols)


def _gray_to_index(g: np.ndarray) -> np.ndarray:
    """Invert the binary-reflected Gray code (labels are at most 8 bits)."""
    idx = g.copy()
    idx ^= idx >> 1
    idx ^= idx >> 2
    idx ^= idx >> 4
    return idx


def _axis_values(n_levels: int, labels: np.ndarray) -> np.ndarray:
    """Unscaled amplitude for each axis label.

    Gray label g sits at position p = gray_inv(g) in the walk from the most
    positive level (n_levels - 1) down to the most negative (-(n_levels - 1)).
    """
    if n_levels == 1:
        return np.zeros(len(labels))
    pos = _gray_to_index(labels)
    return (n_levels - 1 - 2 * pos).astype(float)


@lru_cache(maxsize=None)
def build_scheme(scheme_id: SchemeId) -> ModulationScheme:
    """Construct the constellation for ``scheme_id``.

    NoTx yields an empty constellation with k = 0. All other schemes are
    rectangular Gray-labeled grids scaled so the mean squared magnitude over
    the M points is exactly 1.
    """
    scheme_id = SchemeId(scheme_id)
    if scheme_id == SchemeId.NOTX:
        points = np.zeros(0, dtype=complex)
        points.flags.writeable = False
        return ModulationScheme(scheme_id, 0, 0, (0, 0), points)

    n_i, n_q = _GRID_SHAPE[scheme_id]
    k_i = int(n_i).bit_length() - 1
    k_q = int(n_q).bit_length() - 1
    k = k_i + k_q
    order = n_i * n_q

    labels = np.arange(order)
    i_vals = _axis_values(n_i, labels >> k_q)
    q_vals = _axis_values(n_q, labels & (n_q - 1))
    # Mean of {1, 9, ..., (n-1)^2} over n levels is (n^2 - 1) / 3.
    energy = (n_i**2 - 1) / 3 + (n_q**2 - 1) / 3
    points = (i_vals + 1j * q_vals) / np.sqrt(energy)
    points.flags.writeable = False
    return ModulationScheme(scheme_id, order, k, (n_i, n_q), points)


def map_bits(bits, scheme: ModulationScheme) -> SymbolBlock:
    """Map a bit sequence onto constellation symbols.

    Consecutive groups of k bits (MSB first) select points by Gray label.
    The bit count must be a multiple of k; callers pad (the frame layer
    does this for payloads).
    """
    if scheme.scheme_id == SchemeId.NOTX:
        raise NoTxSchemeError("cannot map bits with the NoTx scheme")
    bits = np.asarray(bits, dtype=np.int64)
    k = scheme.bits_per_symbol
    if bits.size % k != 0:
        raise LengthError(
            f"bit count {bits.size} is not a multiple of k={k} for {scheme.name}"
        )
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = bits.reshape(-1, k) @ weights
    return SymbolBlock(scheme.points[labels], scheme.scheme_id)


def demap_symbols(block: SymbolBlock, scheme: ModulationScheme) -> np.ndarray:
    """Hard-decision demap: nearest constellation point by Euclidean distance.

    Ties go to the lowest bit label. Demapping with a scheme other than the
    one that produced the block is allowed; it models a transmitter/receiver
    modulation mismatch.
    """
    if scheme.scheme_id == SchemeId.NOTX:
        raise NoTxSchemeError("cannot demap symbols with the NoTx scheme")
    symbols = np.asarray(block.symbols)
    k = scheme.bits_per_symbol
    p_re = scheme.points.real
    p_im = scheme.points.imag

    labels = np.empty(len(symbols), dtype=np.int64)
    # Chunked so the distance matrix stays small for long blocks.
    chunk = 1 << 15
    for start in range(0, len(symbols), chunk):
        s = symbols[start : start + chunk]
        d2 = (s.real[:, None] - p_re) ** 2 + (s.imag[:, None] - p_im) ** 2
        labels[start : start + chunk] = d2.argmin(axis=1)

    shifts = np.arange(k - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.int8).reshape(-1)
