"""Modulation selection: local cost, expected cost over an environment, QoS modes.

The local cost of a transaction is

    gamma = (alpha * BER) * (beta * ebn0_lin) / (chi * rate / rate_ref)

with BER evaluated at the fading/interference-adjusted Eb/N0 and rate from
bits-per-symbol / symbol period. rate_ref (default 1 Mbps) makes gamma
dimensionless; lower is better. The expected cost averages the local cost
over a discrete environment distribution with each state's scheme overridden
by a per-state choice.

A candidate is feasible when its closed-form BER at the operating Eb/N0
meets target_ber and its bit rate meets min_rate_bps. All selection modes
share that gate and rank the feasible set differently:

    MIN_BER      lowest closed-form BER
    MAX_RATE     highest bit rate
    MIN_ENERGY   lowest required Eb/N0 at target_ber (radiated-energy proxy)
    COST_OPTIMAL lowest local cost

NoTx is the fallback when no candidate is feasible ("no bit" state); it
never competes inside the argmin. Ties break to the lowest order M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

from .errors import (
    IncompleteChoiceError,
    InvalidPeriodError,
    InvalidRangeError,
)
from .metrics import required_ebn0_lin, theoretical_ber_lin
from .modem import ModulationScheme, SchemeId, build_scheme

__all__ = [
    "SelectionMode",
    "QoSPolicy",
    "EnvTuple",
    "EnvDistribution",
    "POLICY_PRESETS",
    "MANDATORY_SCHEMES",
    "EXTENDED_SCHEMES",
    "bit_rate",
    "local_cost",
    "expected_cost",
    "uniform_env_distribution",
    "select_modulation",
    "threshold_table",
    "CandidateReport",
    "SelectionReport",
]

# The baseline discrete order set, plus the extended set with the two
# rectangular odd-k grids.
MANDATORY_SCHEMES = (SchemeId.BPSK, SchemeId.QPSK, SchemeId.QAM16, SchemeId.QAM64)
EXTENDED_SCHEMES = (
    SchemeId.BPSK,
    SchemeId.QPSK,
    SchemeId.QAM8,
    SchemeId.QAM16,
    SchemeId.QAM32,
    SchemeId.QAM64,
)


class SelectionMode(Enum):
    MIN_BER = "min-ber"
    MAX_RATE = "max-rate"
    MIN_ENERGY = "min-energy"
    COST_OPTIMAL = "cost-optimal"


@dataclass(frozen=True)
class QoSPolicy:
    """Selection weights, constraints and mode."""

    alpha: float = 1.0
    beta: float = 1.0
    chi: float = 1.0
    target_ber: float = 1e-3
    min_rate_bps: float = 0.0
    mode: SelectionMode = SelectionMode.MAX_RATE
    rate_ref_bps: float = 1.0e6

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.chi <= 0:
            raise ValueError("chi must be > 0")
        if not 0.0 < self.target_ber < 1.0:
            raise ValueError("target_ber must be in (0, 1)")
        if self.min_rate_bps < 0:
            raise ValueError("min_rate_bps must be >= 0")
        if self.rate_ref_bps <= 0:
            raise ValueError("rate_ref_bps must be > 0")


# Named presets: the two QoS cases (microcode distribution, video) plus the
# plain objective modes.
POLICY_PRESETS: Mapping[str, QoSPolicy] = {
    "max-rate": QoSPolicy(mode=SelectionMode.MAX_RATE, target_ber=1e-3),
    "min-ber": QoSPolicy(mode=SelectionMode.MIN_BER, min_rate_bps=0.0),
    "cost-optimal": QoSPolicy(mode=SelectionMode.COST_OPTIMAL),
    "microcode": QoSPolicy(
        mode=SelectionMode.MIN_ENERGY, target_ber=5e-5, min_rate_bps=3e6
    ),
    "video": QoSPolicy(
        mode=SelectionMode.MIN_ENERGY, target_ber=2e-4, min_rate_bps=12e6
    ),
}


@dataclass(frozen=True)
class EnvTuple:
    """One environment state: [Eb/N0, scheme, Ts, fading gain, interference, distance]."""

    ebn0_db: float
    scheme_id: SchemeId = SchemeId.NOTX
    symbol_period_s: float = 1e-6
    fading_gain: float = 1.0
    interference_power: float = 0.0
    distance_m: float = 100.0

    def __post_init__(self):
        if self.symbol_period_s <= 0:
            raise InvalidPeriodError("symbol_period_s must be > 0")
        if self.distance_m <= 0:
            raise ValueError("distance_m must be > 0")
        if self.fading_gain < 0:
            raise ValueError("fading_gain must be >= 0")
        if self.interference_power < 0:
            raise ValueError("interference_power must be >= 0")

    @property
    def effective_ebn0_lin(self) -> float:
        """Linear Eb/N0 adjusted for the fading amplitude gain and interference.

        Interference is treated as extra white noise normalized to N0, so the
        effective per-bit SNR is ebn0 * gain^2 / (1 + i). Defaults (gain 1,
        i 0) leave the AWGN value untouched.
        """
        base = 10.0 ** (self.ebn0_db / 10.0)
        return base * self.fading_gain**2 / (1.0 + self.interference_power)


@dataclass(frozen=True)
class EnvDistribution:
    """Discrete probability mass over environment states."""

    support: tuple[EnvTuple, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise InvalidRangeError("support and probs must have equal length")
        if any(p < 0 for p in self.probs):
            raise InvalidRangeError("probabilities must be >= 0")
        if abs(math.fsum(self.probs) - 1.0) > 1e-9:
            raise InvalidRangeError("probabilities must sum to 1")


def bit_rate(scheme: ModulationScheme, symbol_period_s: float) -> float:
    """Bit rate log2(M) / Ts in bit/s; NoTx transmits nothing and returns 0."""
    if symbol_period_s <= 0:
        raise InvalidPeriodError(f"symbol_period_s must be > 0, got {symbol_period_s}")
    return scheme.bits_per_symbol / symbol_period_s


def local_cost(z: EnvTuple, policy: QoSPolicy) -> float:
    """Cost of one transaction; lower is better.

    NoTx costs +inf while the policy requires a nonzero rate, and 0 when
    min_rate_bps is 0 (a void transaction satisfies a void requirement).
    """
    if z.scheme_id == SchemeId.NOTX:
        return math.inf if policy.min_rate_bps > 0 else 0.0
    scheme = build_scheme(z.scheme_id)
    gamma_b = z.effective_ebn0_lin
    ber = theoretical_ber_lin(scheme, gamma_b)
    rate = bit_rate(scheme, z.symbol_period_s)
    return (policy.alpha * ber) * (policy.beta * gamma_b) / (
        policy.chi * rate / policy.rate_ref_bps
    )


def expected_cost(
    dist: EnvDistribution,
    scheme_choice: Callable[[EnvTuple], SchemeId] | Mapping[EnvTuple, SchemeId],
    policy: QoSPolicy,
) -> float:
    """Probability-weighted local cost with each state's scheme overridden.

    ``scheme_choice`` maps every support state to a scheme id (callable or
    mapping); a missing state raises IncompleteChoiceError.
    """
    if callable(scheme_choice):
        lookup = scheme_choice
    else:
        def lookup(z, _m=scheme_choice):
            if z not in _m:
                raise IncompleteChoiceError(f"no scheme choice for state {z}")
            return _m[z]

    terms = []
    for z, p in zip(dist.support, dist.probs):
        chosen = lookup(z)
        terms.append(p * local_cost(replace(z, scheme_id=SchemeId(chosen)), policy))
    return math.fsum(terms)


def uniform_env_distribution(
    lo_db: float, hi_db: float, step_db: float, template: EnvTuple
) -> EnvDistribution:
    """Equal-probability states on the Eb/N0 grid lo, lo+step, ..., hi.

    Probabilities are normalized to sum to 1 exactly as fractions of the
    point count. Other fields are copied from ``template``.
    """
    if step_db <= 0:
        raise InvalidRangeError("step_db must be > 0")
    if hi_db < lo_db:
        raise InvalidRangeError("hi_db must be >= lo_db")
    n = int(math.floor((hi_db - lo_db) / step_db + 1e-9)) + 1
    support = tuple(
        replace(template, ebn0_db=lo_db + i * step_db) for i in range(n)
    )
    return EnvDistribution(support, tuple([1.0 / n] * n))


@dataclass(frozen=True)
class CandidateReport:
    """Per-candidate evaluation behind one selection decision."""

    scheme_id: SchemeId
    ber: float
    rate_bps: float
    required_ebn0_lin: float
    cost: float
    meets_target_ber: bool
    meets_min_rate: bool


@dataclass(frozen=True)
class SelectionReport:
    """Chosen scheme (NoTx when nothing is feasible) plus the candidate table."""

    chosen: SchemeId
    mode: SelectionMode
    ebn0_db: float
    candidates: tuple[CandidateReport, ...]


def _evaluate_candidates(
    ebn0_db: float,
    symbol_period_s: float,
    policy: QoSPolicy,
    candidate_set: Sequence[ModulationScheme],
) -> list[CandidateReport]:
    z = EnvTuple(ebn0_db=ebn0_db, symbol_period_s=symbol_period_s)
    rows = []
    for scheme in sorted(candidate_set, key=lambda s: s.order):
        if scheme.scheme_id == SchemeId.NOTX:
            continue
        ber = theoretical_ber_lin(scheme, z.effective_ebn0_lin)
        rate = bit_rate(scheme, symbol_period_s)
        rows.append(
            CandidateReport(
                scheme_id=scheme.scheme_id,
                ber=ber,
                rate_bps=rate,
                required_ebn0_lin=required_ebn0_lin(scheme, policy.target_ber),
                cost=local_cost(replace(z, scheme_id=scheme.scheme_id), policy),
                meets_target_ber=ber <= policy.target_ber,
                meets_min_rate=rate >= policy.min_rate_bps,
            )
        )
    return rows


def select_modulation(
    ebn0_db: float,
    symbol_period_s: float,
    policy: QoSPolicy,
    candidate_set: Sequence[ModulationScheme],
) -> SelectionReport:
    """Pick a scheme for the current Eb/N0 under the policy's mode.

    Total: always returns a report whose ``chosen`` is a candidate id or
    NOTX when no candidate satisfies the mode's constraints. Candidates are
    scanned in ascending order M, so exact ties go to the lowest M.
    """
    rows = _evaluate_candidates(ebn0_db, symbol_period_s, policy, candidate_set)
    # Feasibility is uniform across modes (NoTx totality: the "no bit" state
    # is the answer whenever nothing meets the QoS constraints); the modes
    # differ only in how they rank the feasible set.
    eligible = [r for r in rows if r.meets_target_ber and r.meets_min_rate]
    rank = {
        SelectionMode.MIN_BER: lambda r: r.ber,
        SelectionMode.MAX_RATE: lambda r: -r.rate_bps,
        SelectionMode.MIN_ENERGY: lambda r: r.required_ebn0_lin,
        SelectionMode.COST_OPTIMAL: lambda r: r.cost,
    }[policy.mode]
    chosen = min(eligible, key=rank).scheme_id if eligible else SchemeId.NOTX
    return SelectionReport(chosen, policy.mode, ebn0_db, tuple(rows))


def threshold_table(
    policy: QoSPolicy,
    symbol_period_s: float,
    candidate_set: Sequence[ModulationScheme],
    ebn0_grid_db: Sequence[float],
) -> list[tuple[SchemeId, float]]:
    """Switch-on Eb/N0 per scheme: the lowest grid point where it is selected.

    Schemes the selector never returns over the grid are omitted. Rows are
    sorted by threshold, ascending.
    """
    grid = [float(g) for g in ebn0_grid_db]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidRangeError("ebn0_grid_db must be strictly ascending")
    first_seen: dict[SchemeId, float] = {}
    for ebn0_db in grid:
        report = select_modulation(ebn0_db, symbol_period_s, policy, candidate_set)
        if report.chosen != SchemeId.NOTX and report.chosen not in first_seen:
            first_seen[report.chosen] = ebn0_db
    return sorted(first_seen.items(), key=lambda kv: kv[1])
