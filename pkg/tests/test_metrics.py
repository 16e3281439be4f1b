"""Tests for the closed-form BER curves and Monte Carlo measurement.

Frozen expected values were computed independently with a 40-digit
complementary error function (mpmath) and rounded to the nearest float64.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modswitch.errors import InvalidRangeError, LengthError, NoTxSchemeError
from modswitch.metrics import (
    BerEstimate,
    ber_sweep,
    measure_ber,
    q_function,
    q_inverse,
    required_ebn0_lin,
    theoretical_ber,
    theoretical_ber_lin,
)
from modswitch.modem import SchemeId, build_scheme

from conftest import REAL_SCHEME_IDS

# 40-digit erfc reference values.
Q_REFERENCE = {
    0.5: 0.3085375387259869,
    1.0: 0.15865525393145705,
    1.7: 0.04456546275854304,
    2.0: 0.02275013194817921,
    3.0: 0.0013498980316300946,
    5.0: 2.866515718791939e-07,
    8.0: 6.220960574271784e-16,
}
Q_SQRT2 = 0.07864960352514257

BER_REFERENCE = {
    (SchemeId.BPSK, 0.0): Q_SQRT2,
    (SchemeId.BPSK, 5.0): 0.00595386714777866,
    (SchemeId.QPSK, 0.0): Q_SQRT2,
    (SchemeId.QAM8, 0.0): 0.13221271160954753,
    (SchemeId.QAM16, 5.0): 0.04189230318126344,
    (SchemeId.QAM16, 10.0): 0.0017541506178927247,
    (SchemeId.QAM32, 12.0): 0.004404007775140185,
    (SchemeId.QAM64, 20.0): 2.6338925317730407e-08,
}


class TestQFunction:
    def test_zero_is_half(self):
        assert q_function(0.0) == 0.5

    @pytest.mark.parametrize("x,expected", sorted(Q_REFERENCE.items()))
    def test_reference_values(self, x, expected):
        assert q_function(x) == pytest.approx(expected, rel=1e-12)

    def test_q_sqrt2(self):
        assert q_function(math.sqrt(2)) == pytest.approx(Q_SQRT2, rel=1e-12)

    def test_complement_identity(self):
        assert q_function(-1.7) == pytest.approx(1 - q_function(1.7), abs=1e-15)

    @given(st.floats(min_value=0.0, max_value=6.0))
    @settings(max_examples=100, deadline=None)
    def test_complement_property(self, x):
        assert q_function(-x) + q_function(x) == pytest.approx(1.0, abs=1e-12)

    def test_chernoff_bound(self):
        for x in np.linspace(0.1, 8.0, 80):
            assert q_function(x) < 0.5 * math.exp(-(x**2) / 2)

    def test_inverse_roundtrip(self):
        for y in (0.4, 1e-1, 1e-2, 1e-3, 1e-5, 1e-8):
            assert q_function(q_inverse(y)) == pytest.approx(y, rel=1e-10)

    def test_vectorized(self):
        xs = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(
            q_function(xs), [0.5, Q_REFERENCE[1.0], Q_REFERENCE[2.0]], rtol=1e-12
        )


class TestTheoreticalBer:
    @pytest.mark.parametrize(
        "scheme_id,ebn0_db,expected",
        [(s, db, v) for (s, db), v in sorted(BER_REFERENCE.items())],
        ids=lambda v: str(v),
    )
    def test_reference_values(self, scheme_id, ebn0_db, expected):
        scheme = build_scheme(scheme_id)
        assert theoretical_ber(scheme, ebn0_db) == pytest.approx(expected, rel=1e-12)

    def test_infinite_snr_is_zero(self):
        assert theoretical_ber(build_scheme(SchemeId.BPSK), math.inf) == 0.0

    def test_bpsk_equals_qpsk_exactly(self):
        bpsk = build_scheme(SchemeId.BPSK)
        qpsk = build_scheme(SchemeId.QPSK)
        for db in np.linspace(-5, 20, 51):
            assert theoretical_ber(bpsk, db) == theoretical_ber(qpsk, db)

    def test_order_monotonicity(self):
        # At a fixed Eb/N0 the square-QAM family orders BPSK <= 16 <= 64.
        bpsk = build_scheme(SchemeId.BPSK)
        qam16 = build_scheme(SchemeId.QAM16)
        qam64 = build_scheme(SchemeId.QAM64)
        for db in np.arange(0.0, 25.5, 0.5):
            assert theoretical_ber(bpsk, db) <= theoretical_ber(qam16, db)
            assert theoretical_ber(qam16, db) <= theoretical_ber(qam64, db)

    def test_monotone_in_snr(self, scheme):
        curve = [theoretical_ber(scheme, db) for db in np.arange(-5.0, 26.0, 0.5)]
        assert all(b <= a for a, b in zip(curve, curve[1:]))

    def test_notx_rejected(self):
        with pytest.raises(NoTxSchemeError):
            theoretical_ber(build_scheme(SchemeId.NOTX), 10.0)


class TestRequiredEbn0:
    def test_inversion_roundtrip(self, scheme):
        for target in (1e-1, 1e-2, 1e-3, 1e-5):
            gamma = required_ebn0_lin(scheme, target)
            assert theoretical_ber_lin(scheme, gamma) == pytest.approx(target, rel=1e-9)

    def test_vacuous_target(self, scheme):
        assert required_ebn0_lin(scheme, 0.5) == 0.0

    def test_required_grows_with_order(self):
        # The switch-on ordering behind the threshold table.
        gammas = [
            required_ebn0_lin(build_scheme(s), 1e-3)
            for s in REAL_SCHEME_IDS
        ]
        assert all(b > a for a, b in zip(gammas[1:], gammas[2:]))  # qpsk..qam64
        assert gammas[0] == gammas[1]  # bpsk == qpsk


class TestMeasureBer:
    def test_noiseless_is_exactly_zero(self, scheme):
        est = measure_ber(scheme, math.inf, scheme.bits_per_symbol * 1000, seed=3)
        assert est.ber == 0.0
        assert est.bit_errors == 0

    def test_bpsk_at_0db_within_band(self):
        # 0.0786 +/- 3 binomial sigma at 1e6 bits: [0.077842, 0.079457].
        est = measure_ber(build_scheme(SchemeId.BPSK), 0.0, 1_000_000, seed=12345)
        sigma = math.sqrt(Q_SQRT2 * (1 - Q_SQRT2) / 1_000_000)
        assert abs(est.ber - Q_SQRT2) <= 3 * sigma

    def test_qpsk_matches_bpsk_per_bit(self):
        est = measure_ber(build_scheme(SchemeId.QPSK), 0.0, 1_000_000, seed=999)
        sigma = math.sqrt(Q_SQRT2 * (1 - Q_SQRT2) / 1_000_000)
        assert abs(est.ber - Q_SQRT2) <= 3 * sigma

    def test_deterministic(self):
        scheme = build_scheme(SchemeId.QAM16)
        a = measure_ber(scheme, 6.0, 40_000, seed=77)
        b = measure_ber(scheme, 6.0, 40_000, seed=77)
        assert a == b

    def test_ci_halfwidth_definition(self):
        est = BerEstimate.from_counts(100, 10_000)
        assert est.ber == 0.01
        assert est.ci95_halfwidth == pytest.approx(
            1.96 * math.sqrt(0.01 * 0.99 / 10_000), rel=1e-12
        )

    def test_invalid_length(self):
        with pytest.raises(LengthError):
            measure_ber(build_scheme(SchemeId.QAM16), 5.0, 10_001, seed=1)
        with pytest.raises(LengthError):
            measure_ber(build_scheme(SchemeId.QAM16), 5.0, 0, seed=1)


class TestBerSweep:
    def test_grid_order_and_agreement(self):
        scheme = build_scheme(SchemeId.BPSK)
        grid = list(np.arange(0.0, 11.0, 2.0))
        rows = ber_sweep(scheme, grid, 1_000_000, seed=12345)
        assert [r[0] for r in rows] == grid
        for _, est, theory in rows:
            if theory < 1e-4:
                continue
            sigma = math.sqrt(theory * (1 - theory) / est.bits_total)
            assert abs(est.ber - theory) <= max(3 * sigma, 0.1 * theory)

    def test_measured_curve_monotone_with_slack(self):
        scheme = build_scheme(SchemeId.BPSK)
        rows = ber_sweep(scheme, list(np.arange(0.0, 11.0, 2.0)), 1_000_000, seed=4)
        for (_, lo_est, _), (_, hi_est, _) in zip(rows, rows[1:]):
            slack = 3 * math.sqrt(
                max(lo_est.ber, 1e-9) * (1 - lo_est.ber) / lo_est.bits_total
            )
            assert hi_est.ber <= lo_est.ber + slack

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidRangeError):
            ber_sweep(build_scheme(SchemeId.BPSK), [], 10_000, seed=1)

    def test_non_ascending_grid_rejected(self):
        with pytest.raises(InvalidRangeError):
            ber_sweep(build_scheme(SchemeId.BPSK), [0.0, 0.0, 1.0], 10_000, seed=1)
