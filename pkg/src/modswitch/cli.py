"""Experiment runner: BER sweeps, adaptive-vs-fixed comparisons, thresholds, sessions.

Every command is driven by an ExperimentConfig assembled from built-in
defaults, an optional YAML config file, and command-line flags (flags win).
All commands are deterministic under a fixed seed and write CSV (or a
line-delimited event log for sessions); summaries printed to stdout are
recomputed from the written rows.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import asdict, dataclass, fields, replace

import yaml

from . import adapt, link, metrics
from .channel import LinkBudget, child_seed
from .errors import ConfigError, ModSwitchError
from .modem import SCHEME_BY_NAME, SCHEME_NAMES, SchemeId, build_scheme

__all__ = [
    "ExperimentConfig",
    "parse_config_file",
    "parse_trajectory_file",
    "ber_sweep_rows",
    "adapt_compare_rows",
    "rate_compare_rows",
    "threshold_rows",
    "cmd_ber_sweep",
    "cmd_adapt_compare",
    "cmd_rate_compare",
    "cmd_thresholds",
    "cmd_session",
    "main",
]

COMMANDS = ("bersweep", "adapt-compare", "rate-compare", "thresholds", "session")

DEFAULT_SCHEMES = ["bpsk", "qpsk", "qam16", "qam64"]


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "bersweep"
    schemes: tuple[str, ...] = tuple(DEFAULT_SCHEMES)
    grid_lo_db: float = 0.0
    grid_hi_db: float = 12.0
    grid_step_db: float = 1.0
    bits_per_point: int = 1_000_000
    symbol_period_s: float = 1e-6
    seed: int = 12345
    out: str | None = None
    mode: str = "max-rate"
    alpha: float = 1.0
    beta: float = 1.0
    chi: float = 1.0
    target_ber: float = 1e-3
    min_rate_bps: float = 0.0
    rate_ref_bps: float = 1.0e6
    env_lo_db: float = 0.0
    env_hi_db: float = 25.0
    env_step_db: float = 1.0
    tx_power_dbm: float = 20.0
    gains_db: float = 0.0
    carrier_hz: float = 9.0e8
    noise_psd_dbm_hz: float = -174.0
    distance_m: float = 100.0
    trajectory: str | None = None
    duration: int = 50
    payload_bits_per_frame: int = 128
    tick_seconds: float = 1e-3

    # -- assembly ---------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        flat: dict = {}
        for key, value in data.items():
            if key == "grid":
                lo, hi, step = _parse_range(value, "grid")
                flat.update(grid_lo_db=lo, grid_hi_db=hi, grid_step_db=step)
            elif key == "env":
                lo, hi, step = _parse_range(value, "env")
                flat.update(env_lo_db=lo, env_hi_db=hi, env_step_db=step)
            elif key == "policy":
                if not isinstance(value, dict):
                    raise ConfigError("policy: expected a mapping")
                for pk, pv in value.items():
                    if pk not in known:
                        raise ConfigError(f"policy.{pk}: unknown key")
                    flat[pk] = pv
            elif key == "link_budget":
                if not isinstance(value, dict):
                    raise ConfigError("link_budget: expected a mapping")
                for bk, bv in value.items():
                    if bk not in known:
                        raise ConfigError(f"link_budget.{bk}: unknown key")
                    flat[bk] = bv
            elif key in known:
                flat[key] = value
            else:
                raise ConfigError(f"{key}: unknown config key")
        if "schemes" in flat and isinstance(flat["schemes"], str):
            flat["schemes"] = [s for s in flat["schemes"].split(",") if s]
        if "schemes" in flat:
            flat["schemes"] = tuple(flat["schemes"])
        return cls(**flat)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schemes"] = list(self.schemes)
        out = {
            k: d[k]
            for k in (
                "command",
                "schemes",
                "bits_per_point",
                "symbol_period_s",
                "seed",
                "out",
                "trajectory",
                "duration",
                "payload_bits_per_frame",
                "tick_seconds",
            )
        }
        out["grid"] = {
            "lo_db": d["grid_lo_db"],
            "hi_db": d["grid_hi_db"],
            "step_db": d["grid_step_db"],
        }
        out["env"] = {
            "lo_db": d["env_lo_db"],
            "hi_db": d["env_hi_db"],
            "step_db": d["env_step_db"],
        }
        out["policy"] = {
            k: d[k]
            for k in (
                "mode",
                "alpha",
                "beta",
                "chi",
                "target_ber",
                "min_rate_bps",
                "rate_ref_bps",
            )
        }
        out["link_budget"] = {
            k: d[k]
            for k in (
                "tx_power_dbm",
                "gains_db",
                "carrier_hz",
                "noise_psd_dbm_hz",
                "distance_m",
            )
        }
        return out

    # -- validation and derived objects ------------------------------------

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        if not self.schemes:
            raise ConfigError("schemes: at least one scheme required")
        for name in self.schemes:
            if name not in SCHEME_BY_NAME:
                raise ConfigError(f"schemes: unknown scheme {name!r}")
            if name == "notx":
                raise ConfigError("schemes: notx cannot be simulated directly")
        if self.grid_step_db <= 0:
            raise ConfigError("grid: step_db must be > 0")
        if self.grid_hi_db < self.grid_lo_db:
            raise ConfigError("grid: hi_db must be >= lo_db")
        if self.env_step_db <= 0:
            raise ConfigError("env: step_db must be > 0")
        if self.env_hi_db < self.env_lo_db:
            raise ConfigError("env: hi_db must be >= lo_db")
        if self.bits_per_point < 10_000:
            raise ConfigError("bits_per_point: must be >= 10000")
        if self.symbol_period_s <= 0:
            raise ConfigError("symbol_period_s: must be > 0")
        if self.mode not in {m.value for m in adapt.SelectionMode}:
            raise ConfigError(f"mode: unknown selection mode {self.mode!r}")
        if self.duration < 0:
            raise ConfigError("duration: must be >= 0")
        if self.payload_bits_per_frame <= 0:
            raise ConfigError("payload_bits_per_frame: must be > 0")
        if self.tick_seconds <= 0:
            raise ConfigError("tick_seconds: must be > 0")
        # Policy and budget constructors re-check their own ranges.
        self.policy()
        self.link_budget()

    def policy(self) -> adapt.QoSPolicy:
        try:
            return adapt.QoSPolicy(
                alpha=self.alpha,
                beta=self.beta,
                chi=self.chi,
                target_ber=self.target_ber,
                min_rate_bps=self.min_rate_bps,
                mode=adapt.SelectionMode(self.mode),
                rate_ref_bps=self.rate_ref_bps,
            )
        except ValueError as exc:
            raise ConfigError(f"policy: {exc}") from exc

    def link_budget(self) -> LinkBudget:
        try:
            return LinkBudget(
                tx_power_dbm=self.tx_power_dbm,
                antenna_gains_db=self.gains_db,
                carrier_hz=self.carrier_hz,
                noise_psd_dbm_hz=self.noise_psd_dbm_hz,
                distance_m=self.distance_m,
            )
        except ValueError as exc:
            raise ConfigError(f"link_budget: {exc}") from exc

    def scheme_objects(self):
        return [build_scheme(SCHEME_BY_NAME[name]) for name in self.schemes]

    def grid(self) -> list[float]:
        return _expand_range(self.grid_lo_db, self.grid_hi_db, self.grid_step_db)

    def env_distribution(self) -> adapt.EnvDistribution:
        template = adapt.EnvTuple(
            ebn0_db=0.0,
            symbol_period_s=self.symbol_period_s,
            distance_m=self.distance_m,
        )
        return adapt.uniform_env_distribution(
            self.env_lo_db, self.env_hi_db, self.env_step_db, template
        )


def _parse_range(value, name: str) -> tuple[float, float, float]:
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{name}: expected lo:hi:step, got {value!r}")
        try:
            return tuple(float(p) for p in parts)  # type: ignore[return-value]
        except ValueError as exc:
            raise ConfigError(f"{name}: not numeric: {value!r}") from exc
    if isinstance(value, dict):
        try:
            return (
                float(value["lo_db"]),
                float(value["hi_db"]),
                float(value["step_db"]),
            )
        except KeyError as exc:
            raise ConfigError(f"{name}: missing key {exc}") from exc
    raise ConfigError(f"{name}: expected 'lo:hi:step' or a mapping")


def _expand_range(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def parse_config_file(path: str) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must contain a mapping")
    return data


def serialize_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)


def parse_trajectory_file(path: str) -> list[tuple[float, float]]:
    """Read 'time ebn0_db' pairs (whitespace or comma separated, # comments)."""
    trajectory = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigError(
                    f"trajectory line {lineno}: expected 'time ebn0_db', got {line!r}"
                )
            try:
                trajectory.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ConfigError(
                    f"trajectory line {lineno}: not numeric: {line!r}"
                ) from exc
    if not trajectory:
        raise ConfigError("trajectory: file contains no points")
    return trajectory


def _write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _round_bits(bits: int, k: int) -> int:
    return math.ceil(bits / k) * k


# --------------------------------------------------------------------------
# Command cores (pure: config in, rows out)


BER_SWEEP_FIELDS = ["ebn0_db", "scheme", "ber_measured", "ber_theory", "ci95", "bits"]


def ber_sweep_rows(config: ExperimentConfig) -> list[dict]:
    rows = []
    grid = config.grid()
    for si, scheme in enumerate(config.scheme_objects()):
        bits = _round_bits(config.bits_per_point, scheme.bits_per_symbol)
        for ebn0_db, est, theory in metrics.ber_sweep(
            scheme, grid, bits, child_seed(config.seed, si)
        ):
            rows.append(
                {
                    "ebn0_db": ebn0_db,
                    "scheme": scheme.name,
                    "ber_measured": est.ber,
                    "ber_theory": theory,
                    "ci95": est.ci95_halfwidth,
                    "bits": est.bits_total,
                }
            )
    return rows


ADAPT_COMPARE_FIELDS = [
    "system",
    "avg_ber",
    "avg_rate_bps",
    "states_active",
    "bits_measured",
    "bit_errors",
]


def adapt_compare_rows(config: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Monte Carlo mean BER per fixed scheme and for the per-state selector.

    Aggregates are bit-weighted: states contribute in proportion to
    probability times delivered rate, so NoTx states carry no bits. For a
    fixed scheme (which transmits in every state) this reduces to the plain
    probability-weighted mean BER.
    """
    dist = config.env_distribution()
    schemes = config.scheme_objects()
    policy = config.policy()
    ts = config.symbol_period_s

    measured: dict[tuple[int, SchemeId], metrics.BerEstimate] = {}
    for j, z in enumerate(dist.support):
        for scheme in schemes:
            bits = _round_bits(config.bits_per_point, scheme.bits_per_symbol)
            measured[(j, scheme.scheme_id)] = metrics.measure_ber(
                scheme, z.ebn0_db, bits, child_seed(config.seed, j, int(scheme.scheme_id))
            )

    def aggregate(choice_per_state):
        num = den = 0.0
        bits_measured = errors = 0
        active = 0
        for j, (z, p) in enumerate(zip(dist.support, dist.probs)):
            scheme_id = choice_per_state[j]
            if scheme_id == SchemeId.NOTX:
                continue
            rate = adapt.bit_rate(build_scheme(scheme_id), ts)
            est = measured[(j, scheme_id)]
            num += p * rate * est.ber
            den += p * rate
            bits_measured += est.bits_total
            errors += est.bit_errors
            active += 1
        avg_ber = num / den if den > 0 else 0.0
        return avg_ber, den, active, bits_measured, errors

    rows = []
    for scheme in schemes:
        avg_ber, avg_rate, active, bits_m, errs = aggregate(
            [scheme.scheme_id] * len(dist.support)
        )
        rows.append(
            {
                "system": f"fixed-{scheme.name}",
                "avg_ber": avg_ber,
                "avg_rate_bps": avg_rate,
                "states_active": active,
                "bits_measured": bits_m,
                "bit_errors": errs,
            }
        )

    choices = [
        adapt.select_modulation(z.ebn0_db, ts, policy, schemes).chosen
        for z in dist.support
    ]
    avg_ber, avg_rate, active, bits_m, errs = aggregate(choices)
    rows.append(
        {
            "system": "adaptive",
            "avg_ber": avg_ber,
            "avg_rate_bps": avg_rate,
            "states_active": active,
            "bits_measured": bits_m,
            "bit_errors": errs,
        }
    )
    return rows, summarize_adapt_compare(rows)


def summarize_adapt_compare(rows: list[dict]) -> list[str]:
    fixed = [r for r in rows if str(r["system"]).startswith("fixed-")]
    adaptive = next(r for r in rows if r["system"] == "adaptive")
    best = min(fixed, key=lambda r: float(r["avg_ber"]))
    best_ber = float(best["avg_ber"])
    adapt_ber = float(adaptive["avg_ber"])
    decrease = 100.0 * (best_ber - adapt_ber) / best_ber if best_ber > 0 else 0.0
    return [
        f"best fixed: {best['system']} avg_ber={best['avg_ber']}",
        f"adaptive: avg_ber={adaptive['avg_ber']} avg_rate_bps={adaptive['avg_rate_bps']}",
        f"ber decrease vs best fixed: {decrease:.1f}%",
    ]


RATE_COMPARE_FIELDS = ["system", "avg_rate_bps", "feasible_states"]


def rate_compare_rows(config: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Average delivered rate at the target BER, closed-form feasibility.

    A state delivers the scheme's bit rate when the closed-form BER meets the
    target there, and zero otherwise. The adaptive system picks the highest
    feasible rate per state (MaxRate selection).
    """
    dist = config.env_distribution()
    schemes = config.scheme_objects()
    ts = config.symbol_period_s
    policy = replace(config.policy(), mode=adapt.SelectionMode.MAX_RATE)

    rows = []
    for scheme in schemes:
        rate = adapt.bit_rate(scheme, ts)
        delivered = []
        feasible = 0
        for z, p in zip(dist.support, dist.probs):
            ok = metrics.theoretical_ber(scheme, z.ebn0_db) <= policy.target_ber
            feasible += int(ok)
            delivered.append(p * rate if ok else 0.0)
        rows.append(
            {
                "system": f"fixed-{scheme.name}",
                "avg_rate_bps": math.fsum(delivered),
                "feasible_states": feasible,
            }
        )

    delivered = []
    feasible = 0
    for z, p in zip(dist.support, dist.probs):
        chosen = adapt.select_modulation(z.ebn0_db, ts, policy, schemes).chosen
        if chosen != SchemeId.NOTX:
            feasible += 1
            delivered.append(p * adapt.bit_rate(build_scheme(chosen), ts))
    rows.append(
        {
            "system": "adaptive",
            "avg_rate_bps": math.fsum(delivered),
            "feasible_states": feasible,
        }
    )
    return rows, summarize_rate_compare(rows)


def summarize_rate_compare(rows: list[dict]) -> list[str]:
    fixed = [r for r in rows if str(r["system"]).startswith("fixed-")]
    adaptive = next(r for r in rows if r["system"] == "adaptive")
    adapt_rate = float(adaptive["avg_rate_bps"])
    lines = [f"adaptive: avg_rate_bps={adaptive['avg_rate_bps']}"]
    best = max(fixed, key=lambda r: float(r["avg_rate_bps"]))
    for row in fixed:
        rate = float(row["avg_rate_bps"])
        if rate > 0:
            lines.append(
                f"increase vs {row['system']}: {100.0 * (adapt_rate - rate) / rate:.1f}%"
            )
        else:
            lines.append(f"increase vs {row['system']}: n/a (zero delivered rate)")
    best_rate = float(best["avg_rate_bps"])
    if best_rate > 0:
        lines.append(
            f"increase vs best fixed ({best['system']}): "
            f"{100.0 * (adapt_rate - best_rate) / best_rate:.1f}%"
        )
    return lines


THRESHOLD_FIELDS = ["scheme", "threshold_db"]


def threshold_rows(config: ExperimentConfig) -> list[dict]:
    table = adapt.threshold_table(
        config.policy(), config.symbol_period_s, config.scheme_objects(), config.grid()
    )
    return [
        {"scheme": SCHEME_NAMES[scheme_id], "threshold_db": db}
        for scheme_id, db in table
    ]


# --------------------------------------------------------------------------
# Command entry points


def cmd_ber_sweep(config: ExperimentConfig) -> int:
    rows = ber_sweep_rows(config)
    out = config.out or "bersweep.csv"
    _write_csv(out, BER_SWEEP_FIELDS, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_adapt_compare(config: ExperimentConfig) -> int:
    rows, summary = adapt_compare_rows(config)
    out = config.out or "adapt_compare.csv"
    _write_csv(out, ADAPT_COMPARE_FIELDS, rows)
    print(f"wrote {len(rows)} rows to {out}")
    for line in summary:
        print(line)
    return 0


def cmd_rate_compare(config: ExperimentConfig) -> int:
    rows, summary = rate_compare_rows(config)
    out = config.out or "rate_compare.csv"
    _write_csv(out, RATE_COMPARE_FIELDS, rows)
    print(f"wrote {len(rows)} rows to {out}")
    for line in summary:
        print(line)
    return 0


def cmd_thresholds(config: ExperimentConfig) -> int:
    rows = threshold_rows(config)
    out = config.out or "thresholds.csv"
    _write_csv(out, THRESHOLD_FIELDS, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_session(config: ExperimentConfig) -> int:
    if not config.trajectory:
        raise ConfigError("trajectory: required for the session command")
    trajectory = parse_trajectory_file(config.trajectory)
    stats, events = link.run_session(
        trajectory,
        config.policy(),
        config.symbol_period_s,
        config.duration,
        config.seed,
        candidates=config.scheme_objects(),
        payload_bits_per_frame=config.payload_bits_per_frame,
        tick_seconds=config.tick_seconds,
    )
    out = config.out or "session.log"
    with open(out, "w") as fh:
        for event in events:
            fh.write(event.to_line() + "\n")
    violations = link.audit_tandem(events)
    print(f"wrote {len(events)} events to {out}")
    for name in (
        "frames_ok",
        "frames_crc_fail",
        "header_fail",
        "payload_bits",
        "payload_bit_errors",
        "switches_completed",
        "throughput_bps",
    ):
        print(f"{name}={getattr(stats, name)}")
    print(f"tandem_violations={len(violations)}")
    return 0


_DISPATCH = {
    "bersweep": cmd_ber_sweep,
    "adapt-compare": cmd_adapt_compare,
    "rate-compare": cmd_rate_compare,
    "thresholds": cmd_thresholds,
    "session": cmd_session,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modswitch",
        description="Link-level modulation-switching experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="YAML config file")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--out")
        cmd.add_argument("--schemes", help="comma-separated scheme names")
        cmd.add_argument("--ts", type=float, dest="symbol_period_s")
        cmd.add_argument("--grid", help="lo:hi:step in dB")
        cmd.add_argument("--bits", type=int, dest="bits_per_point")
        cmd.add_argument("--env", help="lo:hi:step in dB")
        cmd.add_argument("--mode", choices=[m.value for m in adapt.SelectionMode])
        cmd.add_argument("--target-ber", type=float, dest="target_ber")
        cmd.add_argument("--min-rate", type=float, dest="min_rate_bps")
        if name == "session":
            cmd.add_argument("--trajectory")
            cmd.add_argument("--duration", type=int)
            cmd.add_argument("--payload-bits", type=int, dest="payload_bits_per_frame")
            cmd.add_argument("--tick-seconds", type=float, dest="tick_seconds")
    return parser


_FLAG_KEYS = (
    "seed",
    "out",
    "symbol_period_s",
    "bits_per_point",
    "mode",
    "target_ber",
    "min_rate_bps",
    "trajectory",
    "duration",
    "payload_bits_per_frame",
    "tick_seconds",
)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = parse_config_file(args.config) if args.config else {}
    data["command"] = args.command
    config = ExperimentConfig.from_dict(data)

    overrides: dict = {}
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.schemes is not None:
        overrides["schemes"] = tuple(s for s in args.schemes.split(",") if s)
    if getattr(args, "grid", None) is not None:
        lo, hi, step = _parse_range(args.grid, "grid")
        overrides.update(grid_lo_db=lo, grid_hi_db=hi, grid_step_db=step)
    if getattr(args, "env", None) is not None:
        lo, hi, step = _parse_range(args.env, "env")
        overrides.update(env_lo_db=lo, env_hi_db=hi, env_step_db=step)
    if overrides:
        config = replace(config, **overrides)
    config.validate()
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        return _DISPATCH[config.command](config)
    except (ModSwitchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
