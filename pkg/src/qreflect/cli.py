"""Command-line interface: scenario runs, sweeps and the validation suite.

Subcommands
-----------
specular    isolated specular-channel reflectivity
diffract    diffraction pattern (--method coupled|sudden)
badlands    badlands profile, its maximum and the closed-form distances
sweep       one scenario per value of a single parameter
validate    oracle suite (exponential well, convergence order, stripe
            consistency, unitarity, symmetry); non-zero exit on failure

Every command accepts --config <json> and/or --preset <name>; results go
to stdout or --out <file> (.csv or .json, inferred from the extension).
Exit codes: 0 success, 1 configuration/validation error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import analysis
from .channels import beam_kinematics, build_channels, specular_channel
from .config import (
    SCENARIO_PRESETS,
    ScenarioConfig,
    apply_sweep_value,
    load_scenario,
    parse_scenario,
    preset_scenario,
)
from .constants import E0, HELIUM_MASS, HELIUM_POLARIZABILITY
from .errors import ConfigurationError, MatchingError, PropagationError, QReflectError
from .potentials import (
    GaussianProfile,
    HarmonicProfile,
    ParticleParams,
    StripeProfile,
    SurfaceConfig,
    build_potential_table,
)
from .propagator import PropagatorConfig, ReflectionResult, solve

__all__ = ["ResultRecord", "run_scenario", "sweep", "validate", "main"]


def _fmt(x: float) -> str:
    """Fixed 17-significant-digit decimal rendering (bit-stable baselines)."""
    return f"{float(x):.17g}"


@dataclass
class ResultRecord:
    """One scenario outcome: config echo, per-order table, totals, diagnostics."""

    config: dict
    columns: tuple
    rows: list
    totals: dict
    diagnostics: dict
    warnings: tuple = ()
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "totals": self.totals,
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        return "\n".join(lines) + "\n"


def _reflection_record(config: ScenarioConfig, result: ReflectionResult) -> ResultRecord:
    rows = [
        (int(n), float(k), float(r.real), float(r.imag), float(p))
        for n, k, r, p in zip(result.orders, result.k_n, result.r_n, result.R_n)
    ]
    diag = {
        "steps": result.diagnostics.steps,
        "y_start_m": result.diagnostics.y_start_m,
        "y_end_m": result.diagnostics.y_end_m,
        "richardson_error": result.diagnostics.richardson_error,
    }
    return ResultRecord(
        config=config.to_dict(),
        columns=("n", "k_n_per_m", "re_r", "im_r", "R_n"),
        rows=rows,
        totals={"R_total": float(result.R_n.sum())},
        diagnostics=diag,
        warnings=result.diagnostics.warnings,
    )


def _diffraction_record(config: ScenarioConfig, pattern: analysis.DiffractionPattern,
                        k_n: dict) -> ResultRecord:
    rows = [
        (int(n), float(k_n.get(n, 0.0)), float(r.real), float(r.imag), float(p))
        for n, r, p in zip(pattern.orders, pattern.r_n, pattern.R_n)
    ]
    return ResultRecord(
        config=config.to_dict(),
        columns=("n", "k_n_per_m", "re_r", "im_r", "R_n"),
        rows=rows,
        totals={"R_total": float(pattern.R_n.sum())},
        diagnostics={"method": pattern.method, "z_samples": config.numerics.z_samples},
        warnings=pattern.warnings,
    )


def _diffraction_axis(surface: SurfaceConfig) -> tuple[str, float]:
    """Stripe/gaussian gratings diffract along z; x-Fourier profiles along x."""
    if isinstance(surface.profile, (StripeProfile, GaussianProfile)):
        return "z", surface.q_z
    return "x", surface.kappa_x


def run_scenario(config: ScenarioConfig) -> ResultRecord:
    """Dispatch one scenario; deterministic for a fixed config."""
    mode = config.mode
    numerics = config.numerics
    pcfg = numerics.propagator_config()

    if mode == "specular":
        if config.surface is not None:
            table = build_potential_table(
                config.particle, config.surface, lmax=numerics.lmax,
                include_cp=config.cp_enabled,
            )
            channel = specular_channel(
                beam_kinematics(config.particle), q=config.surface.kappa_x
            )
            result = solve(config.particle, config.surface, channel, table, pcfg)
        else:
            result = _flat_cp_result(config.particle, pcfg)
        return _reflection_record(config, result)

    if mode == "diffract-coupled":
        table = build_potential_table(
            config.particle, config.surface, lmax=numerics.lmax,
            include_cp=config.cp_enabled,
        )
        axis, q = _diffraction_axis(config.surface)
        channels = build_channels(
            beam_kinematics(config.particle), q,
            n_closed_extra=numerics.n_closed_extra, axis=axis,
        )
        result = solve(config.particle, config.surface, channels, table, pcfg)
        return _reflection_record(config, result)

    if mode == "diffract-sudden":
        beam = beam_kinematics(config.particle)
        axis, q = _diffraction_axis(config.surface)
        channels = build_channels(beam, q, axis=axis)
        open_orders = channels.open_orders
        n_cap = min((config.numerics.z_samples - 1) // 2, max(abs(n) for n in open_orders))
        pattern = analysis.sudden_solve(
            config.particle, config.surface,
            z_samples=numerics.z_samples, config=pcfg, max_order=n_cap,
        )
        k_map = {n: channels.k_n[channels.orders.index(n)].real for n in open_orders}
        return _diffraction_record(config, pattern, k_map)

    if mode == "badlands":
        return _badlands_record(config)

    if mode == "sweep":
        raise ConfigurationError("sweep scenarios run through the sweep() entry point")
    if mode == "validate":
        raise ConfigurationError("validate runs through the validate() entry point")
    raise ConfigurationError(f"unsupported mode {mode!r}")


def _flat_cp_result(particle: ParticleParams, pcfg: PropagatorConfig) -> ReflectionResult:
    from .potentials import PotentialTable, c4_coefficient
    from .analysis import cp_length_scale

    table = PotentialTable(
        c4=c4_coefficient(particle),
        kappa_x=1.0 / cp_length_scale(particle),
        term_builder=lambda j: [],
        describe="flat CP",
    )
    channel = specular_channel(beam_kinematics(particle))
    return solve(particle, None, channel, table, pcfg)


def _badlands_record(config: ScenarioConfig) -> ResultRecord:
    particle, surface = config.particle, config.surface
    table = build_potential_table(
        particle, surface, lmax=config.numerics.lmax, include_cp=config.cp_enabled
    )
    lead = table.leading_order()
    beam = beam_kinematics(particle)
    k0 = -beam.k_y
    profile = analysis.badlands_profile(k0, lead, particle.mass)
    rows = [(float(y), float(b)) for y, b in zip(profile.y, profile.b)]
    sigma1 = surface.sigma_m / 2.0 if isinstance(surface.profile, HarmonicProfile) else surface.sigma_m
    y_el = analysis.electrostatic_reflection_distance(particle, sigma1, surface.d_x)
    totals = {
        "y_max_m": profile.y_max,
        "b_max": profile.b_max,
        "y_cp_m": analysis.cp_reflection_distance(particle),
        "y_el_m": y_el,
    }
    return ResultRecord(
        config=config.to_dict(),
        columns=("y_m", "badlands"),
        rows=rows,
        totals=totals,
        diagnostics={"samples": len(rows)},
    )


def sweep(config: ScenarioConfig, axis: str | None = None, values=None) -> list[ResultRecord]:
    """One record per swept value; failures are recorded without aborting."""
    if axis is None or values is None:
        if config.sweep is None:
            raise ConfigurationError("sweep needs an axis and values (flag or config block)")
        axis = config.sweep.axis
        values = config.sweep.values
    records: list[ResultRecord] = []
    for value in values:
        try:
            point = apply_sweep_value(config, axis, float(value))
            record = run_scenario(point)
        except QReflectError as exc:
            record = ResultRecord(
                config={"sweep_value": value, "axis": axis},
                columns=("n", "k_n_per_m", "re_r", "im_r", "R_n"),
                rows=[],
                totals={},
                diagnostics={},
                error=f"{type(exc).__name__}: {exc}",
            )
        record.config = dict(record.config)
        record.config["sweep_axis"] = axis
        record.config["sweep_value"] = float(value)
        records.append(record)
    return records


def sweep_table(records: list[ResultRecord]) -> str:
    """Combined CSV keyed by the swept value: axis_value,R_total,error."""
    lines = ["axis_value,R_total,error"]
    for rec in records:
        total = rec.totals.get("R_total")
        lines.append(
            ",".join(
                [
                    _fmt(rec.config.get("sweep_value", float("nan"))),
                    "" if total is None else _fmt(total),
                    rec.error or "",
                ]
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: Any
    expected: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "expected": self.expected,
        }


def _helium() -> ParticleParams:
    return ParticleParams(
        mass=HELIUM_MASS, polarizability=HELIUM_POLARIZABILITY, speed=300.0, theta=1e-3
    )


def _desk_stripe_surface() -> SurfaceConfig:
    # small d_z keeps the channel count at desk scale
    return SurfaceConfig(
        d_x=500e-9, d_z=4e-6, sigma_m=1e16 * E0, profile=StripeProfile(f=0.5)
    )


def _check_exponential_well(steps: int = 120000) -> CheckResult:
    from .constants import HBAR

    dx = 500e-9
    surface = SurfaceConfig(d_x=dx, d_z=40e-6, sigma_m=0.0307, profile=HarmonicProfile())
    worst = 0.0
    k = HELIUM_MASS * 300.0 / HBAR
    for k0dx in (0.5, 1.0, 2.0, 5.0, 8.0):
        k0 = k0dx / dx
        particle = ParticleParams(
            mass=HELIUM_MASS, polarizability=HELIUM_POLARIZABILITY,
            speed=300.0, theta=math.asin(k0 / k),
        )
        table = build_potential_table(particle, surface, include_cp=False)
        channel = specular_channel(beam_kinematics(particle), q=surface.kappa_x)
        res = solve(particle, surface, channel, table, PropagatorConfig(steps=steps))
        exact = analysis.exponential_well_reflectivity(k0, dx)
        worst = max(worst, abs(res.R_total - exact) / exact)
    return CheckResult(
        name="exponential_well_oracle",
        passed=worst <= 1e-3,
        measured=worst,
        expected="max relative error vs exp(-k0 dx) <= 1e-3",
    )


def _check_convergence_order(base_steps: int = 20000) -> CheckResult:
    from .constants import HBAR

    dx = 500e-9
    surface = SurfaceConfig(d_x=dx, d_z=40e-6, sigma_m=0.0307, profile=HarmonicProfile())
    k = HELIUM_MASS * 300.0 / HBAR
    k0 = 1.0 / dx
    particle = ParticleParams(
        mass=HELIUM_MASS, polarizability=HELIUM_POLARIZABILITY,
        speed=300.0, theta=math.asin(k0 / k),
    )
    table = build_potential_table(particle, surface, include_cp=False)
    channel = specular_channel(beam_kinematics(particle), q=surface.kappa_x)
    exact = analysis.exponential_well_reflectivity(k0, dx)
    errors = []
    for mult in (1, 2, 4):
        res = solve(
            particle, surface, channel, table,
            PropagatorConfig(steps=base_steps * mult),
        )
        errors.append(abs(res.R_total - exact))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    ok = all(12.0 <= r <= 20.0 for r in ratios)
    return CheckResult(
        name="convergence_order_h4",
        passed=ok,
        measured=ratios,
        expected="error ratios per step-halving in [12, 20]",
    )


def _check_stripe_consistency() -> CheckResult:
    particle = _helium()
    surface = _desk_stripe_surface()
    pcfg = PropagatorConfig(steps=16000, badlands_threshold=1e-4)
    r_cp = analysis.flat_cp_reflectivity(particle, PropagatorConfig(steps=20000))
    pattern = analysis.sudden_solve(particle, surface, z_samples=128, config=pcfg, max_order=5)
    worst = 0.0
    for n in (0, 1):
        ana = analysis.stripe_analytic(n, surface.profile.f, r_cp)
        num = pattern.order_probability(n)
        worst = max(worst, abs(num - ana) / ana)
    return CheckResult(
        name="stripe_grating_consistency",
        passed=worst <= 0.25,
        measured=worst,
        expected="sudden-path orders 0, 1 within 25% of the stripe closed form",
    )


def _bundled_coupled_results(steps: int = 12000):
    particle = _helium()
    scenarios = {
        "stripe_desk": _desk_stripe_surface(),
        "gaussian_desk": SurfaceConfig(
            d_x=500e-9, d_z=4e-6, sigma_m=1e15 * E0, profile=GaussianProfile(epsilon=0.4e-6)
        ),
    }
    out = {}
    for name, surface in scenarios.items():
        table = build_potential_table(particle, surface)
        channels = build_channels(beam_kinematics(particle), surface.q_z, axis="z")
        out[name] = solve(
            particle, surface, channels, table,
            PropagatorConfig(steps=steps, badlands_threshold=1e-4),
        )
    return out


def _check_unitarity(results) -> CheckResult:
    worst = max(float(res.R_n.sum()) for res in results.values())
    return CheckResult(
        name="unitarity_bound",
        passed=worst <= 1.0 + 1e-8,
        measured=worst,
        expected="sum of R_n <= 1 + 1e-8 on all bundled scenarios",
    )


def _check_symmetry(results) -> CheckResult:
    worst = 0.0
    for res in results.values():
        for n in res.orders:
            if n > 0 and -n in res.orders:
                worst = max(
                    worst, abs(res.order_probability(n) - res.order_probability(-n))
                )
    return CheckResult(
        name="diffraction_symmetry",
        passed=worst <= 1e-9,
        measured=worst,
        expected="|R_n - R_-n| <= 1e-9 for k_z = 0 and symmetric profiles",
    )


def validate(convergence_base_steps: int = 20000) -> tuple[bool, dict]:
    """Run the oracle suite at desk scale; returns (all_passed, report)."""
    checks = [
        _check_exponential_well(),
        _check_convergence_order(base_steps=convergence_base_steps),
        _check_stripe_consistency(),
    ]
    coupled = _bundled_coupled_results()
    checks.append(_check_unitarity(coupled))
    checks.append(_check_symmetry(coupled))
    ok = all(c.passed for c in checks)
    report = {"passed": ok, "checks": [c.to_dict() for c in checks]}
    return ok, report


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _load_config(args, default_mode: str | None = None) -> ScenarioConfig:
    if args.preset and args.config:
        raise ConfigurationError("give either --preset or --config, not both")
    if args.preset:
        config = preset_scenario(args.preset)
    elif args.config:
        config = load_scenario(args.config)
    else:
        raise ConfigurationError("a --config file or --preset is required")
    if default_mode is not None and config.mode != default_mode:
        doc = config.to_dict()
        doc["mode"] = default_mode
        config = parse_scenario(doc)
    return config


def _emit(record_text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(record_text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(record_text)


def _write_record(record: ResultRecord, out_path: str | None) -> None:
    if out_path is None:
        _emit(record.to_json(), None)
        return
    if out_path.endswith(".csv"):
        _emit(record.to_csv(), out_path)
    elif out_path.endswith(".json"):
        _emit(record.to_json(), out_path)
    else:
        raise ConfigurationError("--out must end in .csv or .json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qreflect",
        description="Quantum reflection and diffraction from periodically doped surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="path to a scenario JSON document")
        p.add_argument("--preset", choices=sorted(SCENARIO_PRESETS), help="bundled scenario")
        p.add_argument("--out", help="output path (.csv or .json)")

    add_common(sub.add_parser("specular", help="isolated specular reflectivity"))
    p_diff = sub.add_parser("diffract", help="diffraction pattern")
    add_common(p_diff)
    p_diff.add_argument(
        "--method", choices=("coupled", "sudden"), default="coupled",
        help="coupled-channel solve or parametric sudden approximation",
    )
    add_common(sub.add_parser("badlands", help="badlands profile and reflection distances"))
    p_sweep = sub.add_parser("sweep", help="run one scenario per parameter value")
    add_common(p_sweep)
    p_sweep.add_argument("--axis", help="swept parameter (overrides config block)")
    p_sweep.add_argument(
        "--values", help="comma-separated numeric values (overrides config block)"
    )
    p_val = sub.add_parser("validate", help="run the oracle suite")
    p_val.add_argument("--out", help="write the JSON report here")
    p_val.add_argument(
        "--convergence-base-steps", type=int, default=20000,
        help="base grid for the h^4 check (coarser grids should fail the check)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            ok, report = validate(convergence_base_steps=args.convergence_base_steps)
            text = json.dumps(report, indent=2, sort_keys=True) + "\n"
            _emit(text, args.out)
            if args.out is not None:
                for check in report["checks"]:
                    status = "PASS" if check["passed"] else "FAIL"
                    sys.stdout.write(f"{status} {check['name']}\n")
            return 0 if ok else 1

        if args.command == "sweep":
            config = _load_config(args)
            axis, values = None, None
            if args.axis or args.values:
                if not (args.axis and args.values):
                    raise ConfigurationError("--axis and --values must be given together")
                axis = args.axis
                values = [float(v) for v in args.values.split(",")]
            records = sweep(config, axis, values)
            if args.out and args.out.endswith(".json"):
                payload = json.dumps(
                    [r.to_dict() for r in records], indent=2, sort_keys=True
                ) + "\n"
                _emit(payload, args.out)
            else:
                _emit(sweep_table(records), args.out)
            if any(r.error for r in records):
                return 2
            return 0

        mode = {
            "specular": "specular",
            "badlands": "badlands",
            "diffract": None,
        }[args.command]
        if args.command == "diffract":
            mode = "diffract-coupled" if args.method == "coupled" else "diffract-sudden"
        config = _load_config(args, default_mode=mode)
        record = run_scenario(config)
        _write_record(record, args.out)
        return 0
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 1
    except (PropagationError, MatchingError) as exc:
        detail = f" (step {exc.step})" if getattr(exc, "step", None) is not None else ""
        sys.stderr.write(f"solver failure: {exc}{detail}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
