"""Command-line entry point: ``openstirap <command> [options]``.

Settings are resolved in order: preset, then ``--config`` file, then explicit
flags. Each command falls back to its own default preset.
Tables go to ``--out`` (or stdout) as CSV with a ``#`` metadata header, or as
JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Sequence

import numpy as np

from . import experiments as ex
from .appendix import PRINTED, compiled_affine, consistency_report

CASE_ALIASES = {"a": "dephasing", "b": "emission"}
DEFAULT_PRESET = {
    "spectrum": "fig4",
    "evolve": "fig2",
    "imbalance": "fig6",
    "sweep": "fig7",
    "aopt": "fig7",
    "assist": "fig8",
    "variant": "fig8",
    "matrix": "fig4",
}
COMMANDS = {
    "spectrum": "eigenvalue branches and exceptional points versus gamma",
    "evolve": "one pulsed trajectory (populations, imbalance, purity)",
    "imbalance": "population imbalance Z(t, gamma) under dephasing",
    "sweep": "final P3 against the adiabaticity parameter a",
    "aopt": "optimal a under dephasing for each gamma",
    "assist": "environment-assisted transfer under emission",
    "variant": "coherent versus incoherent emission",
    "matrix": "compiled (M, b) and the audit against the printed matrices",
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    opt = common.add_argument
    opt("--preset", choices=sorted(ex.PRESETS), help="start from a named parameter preset")
    opt("--config", help="key = value file applied after the preset")
    opt("--case", help="closed, dephasing (a), emission (b) or coherent")
    opt("--gamma", help="loss rate or grid: v1,v2,... | lin:lo:hi:n | log:lo:hi:n")
    opt("--gamma2", type=float, help="second emission rate (default: equal to gamma)")
    opt("--a", help="adiabaticity parameter or grid (same syntax as --gamma)")
    opt("--g0", type=float, help="peak coupling")
    opt("--tau", type=float, help="pulse delay scale")
    opt("--sigma", type=float, help="pulse width scale")
    opt("--delta", type=float, help="one-photon detuning")
    opt("--tspan", help="integration window t0,t1")
    opt("--samples", type=int, help="output samples per trajectory")
    opt("--rel-tol", type=float, dest="rel_tol", help="relative tolerance")
    opt("--abs-tol", type=float, dest="abs_tol", help="absolute tolerance")
    opt("--method", choices=("DOP853", "RK45"), help="embedded Runge-Kutta pair")
    opt("--seed", type=int, help="seed for the random initial state")
    opt("--workers", type=int, help="worker processes for sweeps")
    opt("--source", choices=ex.SOURCES, help="generator used by spectrum scans")
    opt("--out", help="output file (default stdout)")
    opt("--format", choices=ex.FORMATS, help="output format")

    parser = argparse.ArgumentParser(prog="openstirap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "variant":
            p.add_argument("--jump", help="3x3 jump operator as 9 comma-separated (complex) entries, row-major")
    return parser


def _case(text: str) -> str:
    return CASE_ALIASES.get(text, text)


def build_config(args: argparse.Namespace) -> ex.ScenarioConfig:
    name = args.preset
    if name is None:
        name = DEFAULT_PRESET[args.command]
        if args.command in ("spectrum", "matrix") and args.case and _case(args.case) == "emission":
            name = "fig5"
    cfg = ex.preset(name)
    if args.config:
        cfg = ex.load_config(args.config, cfg)
    changes: dict[str, Any] = {}
    for key in ("g0", "tau", "sigma", "delta", "gamma2", "samples", "rel_tol", "abs_tol",
                "method", "seed", "workers", "source", "out", "format"):
        value = getattr(args, key)
        if value is not None:
            changes[key] = value
    if args.case:
        changes["case"] = _case(args.case)
    if args.gamma:
        changes["gamma"] = ex.parse_grid(args.gamma)
    if args.a:
        grid = ex.parse_grid(args.a)
        if args.command == "evolve":
            changes["trajectory_a"] = grid[0]
        else:
            changes["a"] = grid
    if args.tspan:
        changes["t_span"] = ex.parse_setting("t_span", args.tspan)
    return cfg.replace(**changes)


def _parse_jump(text: str) -> np.ndarray:
    vals = [complex(v.strip().replace(" ", "")) for v in text.split(",")]
    if len(vals) != 9:
        raise ex.ConfigError(f"--jump needs 9 entries, got {len(vals)}")
    return np.array(vals).reshape(3, 3)


def _matrix_report(cfg: ex.ScenarioConfig) -> str:
    out = {}
    cases = (cfg.case,) if cfg.case in PRINTED else tuple(PRINTED)
    for case in cases:
        g = cfg.gamma[0]
        out[case] = {
            "compiled": compiled_affine(case, cfg.g0, cfg.g0, cfg.delta, g).to_dict(),
            "printed": PRINTED[case](cfg.g0, cfg.g0, cfg.delta, g).to_dict(),
            "report": consistency_report(case).lines(),
        }
    return json.dumps(ex._jsonable(out), indent=1)


def run(args: argparse.Namespace, cfg: ex.ScenarioConfig) -> str:
    cmd = args.command
    if cmd == "spectrum":
        table, eps, _ = ex.run_spectrum_scan(cfg)
        for e in eps:
            print(f"EP {e.kind} at gamma* = {e.gamma_star:.10f}, overlap {e.overlap:.6f}", file=sys.stderr)
    elif cmd == "evolve":
        traj = ex.run_evolve(cfg)
        table = ex.trajectory_table(traj, cfg.to_dict())
    elif cmd == "imbalance":
        table = ex.run_imbalance_map(cfg)
    elif cmd == "sweep":
        table = ex.run_closed_stirap(cfg)[1] if cfg.case == "closed" else ex.run_open_sweep(cfg)
    elif cmd == "aopt":
        table = ex.a_opt_table(cfg)
    elif cmd == "assist":
        table = ex.run_emission_assist(cfg)
    elif cmd == "variant":
        jump = _parse_jump(args.jump) if args.jump else None
        table = ex.run_coherent_decay_variant(cfg, jump)
    elif cmd == "matrix":
        return _matrix_report(cfg) + "\n"
    else:  # pragma: no cover - argparse restricts choices
        raise ex.ConfigError(cmd)
    return table.dump(cfg.format)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        text = run(args, cfg)
    except (ex.ConfigError, ValueError) as exc:
        parser.error(str(exc))
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:  # e.g. piped into head
            sys.stdout = None
    return 0


if __name__ == "__main__":
    sys.exit(main())
