"""Command-line entry point.

Exit codes: 0 ok, 2 invalid input, 3 internal invariant violated,
4 trajectory left the safety box.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .algebra import AlgebraError
from .analysis import ClassificationError
from .config import ConfigError, SystemConfig, load_config, shipped_systems
from .pipeline import analyze, public, study
from .simulation.dynamics import DivergenceError, UnsupportedError, integrate
from .spectral import InconsistencyError, SpectralError
from .system import SpecError

EXIT_OK, EXIT_INPUT, EXIT_INCONSISTENT, EXIT_DIVERGED = 0, 2, 3, 4

log = logging.getLogger("liectrl")


class InputError(ValueError):
    pass


def _setup_logging() -> None:
    level = os.environ.get("LIECTRL_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _dumps(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, complex):
            return [o.real, o.imag]
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _emit(args, files: dict, stdout_text: str) -> None:
    """Write ``files`` under --out, or print ``stdout_text``."""
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
            log.info("wrote %s", out / name)
    else:
        sys.stdout.write(stdout_text)


def _load(args) -> SystemConfig:
    cfg = load_config(args.config)
    cfg.sim = cfg.sim.with_overrides(args.horizon, args.cells, args.dwell)
    if cfg.sim.horizon <= 0 or cfg.sim.dwell <= 0:
        raise InputError("--horizon and --dwell must be positive")
    return cfg


def _stem(cfg: SystemConfig) -> str:
    return cfg.spec.name or (cfg.source.stem if cfg.source else "system")


def cmd_analyze(args) -> int:
    if args.format == "csv":
        raise InputError("analyze produces a text or JSON report; use --format json or omit --format")
    cfg = _load(args)
    res = analyze(cfg)
    report = res["_report"]
    data = public(res)
    dec = res["_decomposition"]
    text = "\n".join(
        [
            f"system: {_stem(cfg)} (dim {cfg.spec.dim})",
            f"eigenvalues: " + ", ".join(f"{ev.real:+.6g}{ev.imag:+.6g}j (x{m})" for ev, m in dec.eigenvalues),
            "dims g+/g0/g-: %d/%d/%d" % dec.dims,
            f"hyperbolic: {dec.hyperbolic}",
            f"grading residual: {data['grading']['residual']:.3g}",
            report.to_text(),
        ]
    ) + "\n"
    body = _dumps(data) if args.format == "json" else text
    _emit(args, {f"{_stem(cfg)}_analysis.json": _dumps(data), f"{_stem(cfg)}_analysis.txt": text}, body)
    return EXIT_OK


def parse_control_script(text: str, m: int) -> list[tuple[float, list[float]]]:
    """``[[duration, value], ...]`` or ``[{"duration": .., "value": ..}, ...]``.

    A scalar value is accepted when there is one control.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"control script is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise InputError("control script must be a non-empty list of (duration, value) pairs")
    out = []
    for seg in raw:
        if isinstance(seg, dict):
            dur, val = seg.get("duration"), seg.get("value")
        elif isinstance(seg, list) and len(seg) == 2:
            dur, val = seg
        else:
            raise InputError(f"bad control segment {seg!r}")
        val = np.atleast_1d(np.asarray(val, dtype=float))
        if val.shape != (m,):
            raise InputError(f"control value {val.tolist()} must have {m} entries")
        if dur is None or float(dur) <= 0:
            raise InputError(f"segment duration must be positive, got {dur!r}")
        out.append((float(dur), val.tolist()))
    return out


def fit_to_horizon(script, T: float):
    """Cut the script at ``T``; hold the last value if it ends early."""
    out, t = [], 0.0
    for dur, val in script:
        if t + dur >= T - 1e-12:
            out.append((T - t, val))
            return out
        out.append((dur, val))
        t += dur
    out.append((T - t, script[-1][1]))
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    m, d = cfg.spec.controls.shape
    src = args.control
    if src is None:
        raise InputError("simulate needs --control (a JSON file or inline JSON)")
    text = Path(src).read_text() if Path(src).exists() else src
    script = parse_control_script(text, m)
    if args.horizon is not None:
        if args.horizon <= 0:
            raise InputError("--horizon must be positive")
        script = fit_to_horizon(script, args.horizon)
    x0 = np.zeros(d) if args.x0 is None else np.array([float(v) for v in args.x0.split(",")])
    if x0.shape != (d,):
        raise InputError(f"--x0 must have {d} comma-separated entries")
    dt = args.dt if args.dt is not None else cfg.sim.trajectory_dt
    traj = integrate(cfg.spec, x0, script, dt, safety=cfg.sim.safety)
    csv = traj.to_csv()
    js = _dumps({"t": traj.t, "x": traj.x})
    body = js if args.format == "json" else csv
    _emit(args, {f"{_stem(cfg)}_trajectory.csv": csv}, body)
    return EXIT_OK


def _grid_command(args, which: str) -> int:
    cfg = _load(args)
    st = study(cfg, threads=args.threads, with_checks=(which == "control_set" and not args.skip_checks))
    summary = st.summary()
    for line in summary["cross_check_lines"]:
        print(line, file=sys.stderr)
    stem = _stem(cfg)
    grid = st.reach if which == "reachable" else st.estimate.grid
    files = {f"{stem}_{which}.csv": grid.to_csv(), f"{stem}_summary.json": _dumps(summary)}
    if which == "control_set":
        files[f"{stem}_reachable.csv"] = st.reach.to_csv()
        files[f"{stem}_controllable.csv"] = st.controllable.to_csv()
    body = _dumps(summary) if args.format == "json" else grid.to_csv()
    _emit(args, files, body)
    return EXIT_OK


def cmd_reach(args) -> int:
    return _grid_command(args, "reachable")


def cmd_controlset(args) -> int:
    return _grid_command(args, "control_set")


def cmd_list(args) -> int:
    print("\n".join(shipped_systems()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="system JSON file, or the name of a bundled system")
    common.add_argument("--horizon", type=float, help="time horizon T")
    common.add_argument("--cells", type=int, help="cells per axis of the main grid")
    common.add_argument("--dwell", type=float, help="control dwell time")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid expansion")
    common.add_argument("--out", help="write outputs into this directory instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="stdout format")

    p = argparse.ArgumentParser(prog="liectrl", description="Linear control systems on nilpotent Lie groups.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="decomposition and classification report").set_defaults(
        func=cmd_analyze
    )
    sim = sub.add_parser("simulate", parents=[common], help="integrate one trajectory")
    sim.add_argument("--control", help="control script: JSON list of [duration, value] pairs, or a file holding it")
    sim.add_argument("--x0", help="initial point in exponential coordinates, comma separated")
    sim.add_argument("--dt", type=float, help="integration step")
    sim.set_defaults(func=cmd_simulate)
    sub.add_parser("reach", parents=[common], help="reachable-set grid").set_defaults(func=cmd_reach)
    cs = sub.add_parser("controlset", parents=[common], help="control-set estimate and cross-check")
    cs.add_argument("--skip-checks", action="store_true", help="skip the dual, semigroup and monotonicity checks")
    cs.set_defaults(func=cmd_controlset)
    sub.add_parser("list", help="names of the bundled systems").set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InconsistencyError, ClassificationError) as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (ConfigError, SpecError, AlgebraError, SpectralError, UnsupportedError, InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
