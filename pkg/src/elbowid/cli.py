"""Command-line entry point.

    elbowid train     [--config F] [--seed N] [--out DIR]
    elbowid run-ie    | run-mii | run-sii | run-dii  [--controller K] [--policy P] ...
    elbowid identify  --trace CSV --pulse AMP,HALF [--inertia I] [--onset S]
    elbowid identify  --sine-trace CSV [CSV ...]
    elbowid report    RUN_DIR [RUN_DIR ...]

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime or fit failure.
The output root is ``--out``, else ``[run] out`` from the config, else
``$ELBOWID_OUT``, else ``./runs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace
from typing import List, Optional

import numpy as np

from elbowid import __version__
from elbowid import baselines as baseline_data
from elbowid.config import RunConfig
from elbowid.errors import ValidationError
from elbowid.protocols import dumps, run, save_report
from elbowid.rl import evaluate, initial_policy, train, write_curve_csv
from elbowid.signals import PulseProfile, PulseSpec
from elbowid.sysid import DeConfig, SinusoidFitPoint, dominant_component, estimate_inertia, fit_kb
from elbowid.trace import read_csv

log = logging.getLogger("elbowid")

ENV_OUT = "ELBOWID_OUT"


# ---------------------------------------------------------------------------
# helpers

def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.set("run", "seed", args.seed)
    if args.emit_svg:
        cfg.set("run", "emit_svg", True)
    return cfg


def _out_root(args, cfg: RunConfig) -> Path:
    root = args.out or cfg.get("run", "out") or os.environ.get(ENV_OUT) or "runs"
    return Path(root)


def _run_dir(root: Path, kind: str, seed: int) -> Path:
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    base = root / f"{kind.lower()}-{seed}-{stamp}"
    path, k = base, 1
    while path.exists():
        path = Path(f"{base}-{k}")
        k += 1
    path.mkdir(parents=True)
    return path


def _parse_pulse(text: str):
    try:
        amp, half = (float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"--pulse expects AMPLITUDE,HALF_DURATION, got {text!r}") from None
    return amp, half


def _floats(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.iterations is not None:
        cfg.set("rl", "iterations", args.iterations)
    plant, npg = cfg.plant_config(), cfg.npg_config()
    npg.validate()
    out = _run_dir(_out_root(args, cfg), "train", npg.seed)
    started = time.perf_counter()
    result = train(plant, npg, progress=lambda it, m: log.info("iteration %d: mean return %.3f", it, m))
    elapsed = time.perf_counter() - started
    result.policy.save(out / "policy.json")
    write_curve_csv(result.curve, out / "learning_curve.csv")
    r0, _ = evaluate(plant, initial_policy(npg.seed), horizon=npg.horizon)
    r1, err = evaluate(plant, result.policy, horizon=npg.horizon)
    rd, err_det = evaluate(plant, result.policy, horizon=npg.horizon, deterministic=True)
    summary = {
        "npg": npg.to_dict(), "plant": plant.to_dict(),
        "evaluation": {
            "initial_mean_return": r0, "trained_mean_return": r1,
            "trained_mean_return_deterministic": rd,
            "relative_improvement": (r1 - r0) / abs(r0) if r0 else None,
            "steady_state_error_rad": err.tolist(),
            "steady_state_error_deterministic_rad": err_det.tolist(),
        },
    }
    (out / "summary.json").write_text(dumps(summary) + "\n")
    if cfg.get("run", "emit_svg"):
        from elbowid.plotting import write_svgs

        curve = np.array(result.curve)
        write_svgs(SimpleNamespace(plots={"learning_curve": {"iteration": curve[:, 0],
                                                             "mean_return": curve[:, 1]}}), out)
    print(f"policy: {out / 'policy.json'}")
    print(f"initial return {r0:.3f} -> trained {r1:.3f} (deterministic {rd:.3f}); "
          f"{elapsed:.1f} s")
    return 0


def cmd_run(args) -> int:
    kind = args.command.split("-", 1)[1].upper()
    cfg = _load_config(args)
    controller = None
    if kind in ("SII", "DII"):
        controller = cfg.controller_spec(args.controller)
        changes = {}
        if args.policy:
            changes["policy_path"] = args.policy
        if args.deterministic:
            changes["deterministic"] = True
        if args.kp is not None:
            changes["kp"] = args.kp
        if args.kd is not None:
            changes["kd"] = args.kd
        if args.latency is not None:
            changes["latency"] = args.latency
        controller = replace(controller, **changes)
        if controller.kind == "policy" and not controller.policy_path:
            raise ValidationError(f"run-{kind.lower()} with a policy controller needs --policy "
                                  "or [controller] policy_path")
    section = kind.lower()
    if getattr(args, "trials", None) is not None:
        cfg.set(section, "trials", args.trials)
    if getattr(args, "pulse", None):
        amp, half = _parse_pulse(args.pulse)
        cfg.set(section, "pulse_amplitude", amp).set(section, "pulse_half_duration", half)
    if getattr(args, "targets_deg", None):
        cfg.set("sii", "targets_deg", _floats(args.targets_deg))
    if getattr(args, "frequencies", None):
        cfg.set("ie", "frequencies", _floats(args.frequencies))
    if getattr(args, "inertia", None) is not None:
        cfg.set("fit", "inertia", args.inertia)
    spec = cfg.experiment_spec(kind, controller=controller).validate()
    report = run(spec)
    out = _run_dir(_out_root(args, cfg), kind, spec.seed)
    path = save_report(report, out, emit_svg=cfg.get("run", "emit_svg"))
    for flag in report.flags:
        print(f"flag: {flag}")
    print(_summary_line(report.to_json()))
    print(f"report: {path}")
    print(f"sha256: {report.content_hash()}")
    return 0


def _summary_line(rep: dict) -> str:
    est = rep["estimates"]
    kind = rep["kind"]
    if kind == "IE":
        return f"IE: pooled inertia {est['inertia']:.6g} kg m^2/rad"
    if kind == "MII":
        e = est["estimate"]
        return f"MII: K {e['K']:.4g} N m/rad, B {e['B']:.4g} N m s/rad, residual {e['residual_rms_rad']:.3g} rad"
    if kind == "SII":
        parts = [f"{r['target']:.3f}:{r['estimate']['K']:.1f}" for r in est["per_target"] if r["estimate"]]
        return "SII: K by target " + ", ".join(parts)
    parts = []
    for phase in ("flexion", "extension"):
        e = est[phase]
        if e["degenerate"]:
            parts.append(f"{phase} degenerate")
        else:
            parts.append(f"{phase} K {e['K']:.4g} B {e['B']:.4g}")
    return "DII: " + "; ".join(parts)


def cmd_identify(args) -> int:
    if args.sine_trace:
        points = []
        for path in args.sine_trace:
            tr = read_csv(path)
            tail = int(round(args.tail_fraction * (len(tr) - 1)))
            f_out, a_out, _ = dominant_component(tr.theta[-tail:], tr.dt)
            f_in, a_in, _ = dominant_component(tr.tau_ext[-tail - 1:-1], tr.dt)
            points.append(SinusoidFitPoint(f_in, a_in, a_out))
        inertia, curve = estimate_inertia(points, args.f_cutoff)
        result = {"inertia": inertia, "curve": [{"f": f, "I": i} for f, i in curve]}
        print(dumps(result))
        return 0
    if not args.trace or not args.pulse:
        raise ValidationError("identify needs --trace with --pulse, or --sine-trace")
    amp, half = _parse_pulse(args.pulse)
    tr = read_csv(args.trace)
    if args.onset is not None:
        idx = tr.index_of(args.onset)
    else:
        nz = np.nonzero(tr.tau_ext)[0]
        if nz.size == 0:
            raise ValidationError(f"{args.trace}: torque column is all zero; pass --onset")
        idx = int(nz[0])
    sign = np.sign(tr.tau_ext[idx]) if tr.tau_ext[idx] != 0 else 1.0
    pulse = PulseSpec(amp, half, 0.0, int(sign) or 1).validate(args.control_dt)
    aligned = tr.reorigin(idx)
    est = fit_kb(aligned, PulseProfile(pulse), args.inertia,
                 bounds=((args.k_min, args.k_max), (args.b_min, args.b_max)),
                 de_config=DeConfig(seed=args.de_seed), window=pulse.duration + args.fit_settle)
    print(dumps(est.to_json()))
    return 0


def _rows_from_report(rep: dict, source: str) -> List[dict]:
    kind, est = rep["kind"], rep["estimates"]
    rows = []
    if kind == "MII":
        e = est["estimate"]
        rows.append(dict(source=source, condition="MII passive", angle_rad=None, K=e["K"], B=e["B"]))
    elif kind == "SII":
        for r in est["per_target"]:
            if r["estimate"]:
                rows.append(dict(source=source, condition="SII hold", angle_rad=r["target"],
                                 K=r["estimate"]["K"], B=r["estimate"]["B"]))
    elif kind == "DII":
        for phase in ("flexion", "extension"):
            e = est[phase]
            rows.append(dict(source=source, condition=f"DII {phase}", angle_rad=e["onset_angle_rad"],
                             K=e["K"], B=e["B"]))
    elif kind == "IE":
        rows.append(dict(source=source, condition="IE inertia", angle_rad=None, K=None, B=None,
                         I=est["inertia"]))
    return rows


def cmd_report(args) -> int:
    rows = []
    for run_dir in args.runs:
        path = Path(run_dir) / "report.json"
        if not path.exists():
            raise ValidationError(f"{run_dir}: no report.json")
        rep = json.loads(path.read_text())
        rows += _rows_from_report(rep, f"ours ({Path(run_dir).name})")
    data = baseline_data.load(args.baselines)
    hs = data["human_static"]
    rows.append(dict(source="human", condition="static hold", angle_rad=None, K=hs["K"], B=hs["B"]))
    for row in data["dynamic"]:
        b = row.get("B")
        if b is None and row.get("B_range"):
            b = "-".join(f"{v:g}" for v in row["B_range"])
        rows.append(dict(source=row["study"], condition=row["movement"], angle_rad=None, K=row["K"], B=b))
    fields = ["source", "condition", "angle_rad", "K", "B", "I"]
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with (out / "comparison.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for r in rows:
                w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})

    def fmt(v, spec):
        if v is None:
            return "-"
        return format(v, spec) if isinstance(v, (int, float)) else str(v)

    print(f"{'source':<34} {'condition':<16} {'angle':>7} {'K':>9} {'B':>10}")
    for r in rows:
        print(f"{r['source']:<34} {r['condition']:<16} {fmt(r.get('angle_rad'), '.3f'):>7} "
              f"{fmt(r.get('K'), '.2f'):>9} {fmt(r.get('B'), '.4f'):>10}")
    if out is not None:
        print(f"table: {out / 'comparison.csv'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="overrides [run] seed")
    common.add_argument("--out", help=f"output root (default: [run] out, ${ENV_OUT}, ./runs)")
    common.add_argument("--emit-svg", action="store_true", help="also write SVG charts (matplotlib)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="elbowid", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"elbowid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train the hold policy with NPG")
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_train)

    for kind in ("ie", "mii", "sii", "dii"):
        p = sub.add_parser(f"run-{kind}", parents=[common], help=f"run the {kind.upper()} experiment")
        p.add_argument("--inertia", type=float, help="inertia used by the K/B fit (prior IE result)")
        if kind == "ie":
            p.add_argument("--frequencies", help="comma-separated list in Hz")
        else:
            p.add_argument("--trials", type=int)
            p.add_argument("--pulse", help="AMPLITUDE,HALF_DURATION in N m and s")
        if kind in ("sii", "dii"):
            p.add_argument("--controller", choices=("passive", "pd", "policy"))
            p.add_argument("--policy", help="policy JSON written by train")
            p.add_argument("--deterministic", action="store_true", help="use the policy mean")
            p.add_argument("--kp", type=float)
            p.add_argument("--kd", type=float)
            p.add_argument("--latency", type=float)
        if kind == "sii":
            p.add_argument("--targets-deg", help="comma-separated hold targets in degrees")
        p.set_defaults(func=cmd_run)

    p = sub.add_parser("identify", parents=[common], help="fit a trace CSV")
    p.add_argument("--trace", help="pulse-response trace CSV")
    p.add_argument("--pulse", help="AMPLITUDE,HALF_DURATION")
    p.add_argument("--inertia", type=float, default=0.081)
    p.add_argument("--onset", type=float, help="pulse onset in s (default: first non-zero torque)")
    p.add_argument("--fit-settle", type=float, default=0.3)
    p.add_argument("--k-min", type=float, default=0.0)
    p.add_argument("--k-max", type=float, default=300.0)
    p.add_argument("--b-min", type=float, default=0.0)
    p.add_argument("--b-max", type=float, default=10.0)
    p.add_argument("--de-seed", type=int, default=0)
    p.add_argument("--control-dt", type=float, default=0.02)
    p.add_argument("--sine-trace", nargs="+", help="sinusoidal trial CSVs for inertia")
    p.add_argument("--f-cutoff", type=float, default=10.0)
    p.add_argument("--tail-fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("report", parents=[common], help="merge run reports with baselines")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--baselines", help="alternative baselines JSON")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime and fit failures
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
