"""Command-line interface: trajgen, synth, dataset, train, infer, eval, epi.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime error. Every
run writes ``run-config.json`` (the fully resolved configuration) next to
its outputs. Flags mirror config-file keys and take precedence over files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__

log = logging.getLogger("lfdeblur")

RUN_CONFIG = "run-config.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ helpers

def _read_json(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"{what}: file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what}: invalid JSON in {path}: {exc}")


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _snapshot(out_dir, args, resolved: dict):
    cmd = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
           if k not in ("func",)}
    _write_json(Path(out_dir) / RUN_CONFIG,
                {"tool_version": __version__, "command": cmd, "resolved": resolved})


def _merge(base: dict, overrides: dict, cls, what):
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - set(cls.__dataclass_fields__)
    if unknown:
        raise UsageError(f"{what}: unknown field '{sorted(unknown)[0]}'")
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{what}: {exc}")


def _bounds(args):
    from .motion import MotionBounds
    base = _read_json(args.bounds, "bounds") if args.bounds else {}
    return _merge(base, {"max_pxy": args.max_pxy, "max_pz": args.max_pz,
                         "max_phi_theta": args.max_phi_theta, "max_psi": args.max_psi},
                  MotionBounds, "bounds")


def _add_bounds_flags(p):
    p.add_argument("--bounds", type=Path, help="MotionBounds JSON file")
    p.add_argument("--max-pxy", type=float, dest="max_pxy")
    p.add_argument("--max-pz", type=float, dest="max_pz")
    p.add_argument("--max-phi-theta", type=float, dest="max_phi_theta")
    p.add_argument("--max-psi", type=float, dest="max_psi")


def _mode(value):
    from .blur import WarpMode
    try:
        return WarpMode(value)
    except ValueError:
        raise UsageError(f"mode: expected one of {[m.value for m in WarpMode]}, got {value!r}")


# ---------------------------------------------------------------- commands

def cmd_trajgen(args):
    from .motion import make_random_trajectory
    bounds = _bounds(args)
    from .blur import trajectory_seeds
    seeds = [args.seed] if args.count == 1 else trajectory_seeds(args.seed, args.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(seeds):
        traj = make_random_trajectory(s, bounds)
        _write_json(out / f"trajectory_{i:04d}.json", traj.to_dict(args.nt))
    _snapshot(out, args, {"bounds": asdict(bounds), "seeds": seeds, "N_t": args.nt})
    print(f"wrote {len(seeds)} trajectories to {out}")


def cmd_synth(args):
    from .blur import BlurJob
    from .lightfield import load_lightfield, save_lightfield
    from .motion import Trajectory, make_random_trajectory, normalize_midpoint
    lf = load_lightfield(args.input)
    bounds = _bounds(args)
    n_t = args.nt
    if args.trajectory:
        d = _read_json(args.trajectory, "trajectory")
        traj = Trajectory.from_dict(d)
        if not traj.normalized:
            traj = normalize_midpoint(traj)
        if n_t is None:
            n_t = d.get("N_t")
    else:
        traj = make_random_trajectory(args.seed, bounds)
    n_t = 32 if n_t is None else n_t
    if n_t < 1:
        raise UsageError(f"nt: must be >= 1, got {n_t}")
    job = BlurJob(lf, traj, n_t, _mode(args.mode))
    blurred, gt = job.run()
    out = Path(args.out)
    save_lightfield(blurred, out / "blurred", bit_depth=args.bit_depth)
    save_lightfield(gt, out / "ground_truth", bit_depth=args.bit_depth)
    _write_json(out / "job.json", {**job.manifest(), "input": str(args.input),
                                   "blurred": "blurred", "ground_truth": "ground_truth"})
    _snapshot(out, args, job.manifest())
    print(f"wrote blurred/ground-truth pair to {out}")


def cmd_dataset(args):
    from .blur import generate_dataset
    bounds = _bounds(args)
    manifest = generate_dataset(args.sharp_dir, args.motions, bounds, args.nt, args.seed,
                                args.out, _mode(args.mode), bit_depth=args.bit_depth)
    _snapshot(args.out, args, manifest["config"])
    print(f"wrote {len(manifest['pairs'])} pairs to {args.out}")


def cmd_train(args):
    from .net import NetworkConfig, save_checkpoint
    from .training import TrainConfig, train
    tbase = _read_json(args.config, "train config") if args.config else {}
    nbase = _read_json(args.net_config, "network config") if args.net_config else {}
    cfg = _merge(tbase, {"patch": args.patch, "n": args.n, "iterations": args.iterations,
                         "lr": args.lr, "lam": args.lam, "seed": args.seed,
                         "color_aug": args.color_aug, "batch": args.batch},
                 TrainConfig, "train config")
    net = _merge(nbase, {"radius": args.radius, "channels": args.channels, "hidden": args.hidden,
                         "num_blocks": args.blocks, "eps": args.eps,
                         "seed": args.seed if args.seed is not None else None},
                 NetworkConfig, "network config")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {"train": asdict(cfg), "network": asdict(net), "dataset": str(args.dataset)}
    _snapshot(out, args, resolved)
    result = train(args.dataset, cfg, net, log_path=out / "train-log.jsonl",
                   log_every=max(1, cfg.iterations // 20))
    save_checkpoint(result.model, out / "checkpoint.bin", extra={"train": asdict(cfg)})
    final = result.log[-1]["loss"] if result.log else float("nan")
    print(f"trained {cfg.iterations} iterations, final loss {final:.6g}; checkpoint in {out}")


def cmd_infer(args):
    from .lightfield import load_lightfield, save_lightfield
    from .net import load_checkpoint
    from .training import deblur_lightfield
    lf = load_lightfield(args.input)
    model, meta = load_checkpoint(args.checkpoint)
    timings = []
    out_lf = deblur_lightfield(lf, model, timings=timings)
    save_lightfield(out_lf, args.out, bit_depth=args.bit_depth)
    _snapshot(args.out, args, {"network": meta.get("network"), "steps": len(timings),
                               "wall_time": sum(timings)})
    print(f"deblurred {len(timings)} views in {sum(timings):.2f} s -> {args.out}")


def cmd_eval(args):
    from .lightfield import load_lightfield
    from .metrics import evaluate_lf
    report = evaluate_lf(load_lightfield(args.pred), load_lightfield(args.gt),
                         str(args.pred), str(args.gt))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n")
    if args.csv:
        report.write_csv(args.csv)
    _snapshot(out.parent, args, {"pred": str(args.pred), "gt": str(args.gt)})
    avg = report.average
    print(f"PSNR {avg['psnr']:.3f} dB  SSIM {avg['ssim']:.4f}  RMSE {avg['rmse']:.5f}")


def cmd_epi(args):
    from .lightfield import extract_epi, load_lightfield, save_epi
    lf = load_lightfield(args.input)
    U, V = lf.angular_size
    if args.axis == "horizontal":
        spatial = args.row
        angular = V // 2 if args.view is None else args.view
        if spatial is None:
            raise UsageError("row: required for a horizontal EPI")
    else:
        spatial = args.col
        angular = U // 2 if args.view is None else args.view
        if spatial is None:
            raise UsageError("col: required for a vertical EPI")
    epi = extract_epi(lf, args.axis, spatial, angular)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_epi(epi, out)
    _snapshot(out.parent, args, {"axis": args.axis, "fixed_spatial": spatial,
                                 "fixed_angular": angular, "shape": list(epi.shape[:2])})
    print(f"wrote {epi.shape[0]}x{epi.shape[1]} EPI to {out}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lfdeblur", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("trajgen", help="emit random trajectory JSON files")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--nt", type=int, default=32)
    s.add_argument("--out", type=Path, required=True)
    _add_bounds_flags(s)
    s.set_defaults(func=cmd_trajgen)

    s = sub.add_parser("synth", help="blur one light field")
    s.add_argument("--input", type=Path, required=True)
    s.add_argument("--trajectory", type=Path, help="trajectory JSON; random from --seed if absent")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--nt", type=int)
    s.add_argument("--mode", default="angular_shift")
    s.add_argument("--bit-depth", type=int, choices=(8, 32), default=8, dest="bit_depth")
    s.add_argument("--out", type=Path, required=True)
    _add_bounds_flags(s)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("dataset", help="blur a directory of sharp light fields")
    s.add_argument("--sharp-dir", type=Path, required=True, dest="sharp_dir")
    s.add_argument("--motions", type=int, default=1, help="trajectories per light field")
    s.add_argument("--nt", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", default="angular_shift")
    s.add_argument("--bit-depth", type=int, choices=(8, 32), default=8, dest="bit_depth")
    s.add_argument("--out", type=Path, required=True)
    _add_bounds_flags(s)
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", help="train the deblurring network")
    s.add_argument("--dataset", type=Path, required=True, help="dataset manifest or directory")
    s.add_argument("--config", type=Path, help="TrainConfig JSON")
    s.add_argument("--net-config", type=Path, dest="net_config", help="NetworkConfig JSON")
    s.add_argument("--seed", type=int)
    s.add_argument("--patch", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--batch", type=int)
    s.add_argument("--iterations", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--lam", type=float)
    s.add_argument("--color-aug", dest="color_aug", action=argparse.BooleanOptionalAction,
                   default=None)
    s.add_argument("--radius", type=int)
    s.add_argument("--channels", type=int)
    s.add_argument("--hidden", type=int)
    s.add_argument("--blocks", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", help="deblur one light field")
    s.add_argument("--input", type=Path, required=True)
    s.add_argument("--checkpoint", type=Path, required=True)
    s.add_argument("--bit-depth", type=int, choices=(8, 32), default=8, dest="bit_depth")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", help="PSNR/SSIM/RMSE report")
    s.add_argument("--pred", type=Path, required=True)
    s.add_argument("--gt", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True, help="report JSON path")
    s.add_argument("--csv", type=Path)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("epi", help="export an epipolar plane image as PNG")
    s.add_argument("--input", type=Path, required=True)
    s.add_argument("--axis", choices=("horizontal", "vertical"), default="horizontal")
    s.add_argument("--row", type=int, help="fixed y for a horizontal EPI")
    s.add_argument("--col", type=int, help="fixed x for a vertical EPI")
    s.add_argument("--view", type=int, help="fixed angular index (default: centre)")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_epi)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required "
                             "(trajgen, synth, dataset, train, infer, eval, epi)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"lfdeblur: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"lfdeblur: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
