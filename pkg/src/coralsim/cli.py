"""Command-line entry points.

    coralsim train  --spec <file> [--resume]
    coralsim eval   --checkpoint <file> --spec <file> --episodes N --out <dir>
    coralsim fit    --curve <csv> --model log|linear
    coralsim report <dir>
    coralsim plant  --config <file> --bind <host:port> [--realtime]
    coralsim infer  --checkpoint <file> --connect <host:port> --duration <s> --out <csv>

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"address must be host:port, got {text!r}")
    return host, int(port)


def _cmd_train(args) -> int:
    from .harness import load_experiment_spec, run_experiment
    spec = load_experiment_spec(args.spec)
    result = run_experiment(spec, resume=args.resume)
    print(f"trained {result.env_steps} steps, {result.episodes} episodes; "
          f"mean reward (last 100) {result.mean_reward_last100:.4f}")
    print(f"artifacts in {result.output_dir}")
    return 0


def _cmd_eval(args) -> int:
    from .harness import evaluate_policy, load_experiment_spec
    from .rl.checkpoint import CheckpointError, load_checkpoint
    spec = load_experiment_spec(args.spec)
    ck = load_checkpoint(args.checkpoint)
    expect = (spec.sensors.camera.height, spec.sensors.camera.width, 3)
    if ck.net_config.image_shape is not None and tuple(ck.net_config.image_shape) != expect:
        raise CheckpointError(
            f"checkpoint renders {ck.net_config.image_shape}, spec camera is {expect}")
    reports, success_rate = evaluate_policy(args.checkpoint, args.episodes,
                                            spec.eval_seed, args.out)
    out = Path(args.out)
    payload = {
        "success_rate": success_rate,
        "max_deviation": max((r.max_deviation for r in reports), default=0.0),
        "mean_deviation": (sum(r.mean_deviation for r in reports) / len(reports)
                           if reports else 0.0),
        "episodes": len(reports),
    }
    (out / "deviations.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_fit(args) -> int:
    from .harness import fit_trend, read_reward_curve
    with open(args.curve) as f:
        first = f.readline()
    if "episode" in first and "agent" in first:
        points = read_reward_curve(args.curve)
    else:
        points = []
        with open(args.curve) as f:
            reader = csv.reader(f)
            for row in reader:
                try:
                    points.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    continue  # header or junk line
    fit = fit_trend(points, args.model)
    term = "ln(x)" if args.model == "log" else "x"
    print(f"y = {fit.a:.6g}*{term} + {fit.b:.6g}   (rmse {fit.rmse:.6g}, "
          f"n={len(points)})")
    return 0


def _cmd_report(args) -> int:
    from .harness import emit_report
    path = emit_report(args.run_dir)
    print(path.read_text())
    return 0


def _cmd_plant(args) -> int:
    from .harness import load_experiment_spec
    from .hil import MockPlant
    spec = load_experiment_spec(args.config)
    plant = MockPlant(spec.world, spec.vehicle, spec.sensors,
                      realtime=args.realtime)
    print(f"plant listening on {args.bind[0]}:{args.bind[1]} "
          f"({'realtime' if args.realtime else 'accelerated'})")
    plant.serve(args.bind, max_ticks=args.max_ticks)
    return 0


def _cmd_infer(args) -> int:
    from .hil import run_inference_client
    report = run_inference_client(args.checkpoint, args.connect, args.duration,
                                  args.out, reset_seed=args.seed)
    print(f"drove {report.ticks} ticks ({report.sequence_gaps} feedback gaps); "
          f"trajectory in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coralsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training trial from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint deterministically")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("fit", help="least-squares trend fit of a reward curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--model", choices=("log", "linear"), required=True)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("run_dir")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("plant", help="serve the mock plant over UDP")
    p.add_argument("--config", required=True, help="experiment spec file")
    p.add_argument("--bind", type=_addr, required=True)
    p.add_argument("--realtime", action="store_true")
    p.add_argument("--max-ticks", type=int, default=None)
    p.set_defaults(fn=_cmd_plant)

    p = sub.add_parser("infer", help="drive a plant with a trained policy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--connect", type=_addr, required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_infer)
    return parser


def main(argv=None) -> int:
    from .harness import MissingArtifactError
    from .rl.checkpoint import CheckpointError
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except (ConfigError, CheckpointError, MissingArtifactError,
            FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
