"""Command-line surface.

Exit codes: 0 on success, 1 when an attack ran but did not succeed,
2 for usage or file-format errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from advkit import baselines, engine, gradcheck, images
from advkit.attack import AttackConfig, run_attack
from advkit.errors import AdvkitError
from advkit.metrics import correlation, ssim


def _load(model_path: str, image_path: str):
    net = engine.load_model(model_path)
    x = images.load_image(image_path)
    return net, x


def _write_report(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def cmd_eval(args) -> int:
    net, x = _load(args.model, args.image)
    _, dist = engine.predict(net, x)
    order = np.argsort(-dist, kind="stable")[:5]
    top5 = [{"class": int(k), "probability": float(dist[k])} for k in order]
    print(json.dumps({"top5": top5}, indent=2))
    return 0


def cmd_attack(args) -> int:
    net, x = _load(args.model, args.image)
    config = AttackConfig(
        target_class=args.target,
        epsilon=args.eps,
        cr_min=args.cr_min,
        ssi_min=args.ssi_min,
        step_size=args.step,
        max_inner_iters=args.max_inner,
        max_outer_iters=args.max_outer,
        seed=args.seed,
    )
    report = run_attack(net, x, config)
    if args.out_image:
        images.save_image(report.final_adversarial_image, args.out_image)
    _write_report(args.out_report, report.to_dict())
    return 0 if report.success else 1


def _baseline_report(net, x, adversarial, target) -> dict:
    pred, dist = engine.predict(net, adversarial)
    return {
        "success": bool(target is not None and pred == target),
        "predicted_class": pred,
        "target_class": target,
        "target_confidence": float(dist[target]) if target is not None else None,
        "cr": correlation(x, adversarial),
        "ssi": ssim(x, adversarial),
    }


def cmd_fgsm(args) -> int:
    net, x = _load(args.model, args.image)
    adversarial, _ = baselines.fgsm(net, x, args.target, args.if_factor)
    report = _baseline_report(net, x, adversarial, args.target)
    if args.target is None:
        pred0, _ = engine.predict(net, x)
        report["success"] = report["predicted_class"] != pred0
    if args.out_image:
        images.save_image(adversarial, args.out_image)
    _write_report(args.out_report, report)
    return 0 if report["success"] else 1


def cmd_lbfgs(args) -> int:
    net, x = _load(args.model, args.image)
    adversarial, _ = baselines.lbfgs_attack(net, x, args.target, c=args.c,
                                            max_iters=args.max_iters)
    report = _baseline_report(net, x, adversarial, args.target)
    if args.out_image:
        images.save_image(adversarial, args.out_image)
    _write_report(args.out_report, report)
    return 0 if report["success"] else 1


def cmd_sweep(args) -> int:
    net, x = _load(args.model, args.image)
    if_values = [float(v) for v in args.if_values.split(",") if v]
    result = baselines.run_if_sweep(net, x, args.target, if_values)
    if args.out_csv:
        Path(args.out_csv).write_text(result.to_csv())
    if args.out_json:
        Path(args.out_json).write_text(result.to_json() + "\n")
    if not args.out_csv and not args.out_json:
        print(result.to_csv(), end="")
    return 0


def cmd_check_gradients(args) -> int:
    net = engine.load_model(args.model)
    result = gradcheck.check_input_gradient(net, probes=args.probes, seed=args.seed)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} max_rel_error={result.max_rel_error:.3e} "
          f"probes={result.probes} tol={result.tol:g}")
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advkit",
        description="Generate imperceptible targeted adversarial images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="print top-5 classes and probabilities as JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attack", help="run the perception-gated iterative attack")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.0025)
    p.add_argument("--cr-min", type=float, default=0.95)
    p.add_argument("--ssi-min", type=float, default=0.99)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--max-inner", type=int, default=500)
    p.add_argument("--max-outer", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-image")
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("fgsm", help="one-step sign-of-gradient baseline")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--if", dest="if_factor", type=float, required=True)
    p.add_argument("--out-image")
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_fgsm)

    p = sub.add_parser("lbfgs", help="norm-plus-cost quasi-Newton baseline")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--out-image")
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_lbfgs)

    p = sub.add_parser("sweep", help="imperceptibility-factor sweep over both baselines")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--if", dest="if_values", required=True,
                   help="comma-separated factors, e.g. 1,0.1,0.01")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-gradients", help="finite-difference gradient verification")
    p.add_argument("--model", required=True)
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_gradients)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse uses 2 for usage errors and 0 for --help
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except AdvkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
