"""Command-line surface: prepare-data, train, infer, evaluate, gradcheck.

Every failure exits nonzero with a single machine-parseable ``error: ...``
line on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import fields

from . import dataset, gradcheck, training
from .errors import UsageError
from .training import RunConfig, load_config


def _add_run_config_flags(parser: argparse.ArgumentParser):
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type is bool or f.type == "bool":
            parser.add_argument(flag, type=str, choices=("true", "false"), default=None,
                                help=f"override {f.name}")
        else:
            parser.add_argument(flag, type=str, default=None, help=f"override {f.name}")


def _build_run_config(args) -> RunConfig:
    if args.config and args.toy_preset:
        raise UsageError("--config and --toy-preset are mutually exclusive")
    if args.toy_preset:
        cfg = training.toy_run_config()
    else:
        cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        overrides[f.name] = training._parse_field(f, raw)
    return dataclasses.replace(cfg, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqface",
                                     description="Frequency-aware face super-resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="build the training artifacts for a directory of images")
    p.add_argument("--src", default=None, help="directory of source PNG/PPM images")
    p.add_argument("--synthetic", type=int, default=0, help="generate N synthetic source images instead")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--scale", type=int, default=4, choices=(4, 8))
    p.add_argument("--hr-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="run the alternating GAN training loop")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--toy-preset", action="store_true", help="start from the CI-sized preset")
    p.add_argument("--resume", default=None, help="checkpoint directory to resume from")
    _add_run_config_flags(p)

    p = sub.add_parser("infer", help="super-resolve one LR image with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("evaluate", help="Y-channel PSNR/SSIM over a prepared dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--crop-border", action="store_true",
                   help="crop scale pixels from each border before computing metrics")

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--suite", default="all", choices=("all", "ops", "dct", "model"))
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "prepare-data":
            count = dataset.prepare_data(args.src, args.out, args.scale, args.seed,
                                         hr_size=args.hr_size, synthetic=args.synthetic)
            print(f"wrote {count} entries to {args.out}")
        elif args.command == "train":
            cfg = _build_run_config(args)
            state = training.train(cfg, resume_from=args.resume)
            print(f"trained to step {state.step}; final checkpoint in "
                  f"{cfg.out_dir}/{training.FINAL_CHECKPOINT}")
        elif args.command == "infer":
            out = training.infer(args.checkpoint, args.input, args.output)
            print(f"wrote {out}")
        elif args.command == "evaluate":
            rows = training.evaluate(args.checkpoint, args.data, out_csv=args.out,
                                     crop_border=args.crop_border)
            for r in rows:
                print("%-16s psnr=%.4f ssim=%.4f bicubic_psnr=%.4f bicubic_ssim=%.4f" % (
                    r["name"], r["psnr"], r["ssim"], r["bicubic_psnr"], r["bicubic_ssim"]))
        elif args.command == "gradcheck":
            results, ok = gradcheck.run_suites(args.suite, args.seed)
            for r in results:
                status = "PASS" if r.passed() else "FAIL"
                print(f"{r.name:<24} max_rel_err={r.max_rel_err:.3e} {status}")
            if not ok:
                print("error: gradient check failed", file=sys.stderr)
                return 1
        return 0
    except Exception as exc:  # single-line, machine-parseable failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
