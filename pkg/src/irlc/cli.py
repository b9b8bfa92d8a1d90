"""Command-line entry point: ``irlc {train,eval,filter,synth,sweep}``.

Every command writes under ``--out`` and finishes with a ``manifest.json``
listing the files it produced.  ``IRLC_DATA_ROOT`` sets the default data
directory for file-backed runs and the default location of VQA files.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import DATA_ROOT_ENV, PROFILES, ConfigError, build_config, default_data_root, parse_assignments

VQA_FILES = {
    "train_questions": "v2_OpenEnded_mscoco_train2014_questions.json",
    "train_annotations": "v2_mscoco_train2014_annotations.json",
    "val_questions": "v2_OpenEnded_mscoco_val2014_questions.json",
    "val_annotations": "v2_mscoco_val2014_annotations.json",
    "vg_qa": "question_answers.json",
    "vg_images": "image_data.json",
}


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _run_flags(p, out_default=None):
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--profile", choices=PROFILES, help="dimension profile (default desk)")
    p.add_argument("--no-grounding", action="store_true", help="disable the caption-grounding loss")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--model", help="softcount, updown, irlc, guess1 or lstm")
    p.add_argument("--epochs", type=int, help="maximum number of epochs")
    p.add_argument("--data-dir", help=f"read a prepared data directory (default ${DATA_ROOT_ENV})")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (JSON value)")


def _overrides(args):
    ov = parse_assignments(args.set)
    flags = {"seed": args.seed, "profile": args.profile, "out": args.out, "model": args.model,
             "max_epochs": args.epochs}
    ov.update({k: v for k, v in flags.items() if v is not None})
    if args.no_grounding:
        ov["grounding"] = False
    if args.data_dir:
        ov["data"], ov["data_dir"] = "files", args.data_dir
    return ov


def build_parser():
    parser = argparse.ArgumentParser(prog="irlc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a counting model")
    _run_flags(p)

    p = sub.add_parser("eval", help="evaluate a trained run")
    p.add_argument("run", help="output directory of a train command")
    p.add_argument("--split", default="dev")
    p.add_argument("--out", help="output directory (default RUN/eval-SPLIT)")
    p.add_argument("--data-dir", help="evaluate on a prepared data directory")
    p.add_argument("--no-grounding", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("synth", help="write a synthetic dataset to disk")
    _run_flags(p)

    p = sub.add_parser("filter", help="build counting splits from VQA-format annotations")
    root = "$" + DATA_ROOT_ENV
    for key, name in VQA_FILES.items():
        p.add_argument("--" + key.replace("_", "-"), help=f"default {root}/{name}")
    p.add_argument("--no-vg", action="store_true", help="ignore Visual Genome pairs")
    p.add_argument("--test-manifest", help="file of test question ids")
    p.add_argument("--n-test", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="IRLC penalty-weight grid")
    _run_flags(p)
    p.add_argument("--entropy-grid", type=_floats, default=[0.0, 0.005, 0.05, 0.5])
    p.add_argument("--interaction-grid", type=_floats, default=[0.0, 0.005, 0.05, 0.5])
    return parser


def _filter(args):
    from .prepare import cmd_filter

    root = default_data_root()
    path = {k: getattr(args, k) or os.path.join(root, name) for k, name in VQA_FILES.items()}
    vg = None
    if not args.no_vg and os.path.exists(path["vg_qa"]) and os.path.exists(path["vg_images"]):
        vg = (path["vg_qa"], path["vg_images"])
    splits, hist = cmd_filter(
        (path["train_questions"], path["train_annotations"]),
        (path["val_questions"], path["val_annotations"]),
        args.out, vg, args.test_manifest, args.n_test, args.seed,
    )
    for source, h in hist.items():
        print(source, " ".join(f"{k}={v}" for k, v in sorted(h.items())))
    print(" ".join(f"{k}={len(v)}" for k, v in splits.items()))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "filter":
            _filter(args)
        elif args.command == "eval":
            from .evaluate import cmd_eval

            ov = {"data": "files", "data_dir": args.data_dir} if args.data_dir else None
            report, _ = cmd_eval(args.run, args.split, args.out, ov)
            print(f"accuracy={report.accuracy:.4f} rmse={report.rmse:.4f} n={report.n}")
        else:
            ov = _overrides(args)
            if args.command == "synth" and "seed" in ov:
                ov["synth"] = {**ov.get("synth", {}), "seed": ov["seed"]}
            ov.setdefault("out", os.path.join("runs", args.command))
            cfg = build_config(args.config, ov)
            if args.command == "train":
                from .train import cmd_train

                res = cmd_train(cfg)
                print(f"best_epoch={res.best_epoch} dev_accuracy={res.best_dev_accuracy:.4f} "
                      f"dev_rmse={res.best_dev_rmse:.4f} out={res.out}")
            elif args.command == "synth":
                from .prepare import cmd_synth

                sizes = cmd_synth(cfg)
                print(" ".join(f"{k}={v}" for k, v in sizes.items()), f"out={cfg.out}")
            else:
                from .train import cmd_sweep

                for row in cmd_sweep(cfg, args.entropy_grid, args.interaction_grid):
                    print(",".join(str(x) for x in row))
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
