"""Command line entry point: ``pso-masac {train,compare,plot,eval}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import config as config_io
from .config import PRESETS
from .harness import compare, evaluate_checkpoint, train
from .plot import plot

log = logging.getLogger("pso_masac")


def _load_config(args):
    base = PRESETS[args.preset]()
    return config_io.load(args.config, base) if args.config else base


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_train(args):
    cfg = _load_config(args)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.episodes is not None:
        cfg = replace(cfg, episodes=args.episodes)

    def progress(rec):
        if rec.episode % cfg.log_every == 0:
            log.info("episode %d team_return %.1f coverage %.3f pso_calls %d", rec.episode,
                     rec.team_return, rec.coverage_fraction, rec.pso_calls)

    records = train(cfg, progress=progress)
    last = records[-1]
    print(f"trained {len(records)} episodes -> {cfg.output_dir} (last team return {last.team_return:.1f})")


def cmd_compare(args):
    cfg = _load_config(args)
    if args.episodes is not None:
        cfg = replace(cfg, episodes=args.episodes)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if len(modes) != 2:
        raise ValueError("--modes needs exactly two comma-separated modes")
    cfg_a, cfg_b = (replace(cfg, explore=replace(cfg.explore, mode=m)) for m in modes)
    report = compare(cfg_a, cfg_b, _int_list(args.seeds), out_dir=args.out)
    for row in report.rows:
        print(f"seed {row['seed']}: auc {row['mode_a']}={row['auc_a']:.1f} {row['mode_b']}={row['auc_b']:.1f}")
    print(f"{report.modes[0]} wins {report.wins()}/{len(report.rows)} seeds -> {args.out}")


def cmd_plot(args):
    plot(args.input, args.out, window=args.window)
    print(f"wrote {args.out}")


def cmd_eval(args):
    result = evaluate_checkpoint(args.checkpoint, args.episodes, seed=args.seed)
    print(json.dumps(result, sort_keys=True))


def build_parser():
    parser = argparse.ArgumentParser(prog="pso-masac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--preset", choices=sorted(PRESETS), default="full",
                       help="defaults the config file is applied on top of")
        p.add_argument("--episodes", type=int, help="override run.episodes")

    p = sub.add_parser("train", help="train one team")
    add_config(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="compare two exploration modes over several seeds")
    add_config(p)
    p.add_argument("--modes", default="epsilon_pso,epsilon_random")
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render a metrics or curves CSV to SVG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=10)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint greedily")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}".splitlines()[0], file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
