"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, parse_list
from .io import CheckpointError, emit_csv, load_ce, load_oampnet, save_ce, save_oampnet, write_history_csv
from .receivers import NEEDS_CE, NEEDS_NET

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return parse_list(text, float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _names(text):
    return parse_list(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dloamp", description="CP-free OFDM receiver simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("-c", "--config", help="INI config file (defaults if omitted)")
        sp.add_argument("--seed", type=int, help="override the relevant seed")
        sp.add_argument("--out", help="output path (overrides the config)")

    sp = sub.add_parser("train-ce", help="train CE-Net and save a checkpoint")
    common(sp)
    sp.add_argument("--snr", type=_floats, help="training SNR(s) in dB")

    sp = sub.add_parser("train-oampnet", help="train OAMP-Net and save a checkpoint")
    common(sp)
    sp.add_argument("--snr", type=float, help="training SNR in dB")
    sp.add_argument("--ce-checkpoint", help="CE-Net checkpoint (overrides the config)")

    sp = sub.add_parser("ber-sweep", help="Monte Carlo BER versus SNR")
    common(sp)
    sp.add_argument("--snr", type=_floats, help="SNR grid in dB, comma separated")
    sp.add_argument("--receivers", type=_names, help="receiver names, comma separated")
    sp.add_argument("--frames-cap", type=int, help="frame cap per (receiver, SNR)")
    sp.add_argument("--workers", type=int, default=1, help="blocks evaluated concurrently")
    sp.add_argument("--ce-checkpoint", help="CE-Net checkpoint (overrides the config)")
    sp.add_argument("--net-checkpoint", help="OAMP-Net checkpoint (overrides the config)")
    sp.add_argument("--figure", help="figure path (.pdf or .svg)")
    sp.add_argument("--no-figure", action="store_true", help="skip the figure")
    sp.add_argument("--dump-trajectory", metavar="PATH", help="write OAMP iterations as JSON lines")

    sp = sub.add_parser("plot", help="render a BER CSV to a figure")
    sp.add_argument("csv")
    sp.add_argument("--out", required=True, help="figure path (.pdf or .svg)")
    sp.add_argument("--title")

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return p


def _cfg(args):
    return load_config(args.config)


def _cmd_train_ce(args):
    from dataclasses import replace

    from .pipeline import train_ce_net

    cfg = _cfg(args)
    ce = cfg.ce
    if args.snr is not None:
        ce = replace(ce, train_snr_db=args.snr)
    if args.seed is not None:
        ce = replace(ce, seed=args.seed)
    cfg = replace(cfg, ce=ce)
    params = train_ce_net(cfg)
    out = args.out or ce.checkpoint
    save_ce(params, out)
    last = params.loss_history[-1] if params.loss_history else {}
    print(f"saved CE-Net to {out} ({params.epoch} epochs, last {last})")


def _cmd_train_oampnet(args):
    from dataclasses import replace

    from .pipeline import train_oamp_net_from_config

    cfg = _cfg(args)
    tr = cfg.net.train
    if args.snr is not None:
        tr = replace(tr, snr_db=args.snr)
    if args.seed is not None:
        tr = replace(tr, seed=args.seed)
    cfg = replace(cfg, net=replace(cfg.net, train=tr))
    ce = None
    if cfg.net.csi == "ce":
        ce = load_ce(args.ce_checkpoint or cfg.ce.checkpoint, N=cfg.scenario.N)
    res = train_oamp_net_from_config(cfg, ce)
    out = args.out or cfg.net.checkpoint
    save_oampnet(res.params, out, train_snr_db=tr.snr_db, seed=tr.seed,
                 best_epoch=res.best_epoch, best_dev_ber=res.best_dev_ber)
    if cfg.net.history:
        write_history_csv(res.history, Path(out).with_name(Path(cfg.net.history).name)
                          if args.out else cfg.net.history)
    print(f"saved OAMP-Net to {out} (best epoch {res.best_epoch}, dev BER {res.best_dev_ber:.6g})")


def _cmd_ber_sweep(args):
    from .plotting import plot_ber
    from .sweep import run_ber_sweep

    cfg = _cfg(args).with_overrides(snr=args.snr, seed=args.seed, receivers=args.receivers,
                                     frames_cap=args.frames_cap)
    names = cfg.sweep.receivers
    ce = net = None
    if any(r in NEEDS_CE for r in names):
        ce = load_ce(args.ce_checkpoint or cfg.ce.checkpoint, N=cfg.scenario.N)
    if any(r in NEEDS_NET for r in names):
        net = load_oampnet(args.net_checkpoint or cfg.net.checkpoint, L=cfg.oamp.iterations)
    records = run_ber_sweep(cfg, ce, net, workers=args.workers,
                            trajectory_path=args.dump_trajectory or cfg.sweep.trajectory or None)
    out = args.out or cfg.sweep.out
    emit_csv(records, out)
    for r in records:
        flag = "" if r.target_reached else "  (frame cap)"
        print(f"{r.receiver:>16s}  {r.snr_db:6.2f} dB  BER {r.ber:.6e}  errors {r.bit_errors}{flag}")
    fig = None if args.no_figure else (args.figure or cfg.sweep.figure or None)
    if fig:
        plot_ber(out, fig)
    print(f"wrote {out}" + (f" and {fig}" if fig else ""))


def _cmd_plot(args):
    from .plotting import plot_ber

    plot_ber(args.csv, args.out, title=args.title)
    print(f"wrote {args.out}")


def _cmd_selftest(args):
    from .selftest import run_selftest

    if not run_selftest():
        raise SystemExit(EXIT_RUNTIME)


COMMANDS = {
    "train-ce": _cmd_train_ce,
    "train-oampnet": _cmd_train_oampnet,
    "ber-sweep": _cmd_ber_sweep,
    "plot": _cmd_plot,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, CheckpointError, OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"dloamp {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
