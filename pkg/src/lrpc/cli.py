"""Command line: ``lrpc encode|decode|pack|sim|experiment|trace|corpus``.

Exit status is 0 on success, 1 for usage errors and 2 for data errors
(unreadable or corrupt input, infeasible packet size, bad configuration).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec, experiment, plotting
from .bitstream import decode_lrpc, encode_image, load_encoded
from .container import DEFAULT_BMAX, TYPE_PAYLOAD, parse_stream, serialize_stream
from .imageio import read_image, write_image
from .loss import apply_loss, parse_loss_spec, simulate, stationary_loss_rate

log = logging.getLogger("lrpc")

EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_encode(args) -> int:
    image = read_image(args.image)
    encoded = encode_image(image, args.quality, scr=not args.no_scr)
    data = encoded.to_bytes()
    Path(args.output).write_bytes(data)
    h, w = image.shape[:2]
    log.info("%s: %d bytes, %.4f bpp, base layer %d bytes", args.output, len(data),
             len(data) * 8 / (h * w), encoded.base.size)
    return 0


def cmd_decode(args) -> int:
    write_image(args.output, decode_lrpc(Path(args.input).read_bytes()))
    return 0


def cmd_pack(args) -> int:
    encoded = load_encoded(Path(args.input).read_bytes())
    packets = encoded.packets(args.bmax)
    Path(args.output).write_bytes(serialize_stream(packets))
    payload = [p for p in packets if p.ptype == TYPE_PAYLOAD]
    log.info("%d base fragments, %d payload packets, largest %d bytes",
             len(packets) - len(payload), len(payload), max((p.size for p in payload), default=0))
    if args.verbose:
        for p in payload:
            print(f"seq {p.seq}: channels {p.channels[0]}..{p.channels[-1]} "
                  f"({len(p.channels)}), {p.size} bytes")
    return 0


def cmd_sim(args) -> int:
    params = args.loss
    if args.plan is not None:
        packets = parse_stream(Path(args.plan).read_bytes())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "seq", "lost", "state"])
    total = lost = 0
    for t in range(args.trials):
        seed = args.seed + t
        if args.plan is not None:
            _, trace = apply_loss(packets, params, seed)
            seqs, flags, states = trace.seqs, trace.lost, trace.states
        else:
            flags, states = simulate(params, args.packets, np.random.default_rng(seed))
            seqs = range(len(flags))
        for i, (seq, gone) in enumerate(zip(seqs, flags)):
            writer.writerow([t, seq, int(gone), states[i] if len(states) else ""])
        total += len(flags)
        lost += int(np.sum(flags))
    _write_text(args.csv, buf.getvalue())
    if total:
        log.info("loss rate %.6f over %d packets (stationary %.6f)", lost / total, total,
                 stationary_loss_rate(params))
    return 0


def cmd_experiment(args) -> int:
    config = experiment.ExperimentConfig.from_toml(args.config)
    if args.progressive:
        config.progressive = True
    rows, progressive, failures = experiment.run_experiment(config, jobs=args.jobs)
    comments = experiment.report_comments(config, failures)
    csv_path = Path(args.csv)
    csv_path.write_text(experiment.format_csv(rows, experiment.REPORT_FIELDS, comments))
    if config.progressive:
        prog_path = csv_path.with_name(csv_path.stem + "_progressive.csv")
        prog_path.write_text(experiment.format_csv(progressive, experiment.PROGRESSIVE_FIELDS,
                                                   comments))
    if args.plots:
        plotting.plot_rd(rows, args.plots)
        if progressive:
            plotting.plot_progressive(progressive, args.plots)
    if failures and not rows:
        log.error("every job failed")
        return EXIT_DATA
    return 0


def cmd_trace(args) -> int:
    config = experiment.ExperimentConfig(
        images=[args.image], presets=[args.quality], losses=[], bmax=args.bmax, trials=1,
        methods=args.method or list(experiment.METHODS), progressive=True,
        progressive_lost=args.lost)
    _, progressive = experiment.run_job(config, Path(args.image).stem, args.image, args.quality)
    _write_text(args.csv, experiment.format_csv(progressive, experiment.PROGRESSIVE_FIELDS,
                                                config.header_lines()))
    if args.plots:
        plotting.plot_progressive(progressive, args.plots)
    return 0


def cmd_corpus(args) -> int:
    from .corpus import write_corpus

    for path in write_corpus(args.output):
        print(path)
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _loss(text: str):
    try:
        return parse_loss_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrpc", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    quality = dict(choices=list(codec.PRESETS), default="Q2", help="quality preset")

    p = sub.add_parser("encode", help="image -> .lrpc")
    p.add_argument("image")
    p.add_argument("--quality", **quality)
    p.add_argument("--no-scr", action="store_true", help="disable channel rearrangement")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help=".lrpc -> PNG or PPM")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("pack", help=".lrpc -> packet stream")
    p.add_argument("input")
    p.add_argument("--bmax", type=int, default=DEFAULT_BMAX, help="maximum packet size in bytes")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-v", "--verbose", action="store_true", help="list payload packets")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("sim", help="loss traces for a packet stream or a synthetic sequence")
    p.add_argument("plan", nargs="?", help="packet stream written by 'pack'")
    p.add_argument("--loss", type=_loss, required=True, help="uniform:<pe> or ge:<p>,<r>,<h>,<k>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--packets", type=int, default=1000,
                   help="sequence length when no packet stream is given")
    p.add_argument("--csv", help="trace output (default: stdout)")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("experiment", help="run a configured loss experiment")
    p.add_argument("--config", required=True, help="TOML file")
    p.add_argument("--csv", required=True, help="report path")
    p.add_argument("--plots", help="directory for SVG figures")
    p.add_argument("--progressive", action="store_true", help="also write per-packet traces")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("trace", help="PSNR after each received packet")
    p.add_argument("image")
    p.add_argument("--quality", **quality)
    p.add_argument("--bmax", type=int, default=DEFAULT_BMAX)
    p.add_argument("--lost", type=_int_list, default=[3, 6],
                   help="1-based payload packets to drop in the lossy trace")
    p.add_argument("--method", action="append", choices=list(experiment.METHODS))
    p.add_argument("--csv", help="trace output (default: stdout)")
    p.add_argument("--plots", help="directory for SVG figures")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("corpus", help="write the bundled 768x512 test images as PNG")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be at least 1")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
