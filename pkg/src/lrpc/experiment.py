"""Experiment harness: encode, packetize, lose packets, reconstruct, report.

For every (image, preset, loss condition) each image is encoded once per
SCR setting and packetized once; trial ``t`` then draws its loss trace with
seed ``seed + t`` and every method variant is reconstructed from it. Rows
are reported as mean and unbiased sample variance of PSNR over trials.
Work is split per (image, preset) and may run in worker processes; the
report is assembled in configuration order, so output does not depend on
scheduling.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import logging
from pathlib import Path

import numpy as np

from . import codec, metrics
from .bitstream import encode_image
from .container import TYPE_BASE, TYPE_PAYLOAD
from .imageio import read_image
from .loss import apply_loss, parse_loss_spec
from .receiver import reconstruct

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

# name -> (SCR on, concealment policy)
METHODS = {
    "scr+interpolate": (True, "interpolate"),
    "scr+zero": (True, "none"),
    "noscr+zero": (False, "none"),
}

REPORT_FIELDS = [
    "image", "preset", "loss", "method", "bmax", "trials", "bpp", "bpp_packet",
    "bpp_file", "psnr_mean", "psnr_var", "psnr_min", "psnr_max", "mse_mean",
    "lambda", "rd_cost", "base_share", "payload_packets", "loss_rate", "paired", "trace",
]

PROGRESSIVE_FIELDS = [
    "image", "preset", "method", "packet", "lost", "bytes", "bpp", "psnr_clean", "psnr_lossy",
]


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    images: list[str] = dataclasses.field(default_factory=list)
    corpus: bool = False
    presets: list[str] = dataclasses.field(default_factory=lambda: ["Q1", "Q2", "Q3"])
    losses: list[str] = dataclasses.field(default_factory=lambda: ["uniform:0.1"])
    bmax: int = 900
    trials: int = 10
    seed: int = 0
    methods: list[str] = dataclasses.field(default_factory=lambda: list(METHODS))
    bpp_mode: str = "packet"
    progressive: bool = False
    progressive_lost: list[int] = dataclasses.field(default_factory=lambda: [3, 6])
    lambdas: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.bpp_mode not in ("packet", "file"):
            raise ConfigError(f"bpp_mode must be 'packet' or 'file', not {self.bpp_mode!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for name in self.presets:
            try:
                codec.preset(name)
            except KeyError as exc:
                raise ConfigError(str(exc)) from exc
            self.lambdas.setdefault(name, codec.preset(name).lam)
        for spec in self.losses:
            parse_loss_spec(spec)
        if not self.images and not self.corpus:
            raise ConfigError("no images: list image paths or set corpus = true")

    @classmethod
    def from_mapping(cls, data: dict, base_dir=None) -> "ExperimentConfig":
        data = dict(data)
        lambdas = {k[len("lambda_"):]: float(data.pop(k))
                   for k in list(data) if k.startswith("lambda_")}
        known = {f.name for f in dataclasses.fields(cls)} - {"lambdas"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if isinstance(data.get("losses"), str):
            data["losses"] = [data["losses"]]
        if base_dir is not None and "images" in data:
            data["images"] = [str(Path(base_dir, p)) for p in data["images"]]
        return cls(lambdas=lambdas, **data)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_mapping(data, base_dir=path.parent)

    def header_lines(self) -> list[str]:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "lambdas":
                for k in sorted(value):
                    lines.append(f"lambda_{k} = {value[k]!r}")
            elif f.name == "images":
                lines.append(f"images = {[Path(p).name for p in value]!r}")
            else:
                lines.append(f"{f.name} = {value!r}")
        return lines


def load_images(config: ExperimentConfig) -> list[tuple[str, np.ndarray]]:
    images = []
    if config.corpus:
        from .corpus import load_corpus

        images.extend(load_corpus().items())
    for path in config.images:
        images.append((Path(path).stem, path))
    return images


def _payload_count(packets) -> int:
    return sum(p.ptype == TYPE_PAYLOAD for p in packets)


def _prefix(packets, count: int, drop=()):
    """Base fragments plus the first ``count`` payload packets, minus ``drop``."""
    base = [p for p in packets if p.ptype == TYPE_BASE]
    payload = [p for p in packets if p.ptype == TYPE_PAYLOAD][:count]
    tail = max((c for p in payload for c in p.channels), default=-1) + 1
    kept = [p for i, p in enumerate(payload, start=1) if i not in drop]
    return base + kept, tail


def run_job(config: ExperimentConfig, name: str, image, preset_name: str):
    """All rows for one (image, preset). Returns ``(rows, progressive_rows)``."""
    if not isinstance(image, np.ndarray):
        image = read_image(image)
    q = codec.preset(preset_name)
    dims = image.shape[:2]
    streams = {}
    for method in config.methods:
        scr, _ = METHODS[method]
        if scr not in streams:
            encoded = encode_image(image, q, scr=scr)
            streams[scr] = (encoded, encoded.packets(config.bmax), encoded.base_bytes())
    paired = len({_payload_count(s[1]) for s in streams.values()}) == 1

    rows = []
    cache = {}

    def decoded(scr, policy, survivors, tail=None):
        key = (scr, policy, tuple(p.seq for p in survivors), tail)
        if key not in cache:
            _, _, base_bytes = streams[scr]
            cache[key] = metrics.mse(image, reconstruct(base_bytes, survivors, policy, tail))
        return cache[key]

    for spec in config.losses:
        params = parse_loss_spec(spec)
        errors = {m: [] for m in config.methods}
        lost_frac = {m: [] for m in config.methods}
        for t in range(config.trials):
            traces = {scr: apply_loss(packets, params, config.seed + t)
                      for scr, (_, packets, _) in streams.items()}
            for method in config.methods:
                scr, policy = METHODS[method]
                survivors, trace = traces[scr]
                errors[method].append(decoded(scr, policy, survivors))
                lost_frac[method].append(trace.loss_count / max(len(trace.lost), 1))
        for method in config.methods:
            scr, _ = METHODS[method]
            encoded, packets, _ = streams[scr]
            packet_bytes = sum(p.size for p in packets)
            file_bytes = len(encoded.to_bytes())
            psnrs = [metrics.psnr_from_mse(e) for e in errors[method]]
            mse_mean = float(np.mean(errors[method]))
            rate = metrics.bpp(packet_bytes if config.bpp_mode == "packet" else file_bytes, dims)
            lam = config.lambdas[preset_name]
            rows.append({
                "image": name, "preset": preset_name, "loss": spec, "method": method,
                "bmax": config.bmax, "trials": config.trials,
                "bpp": rate,
                "bpp_packet": metrics.bpp(packet_bytes, dims),
                "bpp_file": metrics.bpp(file_bytes, dims),
                "psnr_mean": float(np.mean(psnrs)),
                "psnr_var": metrics.sample_variance(psnrs),
                "psnr_min": float(np.min(psnrs)),
                "psnr_max": float(np.max(psnrs)),
                "mse_mean": mse_mean,
                "lambda": lam,
                "rd_cost": metrics.rd_cost(rate, mse_mean, lam),
                "base_share": encoded.base.size / (packet_bytes if config.bpp_mode == "packet"
                                                   else file_bytes),
                "payload_packets": _payload_count(packets),
                "loss_rate": float(np.mean(lost_frac[method])),
                "paired": int(paired),
                "trace": f"seed {config.seed}+t, t<{config.trials}",
            })

    progressive = []
    if config.progressive:
        drop = set(config.progressive_lost)
        for method in config.methods:
            scr, policy = METHODS[method]
            _, packets, _ = streams[scr]
            payload = [p for p in packets if p.ptype == TYPE_PAYLOAD]
            sent = sum(p.size for p in packets if p.ptype == TYPE_BASE)
            for count in range(1, len(payload) + 1):
                sent += payload[count - 1].size
                clean, tail = _prefix(packets, count)
                lossy, _ = _prefix(packets, count, drop)
                progressive.append({
                    "image": name, "preset": preset_name, "method": method,
                    "packet": count, "lost": int(count in drop), "bytes": sent,
                    "bpp": metrics.bpp(sent, dims),
                    "psnr_clean": metrics.psnr_from_mse(decoded(scr, policy, clean, tail)),
                    "psnr_lossy": metrics.psnr_from_mse(decoded(scr, policy, lossy, tail)),
                })
    return rows, progressive


def _job(args):
    config, name, image, preset_name = args
    try:
        return run_job(config, name, image, preset_name), None
    except Exception as exc:  # reported and skipped
        return ([], []), f"{name} {preset_name}: {type(exc).__name__}: {exc}"


def run_experiment(config: ExperimentConfig, jobs: int = 1):
    """Returns ``(rows, progressive_rows, failures)``."""
    tasks = [(config, name, image, p) for name, image in load_images(config)
             for p in config.presets]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    rows, progressive, failures = [], [], []
    for (r, pr), failure in results:
        rows.extend(r)
        progressive.extend(pr)
        if failure:
            log.warning("skipped %s", failure)
            failures.append(failure)
    for row in rows:
        if not 0.02 <= row["base_share"] <= 0.15:
            log.warning("%s %s %s: base layer is %.1f%% of the stream", row["image"],
                        row["preset"], row["method"], 100 * row["base_share"])
    return rows, progressive, failures


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def format_csv(rows, fields, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_format(row[f]) for f in fields])
    return buf.getvalue()


def report_comments(config: ExperimentConfig, failures=()) -> list[str]:
    lines = config.header_lines()
    lines.append("psnr_var: unbiased sample variance over trials (ddof=1), dB^2")
    lines.append("bpp_packet counts every emitted byte incl. base fragments and packet "
                 "headers; bpp_file counts base layer + payloads")
    for failure in failures:
        lines.append(f"skipped: {failure}")
    return lines
