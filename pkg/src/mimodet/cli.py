"""Command-line front end: parse a simulation config from defaults, an
optional `key = value` config file and flag overrides, run the sweep, and
write plot-ready CSV/TSV.

The CSV header embeds the resolved config as `# key = value` lines, so the
exact run can be reproduced by extracting them into a config file (see
README). Floats are rendered with 17 significant digits so identical runs
diff byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from .detect import DETECTOR_NAMES, DetectorSpec
from .kernels import backend
from .modem import MODULATION_NAMES
from .sim import ConfigError, SerCurve, SimulationConfig, estimate_ser

DEFAULTS = {
    "nt": "4",
    "nr": "4",
    "mod": "4qam",
    "detectors": "zf,mmse",
    "snr_db": "0:20:2",
    "trials": "10000",
    "min_errors": "200",
    "rho": "0",
    "seed": "0",
    "threads": "1",
    "freeze_h": "none",
}

# Keys that appear in the CSV header; threads is deliberately left out so the
# output is byte-identical for any thread count.
_HEADER_KEYS = ("nt", "nr", "mod", "detectors", "snr_db", "trials", "min_errors", "rho", "seed", "freeze_h")


class UsageError(ValueError):
    """Bad flags, bad config file, or an inconsistent configuration."""


@dataclass(frozen=True)
class OutputSettings:
    path: str
    fmt: str  # "csv" or "tsv"


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{key}: expected an integer, got {text!r}") from None


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{key}: expected a number, got {text!r}") from None


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """Parse `start:stop:step` (stop included when hit exactly) or a comma list."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"snr_db: expected start:stop:step, got {text!r}")
        start, stop, step = (_parse_float("snr_db", p) for p in parts)
        if step <= 0:
            raise UsageError(f"snr_db: step must be positive, got {step}")
        if stop < start:
            raise UsageError(f"snr_db: stop {stop} is below start {start}")
        count = int((stop - start) / step + 1e-9) + 1
        return tuple(start + k * step for k in range(count))
    return tuple(_parse_float("snr_db", p) for p in text.split(","))


def _parse_detectors(text: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    for name in names:
        if name not in DETECTOR_NAMES:
            raise UsageError(f"detectors: unknown detector {name!r}; choose from {', '.join(DETECTOR_NAMES)}")
    return names


def read_config_file(path: str) -> dict[str, str]:
    """Read plain-text `key = value` lines; `#` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from None
    values: dict[str, str] = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config: malformed line {lineno} in {path}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise UsageError(f"config: unknown key {key!r} at line {lineno} in {path}")
        values[key] = value.strip()
    return values


def _build_parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):  # one-line diagnostics, exit status 1
            raise UsageError(message)

    p = Parser(prog="mimodet", description="Monte Carlo MIMO detector SER sweeps")
    p.add_argument("--nt", help="transmit antennas")
    p.add_argument("--nr", help="receive antennas (>= nt)")
    p.add_argument("--mod", help="modulation: " + ", ".join(MODULATION_NAMES))
    p.add_argument("--detectors", help="comma list of: " + ", ".join(DETECTOR_NAMES))
    p.add_argument("--snr-db", dest="snr_db", help="start:stop:step or comma list (dB)")
    p.add_argument("--trials", help="max channel uses per SNR point")
    p.add_argument("--min-errors", dest="min_errors", help="early-stop error target per point (0 = run all trials)")
    p.add_argument("--rho", help="antenna correlation, both ends (0 = i.i.d.)")
    p.add_argument("--seed", help="base RNG seed")
    p.add_argument("--threads", help="worker threads (does not change results)")
    p.add_argument("--freeze-h", dest="freeze_h", help="'identity' to pin H = I (test mode)")
    p.add_argument("--config", help="config file of key = value lines")
    p.add_argument("--out", default="ser.csv", help="output path (default ser.csv)")
    p.add_argument("--format", dest="fmt", choices=("csv", "tsv"), default="csv")
    return p


def parse_invocation(argv) -> tuple[SimulationConfig, OutputSettings]:
    """Resolve defaults < config file < flags into a validated config."""
    ns = _build_parser().parse_args(argv)
    values = dict(DEFAULTS)
    if ns.config:
        values.update(read_config_file(ns.config))
    for key in DEFAULTS:
        flag = getattr(ns, key)
        if flag is not None:
            values[key] = flag

    freeze = values["freeze_h"].strip().lower()
    if freeze not in ("none", "identity"):
        raise UsageError(f"freeze_h: expected 'none' or 'identity', got {values['freeze_h']!r}")
    mod = values["mod"].strip().lower()
    if mod not in MODULATION_NAMES:
        raise UsageError(f"mod: unknown modulation {values['mod']!r}; choose from {', '.join(MODULATION_NAMES)}")
    try:
        cfg = SimulationConfig(
            nt=_parse_int("nt", values["nt"]),
            nr=_parse_int("nr", values["nr"]),
            modulation=mod,
            detectors=tuple(DetectorSpec(name) for name in _parse_detectors(values["detectors"])),
            snr_grid_db=parse_snr_grid(values["snr_db"]),
            rho=_parse_float("rho", values["rho"]),
            max_channel_uses=_parse_int("trials", values["trials"]),
            min_errors=_parse_int("min_errors", values["min_errors"]),
            seed=_parse_int("seed", values["seed"]),
            threads=_parse_int("threads", values["threads"]),
            freeze_h=None if freeze == "none" else freeze,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    return cfg, OutputSettings(path=ns.out, fmt=ns.fmt)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def format_results(curve: SerCurve, fmt: str = "csv") -> str:
    """Render a SerCurve as CSV/TSV text with a reproducible config header."""
    cfg = curve.config
    sep = "," if fmt == "csv" else "\t"
    emitted = {
        "nt": str(cfg.nt),
        "nr": str(cfg.nr),
        "mod": cfg.modulation,
        "detectors": ",".join(d.algorithm for d in cfg.detectors),
        "snr_db": ",".join(_fmt(s) for s in cfg.snr_grid_db),
        "trials": str(cfg.max_channel_uses),
        "min_errors": str(cfg.min_errors),
        "rho": _fmt(cfg.rho),
        "seed": str(cfg.seed),
        "freeze_h": cfg.freeze_h or "none",
    }
    lines = ["# mimodet ser sweep", "# config (re-runnable: extract the '# key = value' lines):"]
    lines += [f"# {key} = {emitted[key]}" for key in _HEADER_KEYS]
    lines += [
        "# conventions:",
        "# snr axis: average received snr per receive antenna; sigma2 is nt / 10^(snr_db/10)",
        "# ser: per-layer symbol errors / (nt * channel_uses); wilson 95% intervals",
        "# rng: philox counter streams keyed by (seed, use_index); fresh h and noise per use",
        f"# kernel backend: {backend()}",
        f"# diagnostics resampled-draws: {curve.resampled_draws}",
        sep.join(("snr_db", "detector", "channel_uses", "symbol_errors", "ser", "ci95_lo", "ci95_hi")),
    ]
    for pt in curve.points:
        lines.append(
            sep.join(
                (
                    _fmt(pt.snr_db),
                    pt.detector,
                    str(pt.channel_uses),
                    str(pt.symbol_errors),
                    _fmt(pt.ser),
                    _fmt(pt.ci95_lo),
                    _fmt(pt.ci95_hi),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_results(curve: SerCurve, settings: OutputSettings) -> None:
    """Write the rendered curve to settings.path."""
    text = format_results(curve, settings.fmt)
    try:
        with open(settings.path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {settings.path}: {exc}") from None


def main(argv=None) -> int:
    """Entry point. Exit status: 0 success, 1 usage/config error, 2 runtime error."""
    try:
        cfg, out = parse_invocation(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"mimodet: error: {exc}", file=sys.stderr)
        return 1
    try:
        curve = estimate_ser(cfg)
        write_results(curve, out)
    except Exception as exc:
        print(f"mimodet: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
