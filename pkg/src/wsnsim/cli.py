"""Command line entry point: ``python -m wsnsim --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config, preset_text
from .kernel import SimulationError, to_ns
from .scenario import check_writable, run_scenario

log = logging.getLogger("wsnsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsnsim", description=__doc__)
    p.add_argument("--config", type=Path, help="scenario config file")
    p.add_argument("--seed", type=int, action="append",
                   help="override the config seed; repeat for parallel replications")
    p.add_argument("--until", type=str, help="simulated seconds (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--trace", action="store_true", help="write the event trace (events.csv)")
    p.add_argument("--preset", choices=("static", "mobile"),
                   help="write the built-in preset config (to --config or stdout) and exit")
    p.add_argument("-j", "--jobs", type=int, default=None,
                   help="worker processes for multiple --seed replications")
    return p


def _run_one(config, out: Path, trace: bool) -> int:
    try:
        result = run_scenario(config, out, trace=trace)
    except SimulationError as exc:
        log.error("runtime fault: %s", exc)
        return EXIT_RUNTIME
    s = result.summary
    log.info(
        "seed %d: %d events, %d frames sent, %d RSSI records -> %s",
        config.seed, s.events_dispatched, s.frames_sent, len(result.rssi_log), out,
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)

    if args.preset:
        text = preset_text(args.preset)
        if args.config:
            args.config.write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.config is None:
        log.error("--config is required")
        return EXIT_CONFIG

    try:
        config = load_config(args.config)
        if args.until is not None:
            config = replace(config, until=to_ns(args.until, "s"))
            config.effective["scenario"]["until_s"] = args.until
    except (ConfigError, ValueError, OSError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    seeds = args.seed or [config.seed]
    jobs = []
    for seed in seeds:
        cfg = replace(config, seed=seed, effective={
            **config.effective, "scenario": {**config.effective["scenario"], "seed": seed},
        })
        out = args.out if len(seeds) == 1 else args.out / f"seed_{seed}"
        try:
            check_writable(out)
        except OSError as exc:
            log.error("output directory %s is not writable: %s", out, exc)
            return EXIT_RUNTIME
        jobs.append((cfg, out))

    if len(jobs) == 1:
        return _run_one(*jobs[0], args.trace)
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        codes = list(pool.map(_run_one, *zip(*jobs), [args.trace] * len(jobs)))
    return max(codes)
