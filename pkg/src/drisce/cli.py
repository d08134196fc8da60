"""Command-line front end.

    drisce run <config.ini | preset | manifest.json> [--trials N] [--set sec.key=val ...]
    drisce identify --m-bs 4 --m-ue 2 --m-s1 30 --m-s2 20 -I 25 -J 15 -K 2
    drisce presets
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import warnings
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from types import SimpleNamespace

from .config import (
    OUTPUT_ENV,
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    parse_config,
    preset_names,
    preset_path,
)
from .errors import IdentifiabilityWarning, RankDeficientWarning
from .estimators import AlsConfig
from .evaluation import COMPONENTS, NmseReport, check_all, run_monte_carlo, write_csv

log = logging.getLogger("drisce")


def tool_version() -> str:
    try:
        return version("drisce")
    except PackageNotFoundError:
        return "unknown"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def plot_data(report: NmseReport) -> str:
    """Per-estimator table: one row per SNR with median and mean NMSE per component."""
    buf = io.StringIO()
    cols = ["snr_db"] + [f"{stat}_nmse_{c}" for c in COMPONENTS for stat in ("median", "mean")]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    med, mean = report.median(), report.mean()
    for s, snr in enumerate(report.snr_db):
        row = [repr(snr)]
        for k in range(len(COMPONENTS)):
            row += [repr(float(med[s, k])), repr(float(mean[s, k]))]
        writer.writerow(row)
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, quiet: bool = True) -> dict[str, Path]:
    """Run every configured estimator and write results, plot data and manifest."""
    out = cfg.output_dir()
    als = AlsConfig(t_max=cfg.t_max, rel_change_tol=cfg.rel_change_tol)
    reports = []
    for name in cfg.estimators:
        log.info("running %s: %d trials x %d SNR points", name, cfg.trials, len(cfg.snr_db))
        with warnings.catch_warnings():
            if quiet:
                warnings.simplefilter("ignore", IdentifiabilityWarning)
                warnings.simplefilter("ignore", RankDeficientWarning)
            reports.append(run_monte_carlo(cfg.dims, cfg.snr_db, cfg.trials, name, als, cfg.seed))

    paths = {"results": out / "results.csv", "manifest": out / "manifest.json"}
    _atomic_write(paths["results"], write_csv(reports))
    for rep in reports:
        p = out / f"plot_{rep.estimator}.csv"
        _atomic_write(p, plot_data(rep))
        paths[f"plot_{rep.estimator}"] = p
    verdicts = check_all(cfg.dims)
    manifest = {
        "tool": "drisce",
        "version": tool_version(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "identifiability": {k: v.satisfied for k, v in verdicts.verdicts.items()},
        "failures": {rep.estimator: rep.failures for rep in reports},
    }
    _atomic_write(paths["manifest"], json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def config_from_manifest(path: Path, overrides: dict[str, str]) -> ExperimentConfig:
    data = json.loads(Path(path).read_text())
    c = data["config"]
    sections = {
        "system": {k: str(v) for k, v in c["dims"].items()},
        "experiment": {
            "snr_db": ",".join(repr(float(s)) for s in c["snr_db"]),
            "trials": str(c["trials"]),
            "estimators": ",".join(c["estimators"]),
            "seed": str(c["seed"]),
        },
        "als": {"t_max": str(c["t_max"]), "rel_change_tol": repr(float(c["rel_change_tol"]))},
    }
    if c.get("output"):
        sections["experiment"]["output"] = c["output"]
    for dotted, value in overrides.items():
        sec, _, key = dotted.partition(".")
        sections.setdefault(sec, {})[key] = value
    return config_from_dict(sections, str(path))


def _overrides(args) -> dict[str, str]:
    over = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        over[key.strip()] = value.strip()
    for flag, dotted in (
        ("trials", "experiment.trials"),
        ("seed", "experiment.seed"),
        ("output", "experiment.output"),
        ("snr_db", "experiment.snr_db"),
        ("estimators", "experiment.estimators"),
        ("t_max", "als.t_max"),
    ):
        value = getattr(args, flag)
        if value is not None:
            over[dotted] = str(value)
    return over


def cmd_run(args) -> int:
    over = _overrides(args)
    if str(args.config).endswith(".json"):
        cfg = config_from_manifest(Path(args.config), over)
    else:
        cfg = parse_config(args.config, over)
    paths = run_experiment(cfg, quiet=not args.verbose)
    for p in paths.values():
        print(p)
    return 0


def cmd_identify(args) -> int:
    dims = SimpleNamespace(
        m_bs=args.m_bs, m_ue=args.m_ue, m_s1=args.m_s1, m_s2=args.m_s2,
        i_frames=args.i, j_frames=args.j, k_pilots=args.k,
    )
    verdict = check_all(dims)
    for name, v in verdict.verdicts.items():
        status = "satisfied" if v.satisfied else "violated: " + "; ".join(v.failed)
        print(f"{name:<20s} {status}")
    return 0


def cmd_presets(args) -> int:
    for name in preset_names():
        first = preset_path(name).read_text().splitlines()[0].lstrip("# ")
        print(f"{name:<8s} {first}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drisce", description="Double-RIS channel estimation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("config", help="INI config file, preset name or a previous manifest.json")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--output", help=f"output directory (default: ${OUTPUT_ENV} or ./results)")
    run.add_argument("--snr-db", dest="snr_db", help="comma list or start:step:stop")
    run.add_argument("--estimators", help="comma separated estimator names")
    run.add_argument("--t-max", dest="t_max", type=int)
    run.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override any config key")
    run.add_argument("-v", "--verbose", action="store_true")
    run.set_defaults(func=cmd_run)

    ident = sub.add_parser("identify", help="print identifiability verdicts for a setting")
    ident.add_argument("--m-bs", type=int, required=True)
    ident.add_argument("--m-ue", type=int, required=True)
    ident.add_argument("--m-s1", type=int, required=True)
    ident.add_argument("--m-s2", type=int, required=True)
    ident.add_argument("-I", "--i", type=int, required=True)
    ident.add_argument("-J", "--j", type=int, required=True)
    ident.add_argument("-K", "--k", type=int, required=True)
    ident.set_defaults(func=cmd_identify)

    pre = sub.add_parser("presets", help="list bundled experiment presets")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        kind = type(exc).__name__
        print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
