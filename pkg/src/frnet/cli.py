"""Command line: ``frnet {simulate,fit,summarize,compare} [CONFIG] [--set key=value ...]``.

Configuration is a flat ``key = value`` file; ``--set`` entries override it.

simulate
    ``preset`` (ranks | information | all, default ranks), ``output_dir``;
    a custom scenario via ``n``, ``m``, ``replicates``, ``seed``.
fit
    ``data_dir`` (directory, comma list or glob), ``family`` (comma list),
    ``m``, ``n_iter``, ``burn_in``, ``thin``, ``seed``,
    ``prior_beta_variance``, ``rho_proposal_sd``, ``row_covariates``,
    ``col_covariates``, ``dyad_covariates``, ``intercept``,
    ``normal_scores``, ``output_dir``.
summarize
    ``input`` (sample CSV), ``output`` (summary CSV).
compare
    ``samples_dir``, ``output_dir``, optional ``data_dir`` (truth and
    covariates) and ``reference`` (default FRN).

Exit status: 0 success, 1 usage, 2 data validation, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

from . import io, study
from .core import Family, ScoreError
from .posterior import PosteriorSample
from .sampler import SamplerError
from .simgen import ScenarioSpec, scenario_presets

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
log = logging.getLogger("frnet")


KEYS = {
    "simulate": {"preset", "output_dir", "n", "m", "replicates", "seed", "name"},
    "fit": {"data_dir", "output_dir", "family", "m", "n_iter", "burn_in", "thin", "seed", "prior_beta_variance",
            "rho_proposal_sd", "row_covariates", "col_covariates", "dyad_covariates", "intercept", "normal_scores"},
    "summarize": {"input", "output"},
    "compare": {"samples_dir", "output_dir", "data_dir", "reference"},
}


class UsageError(Exception):
    pass


def _config(args) -> dict:
    cfg = io.read_config(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


def _require(cfg, key):
    if key not in cfg or cfg[key] == "":
        raise UsageError(f"missing configuration key {key!r}")
    return cfg[key]


def cmd_simulate(cfg) -> int:
    out = Path(_require(cfg, "output_dir"))
    preset = cfg.get("preset", "ranks")
    if preset == "custom":
        specs = [ScenarioSpec(n=int(cfg.get("n", 100)), m=int(cfg.get("m", 5)),
                              replicates=int(cfg.get("replicates", 1)), seed=int(cfg.get("seed", 0)),
                              name=cfg.get("name", "custom"))]
    else:
        try:
            specs = scenario_presets(preset)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    written = []
    for spec in specs:
        for r in range(spec.replicates):
            written.append(study.write_scenario_dataset(spec, r, out))
    for path in written:
        print(path)
    log.info("wrote %d datasets to %s", len(written), out)
    return EXIT_OK


def _data_dirs(spec: str) -> list[Path]:
    dirs = []
    for part in (p.strip() for p in spec.split(",")):
        if not part:
            continue
        hits = sorted(glob.glob(part)) if any(ch in part for ch in "*?[") else [part]
        dirs.extend(Path(h) for h in hits if Path(h).is_dir())
        if not hits or not all(Path(h).is_dir() for h in hits):
            raise io.DataError(f"data_dir {part!r} does not name a directory")
    if not dirs:
        raise io.DataError(f"no dataset directories match {spec!r}")
    return dirs


def cmd_fit(cfg, jobs: int) -> int:
    dirs = _data_dirs(_require(cfg, "data_dir"))
    out = Path(cfg.get("output_dir", "fits"))
    try:
        families = [Family.parse(f) for f in cfg.get("family", "FRN").split(",") if f.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    opts = {k: v for k, v in cfg.items() if k not in ("data_dir", "output_dir", "family")}
    # validate every job before starting any chain
    for d in dirs:
        o = study.fit_options(d, opts)
        _, S, design = study.load_problem(d, o)
        for fam in families:
            if fam is Family.RANK and design.has_row_terms:
                raise UsageError("family RANK cannot be fitted with an intercept or row covariates "
                                 "(set intercept = false and leave row_covariates empty)")
            try:
                study.sampler_config(fam, o, 0)
            except (TypeError, ValueError) as exc:
                raise UsageError(str(exc)) from None
    results = study.run_fits([(d, fam.value, opts, out) for d in dirs for fam in families], jobs)
    for d, fam, meta in results:
        print(f"{Path(d).name}\t{fam}\tsaved={meta.get('membership_checks')}\t"
              f"rho_acceptance={meta.get('rho_acceptance')}\t-> {out / Path(d).name}")
    return EXIT_OK


def cmd_summarize(cfg) -> int:
    src = Path(_require(cfg, "input"))
    if not src.exists():
        raise io.DataError(f"{src}: file not found")
    sample = PosteriorSample.from_csv(src)
    dst = Path(cfg.get("output", src.with_name(src.stem.replace("samples", "summary") + ".csv")))
    if dst == src:
        dst = src.with_name(src.stem + "_summary.csv")
    study.write_summary(sample, dst)
    print(dst.read_text(), end="")
    return EXIT_OK


def cmd_compare(cfg) -> int:
    from . import plotting

    samples = study.collect_samples(_require(cfg, "samples_dir"))
    if not samples:
        raise io.DataError("no samples_<FAMILY>.csv files found")
    out = Path(cfg.get("output_dir", "report"))
    out.mkdir(parents=True, exist_ok=True)
    data_root = cfg.get("data_dir")
    reference = Family.parse(cfg.get("reference", "FRN")).value
    table = study.table1_rows(samples, reference, data_root)
    study.write_rows(out / "table1.csv", table, ["family", "effect_type", "magnitude_ratio", "width_ratio", "datasets"])
    intervals = study.interval_rows(samples, data_root)
    study.write_rows(out / "intervals.csv", intervals, ["dataset", "family", "parameter", "q025", "q50", "q975", "truth"])
    plotting.plot_intervals(intervals, out / "intervals.png")
    if data_root is not None:
        per, avg = study.concentration_rows(samples, data_root)
        if avg:
            study.write_rows(out / "concentration_by_dataset.csv", per, ["dataset", "m", "parameter", "ratio"])
            study.write_rows(out / "concentration.csv", avg, ["m", "parameter", "ratio", "datasets"])
            plotting.plot_concentration(avg, out / "concentration.png")
    print((out / "table1.csv").read_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frnet", description="Bayesian SRM fits for fixed rank nomination data.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "summarize", "compare"):
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
        if name == "fit":
            sp.add_argument("--jobs", type=int, default=1, help="chains to run in parallel")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config and not Path(args.config).exists():
            raise UsageError(f"config file {args.config} not found")
        cfg = _config(args)
        unknown = sorted(set(cfg) - KEYS[args.command])
        if unknown:
            raise UsageError(f"unknown configuration key(s) for {args.command}: {', '.join(unknown)}")
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "fit":
            return cmd_fit(cfg, max(1, args.jobs))
        if args.command == "summarize":
            return cmd_summarize(cfg)
        return cmd_compare(cfg)
    except UsageError as exc:
        print(f"frnet: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataError, ScoreError) as exc:
        print(f"frnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SamplerError as exc:
        print(f"frnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"frnet: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
