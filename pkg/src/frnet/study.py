"""Simulation-study orchestration: write scenario datasets, fit them, tabulate results."""
from __future__ import annotations

import csv
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .core import Family
from .posterior import (EFFECT_TYPES, PosteriorSample, comparison_table, concentration_ratio, effect_type,
                        quantile_intervals, summary_rows)
from .sampler import SamplerConfig, run_chain
from .simgen import ScenarioSpec, censoring_rate, simulate_network

SCENARIO_FILE = "scenario.txt"
TRUTH_FILE = "truth.csv"


def write_scenario_dataset(spec: ScenarioSpec, replicate: int, root) -> Path:
    """Simulate one replicate and write survey files, truth and fit defaults."""
    net = simulate_network(spec, replicate)
    out = Path(root) / net.dataset_id
    io.write_dataset(out, io.dataset_from_scores(net.S, net.design))
    t = net.truth
    names = net.design.names + ["sigma_aa", "sigma_ab", "sigma_bb", "rho"]
    values = list(t.beta) + [t.sigma_ab[0, 0], t.sigma_ab[0, 1], t.sigma_ab[1, 1], t.rho]
    io.write_truth(out / TRUTH_FILE, names, values, t.a, t.b)
    d = net.design
    lines = {"m": spec.m, "row_covariates": ",".join(d.row_names), "col_covariates": ",".join(d.col_names),
             "dyad_covariates": ",".join(d.dyad_names), "intercept": "true", "scenario": spec.name,
             "replicate": replicate, "n": spec.n, "censoring_rate": f"{censoring_rate(net.Y, spec.m):.6g}"}
    (out / SCENARIO_FILE).write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return out


def dataset_seed(seed: int, dataset: str, family) -> int:
    """Chain seed from (base seed, dataset name, family); stable across runs and job orderings."""
    key = [int(seed), zlib.crc32(dataset.encode()), Family.parse(family).code]
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0] >> np.uint64(1))


def _split(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


def _flag(value) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "y", "t")


def fit_options(data_dir, overrides: dict) -> dict:
    """Fit settings: the dataset's scenario defaults overlaid by ``overrides``."""
    opts = {}
    scen = Path(data_dir) / SCENARIO_FILE
    if scen.exists():
        opts.update(io.read_config(scen))
    opts.update({k: v for k, v in overrides.items() if v is not None})
    if "m" not in opts:
        raise io.DataError(f"{data_dir}: nomination limit m is not configured")
    return opts


def load_problem(data_dir, opts: dict):
    """Scores and design for a dataset directory under the given options."""
    ds = io.load_dataset(data_dir, int(opts["m"]))
    S = io.build_score_matrix(ds)
    design = io.build_design(ds, _split(opts.get("row_covariates")), _split(opts.get("col_covariates")),
                             _split(opts.get("dyad_covariates")), intercept=_flag(opts.get("intercept", "true")),
                             normal_scores=_flag(opts.get("normal_scores", "false")))
    return ds, S, design


def sampler_config(family, opts: dict, seed: int) -> SamplerConfig:
    kw = {"family": family, "seed": seed}
    for key, cast in (("n_iter", int), ("burn_in", int), ("thin", int), ("prior_beta_variance", float),
                      ("rho_proposal_sd", float)):
        if key in opts:
            kw[key] = cast(opts[key])
    return SamplerConfig(**kw)


def fit_dataset(data_dir, family, opts: dict, output_dir=None) -> PosteriorSample:
    """Fit one dataset under one family; optionally write samples and summary CSVs."""
    data_dir = Path(data_dir)
    opts = fit_options(data_dir, opts)
    _, S, design = load_problem(data_dir, opts)
    fam = Family.parse(family)
    seed = dataset_seed(int(opts.get("seed", 0)), data_dir.name, fam)
    cfg = sampler_config(fam, opts, seed)
    sample = run_chain(S, design, cfg, meta={"dataset": data_dir.name, "m": int(opts["m"]),
                                             "base_seed": int(opts.get("seed", 0))})
    if output_dir is not None:
        out = Path(output_dir) / data_dir.name
        out.mkdir(parents=True, exist_ok=True)
        sample.to_csv(out / f"samples_{fam.value}.csv")
        write_summary(sample, out / f"summary_{fam.value}.csv")
    return sample


def _fit_job(args):
    data_dir, family, opts, output_dir = args
    sample = fit_dataset(data_dir, family, opts, output_dir)
    return data_dir, family, dict(sample.meta)


def run_fits(jobs, n_jobs: int = 1):
    """Run ``(data_dir, family, opts, output_dir)`` jobs, in worker processes when ``n_jobs > 1``."""
    jobs = list(jobs)
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_fit_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n_jobs, len(jobs), os.cpu_count() or 1)) as pool:
        return list(pool.map(_fit_job, jobs))


def _fmt(v):
    if isinstance(v, float):
        return "NA" if not math.isfinite(v) else repr(float(v))
    return v


def write_rows(path, rows, columns) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    return path


def write_summary(sample: PosteriorSample, path) -> Path:
    return write_rows(path, summary_rows(sample), ["parameter", "mean", "sd", "q025", "q50", "q975", "ess"])


def collect_samples(samples_dir) -> dict:
    """dataset name -> family value -> PosteriorSample, from ``<dataset>/samples_<FAMILY>.csv``."""
    out = {}
    for path in sorted(Path(samples_dir).glob("*/samples_*.csv")):
        fam = Family.parse(path.stem[len("samples_"):])
        out.setdefault(path.parent.name, {})[fam.value] = PosteriorSample.from_csv(path)
    return out


def dyad_moments(data_dir, m) -> dict:
    """``dyad.<name>`` -> (mean, sd) over ordered pairs, for effect-type classification."""
    ds = io.load_dataset(data_dir, m)
    off = ~np.eye(ds.n, dtype=bool)
    return {f"dyad.{k}": (float(v[off].mean()), float(v[off].std())) for k, v in ds.dyad_covariates.items()}


def table1_rows(samples: dict, reference: str = "FRN", data_root=None) -> list[dict]:
    """Rows of (family, effect type, magnitude ratio, width ratio) over datasets fitted by every family."""
    families = sorted({f for fams in samples.values() for f in fams})
    if reference not in families:
        raise ValueError(f"no {reference} samples to compare against")
    datasets = [d for d in sorted(samples) if all(f in samples[d] for f in families)]
    if not datasets:
        raise ValueError("no dataset has samples for every family")
    groups = {}
    if data_root is not None:
        for d in datasets:
            dd = Path(data_root) / d
            if dd.exists():
                m = int(samples[d][reference].meta.get("m", 0))
                for name, mom in dyad_moments(dd, m).items():
                    groups[name] = effect_type(name, {name: mom})
    table = comparison_table({f: [samples[d][f] for d in datasets] for f in families}, groups, reference)
    return [{"family": f, "effect_type": t, "magnitude_ratio": table[f][t][0], "width_ratio": table[f][t][1],
             "datasets": len(datasets)} for f in families for t in EFFECT_TYPES]


def interval_rows(samples: dict, data_root=None) -> list[dict]:
    rows = []
    for d in sorted(samples):
        truth = {}
        if data_root is not None and (Path(data_root) / d / TRUTH_FILE).exists():
            truth = io.read_truth(Path(data_root) / d / TRUTH_FILE)
        for fam, smp in sorted(samples[d].items()):
            q = quantile_intervals(smp)
            for name in smp.beta_names:
                rows.append({"dataset": d, "family": fam, "parameter": name, "q025": q[name][0.025],
                             "q50": q[name][0.5], "q975": q[name][0.975], "truth": truth.get(name, math.nan)})
    return rows


def concentration_rows(samples: dict, data_root, family_f="FRN", family_c="CENSORED_BINARY"):
    """Per-dataset ratios and their average over datasets sharing the same m."""
    per, grouped = [], {}
    for d in sorted(samples):
        fams = samples[d]
        tpath = Path(data_root) / d / TRUTH_FILE
        if family_f not in fams or family_c not in fams or not tpath.exists():
            continue
        truth = io.read_truth(tpath)
        beta = {k: truth[k] for k in fams[family_f].beta_names if k in truth and k != "intercept"}
        m = int(fams[family_f].meta.get("m", 0))
        for name, r in concentration_ratio(fams[family_f], fams[family_c], beta).items():
            per.append({"dataset": d, "m": m, "parameter": name, "ratio": r})
            grouped.setdefault((m, name), []).append(r)
    avg = [{"m": m, "parameter": name, "ratio": float(np.mean(v)), "datasets": len(v)}
           for (m, name), v in sorted(grouped.items())]
    return per, avg
