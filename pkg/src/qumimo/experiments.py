"""Reproducible experiment runner for the three operating regimes.

Configs are single JSON documents (schema below).  Every sampled object
derives its seed from the master seed and its task coordinates through
SHA-256, so outputs are byte-identical across runs and worker counts.

Config schema (JSON object; keys marked (s) are stochastic-only,
(f) fixed_z-only, (x) scaling-only)::

    regime             "fixed_z" | "scaling" | "stochastic"
    N                  (f,x) list of mode counts (M = K = N per point);
                       (s) single int
    Z                  (f) list of total budgets; (s) single float
    Lambda_x           (x) list of per-branch budgets (Z = N * Lambda_x)
    eta                list of crosstalk strengths in [0, 1]
    delta              spatial decay exponent, > 0
    p                  list of purification success probabilities in (0, 1]
    mu                 (s) fluctuation strengths for the realization panel
    heatmap_mu         (s) fluctuation strength of the gain heatmap
                       (default 0.5)
    box_p, box_eta     (s) operating point of the realization panel
                       (defaults 0.8, 0.8)
    channel_symmetry   list from {"symmetric", "asymmetric"}; ignored by
                       the stochastic regime (always asymmetric means)
    num_mean_vectors   L, mean allocations per cell
    num_realizations   (s) R, realizations per mean vector
    strategies         subset of {dir, pur, div, sym, blind}
    seed               master seed (unsigned 64-bit)
    output_dir         optional default output directory

Stochastic-regime semantics: instantaneous realizations are unknown to
both endpoints, so the cloning asymmetry, mode selection and decoders
are designed on the *mean* channel (the only statistic available) and
evaluated on each realization with their realized acceptance
probability.  The gain
heatmap column ``G`` compares conditional (success) fidelities of the
probabilistic and deterministic designs on the same realization, so the
p = 1 column is identically zero; ``G_avg`` carries the
average-fidelity accounting, and ``baseline.csv`` holds the
deterministic fidelity on the mean vectors themselves.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import decoder as dec_mod
from .channel import ChannelParams, channel_choi, coupling_report
from .cloner import clone_fidelities, cloner_choi, feasible_boundary
from .errors import ConfigError
from .metrics import asymmetry_index, empirical_density
from .noise import (
    MeanAllocation,
    cluster_variance,
    derive_seed,
    make_rng,
    perturb_and_project,
    sample_fluctuation,
    sample_mean_allocations,
    write_allocations_csv,
)
from .strategies import (
    STRATEGIES,
    FidelityRecord,
    haar_fidelity_no_decode,
    run_strategy,
    select_modes,
    write_records_csv,
)

REGIMES = ("fixed_z", "scaling", "stochastic")
SYMMETRY_CLASSES = ("symmetric", "asymmetric")
SEED_RULE = "sha256('|'.join(repr(part) for part in (master_seed, *coords)))[:8 bytes, little-endian]"
CROSSTALK_NOTE = "P = (1 - eta) * I + eta * C; reporting-only mode-level mixing model"


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str
    n_list: tuple
    z_list: tuple
    lambda_x: tuple
    eta: tuple
    delta: float
    p: tuple
    mu: tuple
    heatmap_mu: float
    box_p: float
    box_eta: float
    channel_symmetry: tuple
    num_mean_vectors: int
    num_realizations: int
    strategies: tuple
    seed: int
    output_dir: Optional[str]
    raw: dict = field(default_factory=dict, repr=False)


def _require(cfg: dict, key: str, path: str = "$"):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return cfg[key]


def _check_list(value, key, pred, what, path="$"):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}.{key}", "expected a nonempty list")
    for i, x in enumerate(value):
        if not pred(x):
            raise ConfigError(f"{path}.{key}[{i}]", f"expected {what}, got {x!r}")
    return tuple(value)


def validate_config(cfg: dict, profile: str = "ci") -> ExperimentConfig:
    """Fail-fast validation with JSON-path-precise messages."""
    if profile not in ("ci", "full"):
        raise ConfigError("$profile", f"unknown profile {profile!r}")
    if not isinstance(cfg, dict):
        raise ConfigError("$", "config must be a JSON object")
    regime = _require(cfg, "regime")
    if regime not in REGIMES:
        raise ConfigError("$.regime", f"must be one of {REGIMES}, got {regime!r}")

    n_cap = 4 if profile == "ci" else 5
    is_num = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)

    if regime == "stochastic":
        n_val = _require(cfg, "N")
        if not isinstance(n_val, int) or isinstance(n_val, bool):
            raise ConfigError("$.N", "stochastic regime takes a single integer N")
        if not 1 <= n_val <= n_cap:
            raise ConfigError("$.N", f"N={n_val} outside 1..{n_cap} (profile {profile})")
        n_list = (n_val,)
        z_val = _require(cfg, "Z")
        if not is_num(z_val) or not 0 < float(z_val) <= n_val:
            raise ConfigError("$.Z", f"Z must lie in (0, N]={n_val}, got {z_val!r}")
        z_list = (float(z_val),)
        lambda_x = ()
        mu = _check_list(
            cfg.get("mu", [0.25, 0.5, 0.75, 1.0]), "mu", lambda x: is_num(x) and x > 0,
            "a positive number",
        )
        num_real = cfg.get("num_realizations", 50)
        if not isinstance(num_real, int) or num_real < 1:
            raise ConfigError("$.num_realizations", f"expected positive int, got {num_real!r}")
    else:
        n_raw = _require(cfg, "N")
        n_list = _check_list(
            n_raw, "N", lambda x: isinstance(x, int) and not isinstance(x, bool) and 1 <= x <= n_cap,
            f"an int in 1..{n_cap} (profile {profile})",
        )
        if regime == "fixed_z":
            z_list = _check_list(
                _require(cfg, "Z"), "Z", lambda x: is_num(x) and x > 0, "a positive number"
            )
            z_list = tuple(float(z) for z in z_list)
            lambda_x = ()
        else:
            lambda_x = _check_list(
                _require(cfg, "Lambda_x"), "Lambda_x",
                lambda x: is_num(x) and 0 < x <= 1, "a number in (0, 1]",
            )
            lambda_x = tuple(float(x) for x in lambda_x)
            z_list = ()
        mu = tuple(float(x) for x in cfg.get("mu", []) or ())
        num_real = int(cfg.get("num_realizations", 0) or 0)

    eta = _check_list(
        _require(cfg, "eta"), "eta", lambda x: is_num(x) and 0 <= x <= 1, "a number in [0, 1]"
    )
    eta = tuple(float(x) for x in eta)
    delta = _require(cfg, "delta")
    if not is_num(delta) or delta <= 0:
        raise ConfigError("$.delta", f"expected a positive number, got {delta!r}")
    p = _check_list(
        _require(cfg, "p"), "p", lambda x: is_num(x) and 0 < x <= 1, "a number in (0, 1]"
    )
    p = tuple(float(x) for x in p)

    sym = _check_list(
        cfg.get("channel_symmetry", ["asymmetric"]), "channel_symmetry",
        lambda x: x in SYMMETRY_CLASSES, f"one of {SYMMETRY_CLASSES}",
    )
    num_means = cfg.get("num_mean_vectors", 50)
    if not isinstance(num_means, int) or num_means < 1:
        raise ConfigError("$.num_mean_vectors", f"expected positive int, got {num_means!r}")
    strategies = _check_list(
        cfg.get("strategies", list(STRATEGIES)), "strategies",
        lambda x: x in STRATEGIES, f"one of {STRATEGIES}",
    )
    seed = _require(cfg, "seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError("$.seed", f"expected unsigned 64-bit int, got {seed!r}")

    heatmap_mu = float(cfg.get("heatmap_mu", 0.5))
    if heatmap_mu <= 0:
        raise ConfigError("$.heatmap_mu", "must be positive")
    box_p = float(cfg.get("box_p", 0.8))
    if not 0 < box_p <= 1:
        raise ConfigError("$.box_p", "must lie in (0, 1]")
    box_eta = float(cfg.get("box_eta", 0.8))
    if not 0 <= box_eta <= 1:
        raise ConfigError("$.box_eta", "must lie in [0, 1]")

    out_dir = cfg.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("$.output_dir", "expected a string path")

    return ExperimentConfig(
        regime=regime, n_list=n_list, z_list=z_list, lambda_x=lambda_x,
        eta=eta, delta=float(delta), p=p, mu=mu, heatmap_mu=heatmap_mu,
        box_p=box_p, box_eta=box_eta, channel_symmetry=sym,
        num_mean_vectors=num_means, num_realizations=num_real,
        strategies=strategies, seed=seed, output_dir=out_dir, raw=dict(cfg),
    )


def load_config(path, profile: str = "ci") -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"$ (line {exc.lineno}, col {exc.colno})", exc.msg) from exc
    return validate_config(raw, profile=profile)


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _mean_vectors(cfg: ExperimentConfig, sym: str, z: float, n: int):
    # Seeded by (symmetry, Z, N) only, so regimes that land on the same
    # budget draw identical ensembles (scaling at Z = N * Lambda_x
    # coincides with fixed_z at that Z).
    if sym == "symmetric":
        lam = tuple([z / n] * n)
        return [MeanAllocation(lam=lam, z=z)] * cfg.num_mean_vectors
    seed = derive_seed(cfg.seed, "means", sym, round(z, 12), n)
    return sample_mean_allocations(n, z, cfg.num_mean_vectors, make_rng(seed))


def _grid_cells(cfg: ExperimentConfig):
    cells, skipped = [], []
    for sym in cfg.channel_symmetry:
        if cfg.regime == "fixed_z":
            pairs = [(z, None) for z in cfg.z_list]
        else:
            pairs = [(None, lx) for lx in cfg.lambda_x]
        for z_fixed, lx in pairs:
            for n in cfg.n_list:
                z = float(z_fixed) if z_fixed is not None else round(n * lx, 12)
                if z > n + 1e-12:
                    skipped.append({"symmetry": sym, "Z": z, "N": n, "reason": "Z > N"})
                    continue
                for eta in cfg.eta:
                    cells.append((sym, z, lx, n, eta))
    return cells, skipped


def _eval_cell(args):
    """One (symmetry, Z, lambda_x, N, eta, mean) task of a grid regime."""
    cfg, sym, z, lx, n, eta, mean_id, lam = args
    params = ChannelParams(n=n, eta=eta, lam=lam, delta=cfg.delta)
    chan = channel_choi(params)
    task_seed = derive_seed(cfg.seed, cfg.regime, sym, round(z, 12), n, eta, mean_id)
    records = []
    for pi, p in enumerate(cfg.p):
        for strategy in cfg.strategies:
            if strategy == "dir" and pi > 0:
                continue  # deterministic; independent of p
            m = 1 if strategy in ("dir", "pur") else n
            k = 1 if strategy == "dir" else n
            p_eff = 1.0 if strategy == "dir" else p
            gamma_seed = derive_seed(
                cfg.seed, "gamma-opt", n, eta, cfg.delta,
                tuple(round(x, 12) for x in lam), p_eff,
            )
            rec = run_strategy(
                strategy, params, m, k, p_eff, chan=chan, seed=gamma_seed,
                regime=cfg.regime, z=z, mean_id=mean_id,
            )
            records.append(dataclasses.replace(rec, seed=task_seed))
    return (sym, z, lx, n, eta, mean_id), records


def _run_pool(tasks, worker, workers: int):
    if workers <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks, chunksize=1))


def _write_crosstalk_csv(path, cfg: ExperimentConfig) -> None:
    rows = []
    for n in sorted(set(cfg.n_list)):
        if n < 2:
            continue
        for eta in cfg.eta:
            p_mat = coupling_report(ChannelParams(n=n, eta=eta, lam=(0.0,) * n, delta=cfg.delta))
            for i in range(n):
                for j in range(n):
                    rows.append([n, eta, cfg.delta, i + 1, j + 1, p_mat[i, j]])
    _write_csv(path, ["N", "eta", "delta", "i", "j", "P_ij"], rows)


def _manifest(cfg: ExperimentConfig, out_dir, files, extra=None) -> dict:
    manifest = {
        "package_version": __version__,
        "regime": cfg.regime,
        "config": cfg.raw,
        "master_seed": cfg.seed,
        "task_seed_rule": SEED_RULE,
        "notes": {"crosstalk": CROSSTALK_NOTE},
        "files": {name: _hash_file(out_dir / name) for name in sorted(files)},
    }
    if extra:
        manifest.update(extra)
    return manifest


def _finish(cfg, out_dir, files, t0, extra=None) -> dict:
    manifest = _manifest(cfg, out_dir, files, extra=extra)
    manifest["timing"] = {"wall_clock_seconds": time.time() - t0, "finished_unix": time.time()}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def run_grid_regime(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Shared driver for the fixed_z and scaling regimes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    cells, skipped = _grid_cells(cfg)
    tasks = []
    for sym, z, lx, n, eta in cells:
        means = _mean_vectors(cfg, sym, z, n)
        for mean_id, mean in enumerate(means):
            tasks.append((cfg, sym, z, lx, n, eta, mean_id, mean.lam))
    results = _run_pool(tasks, _eval_cell, workers)
    results.sort(key=lambda kr: _cell_sort_key(kr[0]))

    all_records = [rec for _, recs in results for rec in recs]
    m_max = max(cfg.n_list)
    write_records_csv(out_dir / "records.csv", all_records, m_max)

    # Aggregates: mean / standard error per cell and strategy.
    groups: dict = {}
    for key, recs in results:
        sym, z, lx, n, eta, mean_id = key
        for rec in recs:
            gkey = (sym, z, lx, n, eta, rec.p_target if rec.strategy != "dir" else 1.0, rec.strategy)
            groups.setdefault(gkey, []).append(rec)
    agg_rows = []
    for gkey in sorted(groups, key=_agg_sort_key):
        recs = groups[gkey]
        sym, z, lx, n, eta, p, strategy = gkey
        f = np.array([r.f_avg for r in recs])
        fs = np.array([r.f_success for r in recs])
        js = np.array([r.j_index for r in recs if r.j_index is not None])
        se = float(f.std(ddof=1) / np.sqrt(f.size)) if f.size > 1 else 0.0
        agg_rows.append([
            sym, z, "" if lx is None else lx, n, n, eta, p, strategy,
            float(f.mean()), se, float(fs.mean()),
            float(js.mean()) if js.size else "", f.size,
        ])
    _write_csv(
        out_dir / "aggregate.csv",
        ["symmetry", "Z", "lambda_x", "N", "M", "eta", "p", "strategy",
         "F_avg_mean", "F_avg_se", "F_success_mean", "J_mean", "n_samples"],
        agg_rows,
    )

    files = ["records.csv", "aggregate.csv"]

    # Asymmetry-index densities of the adaptive strategy.
    if "div" in cfg.strategies:
        dens_rows = []
        for gkey in sorted(groups, key=_agg_sort_key):
            sym, z, lx, n, eta, p, strategy = gkey
            if strategy != "div" or n < 2:
                continue
            js = [r.j_index for r in groups[gkey] if r.j_index is not None]
            if len(js) < 2:
                continue
            grid, dens = empirical_density(js, (1.0 / n, 1.0))
            for x, d in zip(grid, dens):
                dens_rows.append([sym, z, "" if lx is None else lx, n, eta, p, x, d])
        _write_csv(
            out_dir / "jdensity.csv",
            ["symmetry", "Z", "lambda_x", "N", "eta", "p", "x", "density"],
            dens_rows,
        )
        files.append("jdensity.csv")

    if max(cfg.n_list) >= 2:
        _write_crosstalk_csv(out_dir / "crosstalk.csv", cfg)
        files.append("crosstalk.csv")

    return _finish(cfg, out_dir, files, t0, extra={"skipped_cells": skipped})


def _cell_sort_key(key):
    sym, z, lx, n, eta, mean_id = key
    return (sym, z, -1.0 if lx is None else lx, n, eta, mean_id)


def _agg_sort_key(gkey):
    sym, z, lx, n, eta, p, strategy = gkey
    return (sym, z, -1.0 if lx is None else lx, n, eta, p, STRATEGIES.index(strategy))


def run_fixed_z(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    if cfg.regime != "fixed_z":
        raise ConfigError("$.regime", f"expected fixed_z, got {cfg.regime}")
    return run_grid_regime(cfg, out_dir, workers)


def run_scaling(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    if cfg.regime != "scaling":
        raise ConfigError("$.regime", f"expected scaling, got {cfg.regime}")
    return run_grid_regime(cfg, out_dir, workers)


# ---------------------------------------------------------------------------
# Stochastic regime


def _design_on_mean(cfg: ExperimentConfig, eta: float, mean: MeanAllocation, p_eval):
    """Design gamma*, decoders (one per p) and mode choices on the mean."""
    n = mean.n
    params = ChannelParams(n=n, eta=eta, lam=mean.lam, delta=cfg.delta)
    chan = channel_choi(params)
    t, _ = select_modes(mean.lam, n, chan)
    r = tuple(range(1, n + 1))
    gamma_seed = derive_seed(
        cfg.seed, "gamma-opt", n, eta, cfg.delta,
        tuple(round(x, 12) for x in mean.lam), "stochastic",
    )
    opt = dec_mod.optimize_gamma(n, chan, t, r, max(cfg.p), seed=gamma_seed)
    enc = cloner_choi(opt.gamma.gamma)
    qr_mean = dec_mod.build_qr(dec_mod.compose_effective_map(enc, chan, t, r))
    decoders = {}
    for p in p_eval:
        decoders[p] = dec_mod.purification_sdp(qr_mean, p)
    t_dir, r_dir = select_modes(mean.lam, 1, chan)
    return {
        "gamma": opt.gamma.gamma,
        "enc": enc,
        "decoders": decoders,
        "t": t,
        "r": r,
        "t_dir": t_dir,
        "r_dir": (r_dir[0],),
        "chan_mean": chan,
    }


def _evaluate_on_realization(design, cfg, eta, x: MeanAllocation):
    """Realized (acceptance, accepted-fidelity-mass) of each designed decoder."""
    params = ChannelParams(n=x.n, eta=eta, lam=x.lam, delta=cfg.delta)
    chan_x = channel_choi(params)
    qr_x = dec_mod.build_qr(
        dec_mod.compose_effective_map(design["enc"], chan_x, design["t"], design["r"])
    )
    out = {}
    for p, dec in design["decoders"].items():
        p_real = float(np.real(np.trace(dec.j @ qr_x.rt)))
        acc = float(np.real(np.trace(dec.j @ qr_x.qt)))
        f_success = acc / p_real if p_real > 1e-12 else 0.5
        f_avg = acc + (1.0 - p_real) / 2.0
        out[p] = (p_real, f_success, f_avg)
    return out, chan_x


def _dir_fidelity(design, cfg, eta, x: MeanAllocation, chan_x=None):
    if chan_x is None:
        params = ChannelParams(n=x.n, eta=eta, lam=x.lam, delta=cfg.delta)
        chan_x = channel_choi(params)
    emap = dec_mod.compose_effective_map(
        cloner_choi((1.0,)), chan_x, design["t_dir"], design["r_dir"]
    )
    return haar_fidelity_no_decode(dec_mod.build_qr(emap))


def _stochastic_task(args):
    cfg, eta, mean_id, lam, z = args
    mean = MeanAllocation(lam=lam, z=z)
    p_eval = tuple(sorted(set(cfg.p) | {1.0}))
    design = _design_on_mean(cfg, eta, mean, p_eval)

    base_eval, _ = _evaluate_on_realization(design, cfg, eta, mean)
    baseline_row = [
        eta, mean_id, base_eval[1.0][1], base_eval[1.0][2],
        asymmetry_index(clone_fidelities(design["gamma"]).fidelities),
    ] + list(design["gamma"])

    rows = []
    records = []
    for rid in range(cfg.num_realizations):
        seed = derive_seed(cfg.seed, "stochastic", "xi", cfg.heatmap_mu, mean_id, rid)
        xi = sample_fluctuation(cfg.heatmap_mu, mean.n, make_rng(seed))
        x = perturb_and_project(mean, xi)
        evals, chan_x = _evaluate_on_realization(design, cfg, eta, x)
        p1_real, p1_fs, p1_favg = evals[1.0]
        for p in p_eval:
            p_real, fs, favg = evals[p]
            rows.append([eta, p, mean_id, rid, fs - p1_fs, favg - p1_favg, fs, favg, p_real])
            records.append(
                FidelityRecord(
                    strategy="div", n=mean.n, m=mean.n, k=mean.n, z=z,
                    regime="stochastic", eta=eta, delta=cfg.delta,
                    p_target=p, p_real=p_real, mu=cfg.heatmap_mu,
                    mean_id=mean_id, realization_id=rid, f_avg=favg,
                    j_index=asymmetry_index(clone_fidelities(design["gamma"]).fidelities),
                    gamma=design["gamma"], t=design["t"], r=design["r"],
                    seed=seed, f_success=fs,
                )
            )
    return (eta, mean_id), baseline_row, rows, records


def _boxplot_task(args):
    cfg, mean_id, lam, z, mu = args
    mean = MeanAllocation(lam=lam, z=z)
    design = _design_on_mean(cfg, cfg.box_eta, mean, (cfg.box_p, 1.0))
    rows = []
    cluster = []
    for rid in range(cfg.num_realizations):
        seed = derive_seed(cfg.seed, "stochastic", "box-xi", mu, mean_id, rid)
        xi = sample_fluctuation(mu, mean.n, make_rng(seed))
        x = perturb_and_project(mean, xi)
        evals, chan_x = _evaluate_on_realization(design, cfg, cfg.box_eta, x)
        f_dir = _dir_fidelity(design, cfg, cfg.box_eta, x, chan_x)
        p_real, fs, favg = evals[cfg.box_p]
        rows.append([mu, rid, f_dir, fs, favg, p_real])
        cluster.append(x)
    return mu, rows, cluster


def run_stochastic(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    if cfg.regime != "stochastic":
        raise ConfigError("$.regime", f"expected stochastic, got {cfg.regime}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    n = cfg.n_list[0]
    z = cfg.z_list[0]
    means = _mean_vectors(cfg, "asymmetric", z, n)

    # Gain heatmap over (p, eta) grids.
    tasks = [
        (cfg, eta, mean_id, mean.lam, z)
        for eta in cfg.eta
        for mean_id, mean in enumerate(means)
    ]
    results = _run_pool(tasks, _stochastic_task, workers)
    results.sort(key=lambda out: out[0])

    baseline_rows = [res[1] for res in results]
    gain_rows = [row for res in results for row in res[2]]
    records = [rec for res in results for rec in res[3]]

    p_eval = tuple(sorted(set(cfg.p) | {1.0}))
    heat_rows = []
    for eta in cfg.eta:
        for p in p_eval:
            sel = [r for r in gain_rows if r[0] == eta and r[1] == p]
            g = np.array([r[4] for r in sel])
            g_avg = np.array([r[5] for r in sel])
            se = float(g.std(ddof=1) / np.sqrt(g.size)) if g.size > 1 else 0.0
            heat_rows.append([p, eta, float(g.mean()), se, float(g_avg.mean()), g.size])
    _write_csv(
        out_dir / "gain_heatmap.csv",
        ["p", "eta", "G", "G_se", "G_avg", "n_samples"], heat_rows,
    )
    _write_csv(
        out_dir / "gain_samples.csv",
        ["eta", "p", "mean_id", "realization_id", "G", "G_avg",
         "F_success", "F_avg", "p_real"],
        gain_rows,
    )
    _write_csv(
        out_dir / "baseline.csv",
        ["eta", "mean_id", "F_success_p1", "F_avg_p1", "J_index"]
        + [f"gamma_{i + 1}" for i in range(n)],
        baseline_rows,
    )
    write_records_csv(out_dir / "records.csv", records, n)

    # Realization panel at the box operating point, mean vector 0.
    box_tasks = [(cfg, 0, means[0].lam, z, mu) for mu in cfg.mu]
    box_results = _run_pool(box_tasks, _boxplot_task, workers)
    box_results.sort(key=lambda out: out[0])
    box_rows, cv_rows, alloc_rows, kde_rows = [], [], [], []
    alloc_rows.append((0, "", 0.0, means[0].lam))
    variances = {}
    for mu, rows, cluster in box_results:
        box_rows.extend(rows)
        v = cluster_variance(means[0], cluster)
        variances[mu] = v
        cv_rows.append([0, mu, v])
        for rid, x in enumerate(cluster):
            alloc_rows.append((0, rid, mu, x.lam))
    # Per-mean cluster variances across all means for the KDE panel.
    cvk_tasks = [
        (cfg, mean_id, mean.lam, z, mu)
        for mu in cfg.mu
        for mean_id, mean in enumerate(means)
        if mean_id > 0
    ]
    cvk_results = _run_pool(cvk_tasks, _cluster_only_task, workers)
    all_v = {mu: [variances[mu]] for mu in cfg.mu}
    for mu, mean_id, v in sorted(cvk_results, key=lambda r: (r[0], r[1])):
        cv_rows.append([mean_id, mu, v])
        all_v[mu].append(v)
    cv_rows.sort(key=lambda r: (r[1], r[0]))
    for mu in cfg.mu:
        vals = all_v[mu]
        if len(vals) >= 2:
            hi = max(max(vals) * 1.05, 1e-6)
            grid, dens = empirical_density(vals, (0.0, hi))
            for x, d in zip(grid, dens):
                kde_rows.append([mu, x, d])

    _write_csv(
        out_dir / "boxplot.csv",
        ["mu", "realization_id", "F_dir", "F_div_success", "F_div_avg", "p_real"],
        box_rows,
    )
    _write_csv(out_dir / "cluster_variance.csv", ["mean_id", "mu", "v"], cv_rows)
    _write_csv(out_dir / "cv_kde.csv", ["mu", "x", "density"], kde_rows)
    write_allocations_csv(out_dir / "allocations.csv", alloc_rows)

    files = [
        "gain_heatmap.csv", "gain_samples.csv", "baseline.csv", "records.csv",
        "boxplot.csv", "cluster_variance.csv", "cv_kde.csv", "allocations.csv",
    ]
    if n >= 2:
        _write_crosstalk_csv(out_dir / "crosstalk.csv", cfg)
        files.append("crosstalk.csv")
    return _finish(cfg, out_dir, files, t0)


def _cluster_only_task(args):
    cfg, mean_id, lam, z, mu = args
    mean = MeanAllocation(lam=lam, z=z)
    cluster = []
    for rid in range(cfg.num_realizations):
        seed = derive_seed(cfg.seed, "stochastic", "box-xi", mu, mean_id, rid)
        xi = sample_fluctuation(mu, mean.n, make_rng(seed))
        cluster.append(perturb_and_project(mean, xi))
    return mu, mean_id, cluster_variance(mean, cluster)


def run_boundary(out_dir, m_values=(2, 3), resolution: float = 0.05) -> dict:
    """Cloning trade-off surfaces as CSV, one file per clone count."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for m in m_values:
        rows = []
        for fv in feasible_boundary(m, resolution):
            rows.append(list(fv.gamma.gamma) + list(fv.fidelities))
        name = f"boundary_M{m}.csv"
        _write_csv(
            out_dir / name,
            [f"gamma_{i + 1}" for i in range(m)] + [f"F_{i + 1}" for i in range(m)],
            rows,
        )
        files.append(name)
    manifest = {
        "package_version": __version__,
        "emitter": "boundary",
        "resolution": resolution,
        "files": {name: _hash_file(out_dir / name) for name in sorted(files)},
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
