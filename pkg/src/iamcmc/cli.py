"""Config-driven experiment runner.

Subcommands: run (one kernel against one target, with diagnostics and
plots), compare (several kernels side by side), oracle (precompute a grid
posterior file), spectral (gap curves of the four-state family).  All
outputs are deterministic functions of (config, seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import equivalence as eqv
from . import kernels as krn
from . import smc as smc_mod
from . import spectral as spc
from . import targets as tgt

EXPERIMENTS = ("four_state", "circle", "mixture_gaussian",
               "conditional_gaussian", "ma1", "smc_compare", "spectral_curve")


class ConfigError(Exception):
    """Invalid experiment configuration; message names the offending key."""


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _require(cfg: dict, key: str, path: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return cfg[key]


# ---------------------------------------------------------------------------
# Experiment construction
# ---------------------------------------------------------------------------

def build_experiment(cfg: dict) -> dict:
    """Resolve an experiment name and params into target, structure, names."""
    name = _require(cfg, "experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"config.experiment: unknown experiment '{name}'")
    p = cfg.get("params", {})
    if name == "four_state":
        probs = p.get("probs")
        if probs is None:
            a = p.get("a", 0.49999)
            probs = [a, 0.5 - a, 0.5 - a, a]
        ft = tgt.make_four_state(*probs)
        return {"name": name, "finite": ft, "param_names": ["theta1", "theta2"]}
    if name == "circle":
        L = p.get("L", 4.0)
        nu = p.get("nu", 1.0)
        target = tgt.make_circle_bimodal(L, nu)
        return {"name": name, "target": target,
                "structure": eqv.antipodal_circle_structure(L),
                "param_names": ["theta"], "init": p.get("init", [0.0]),
                "mode_regions": {
                    "near_zero": lambda x: np.abs(x[:, 0]) < L,
                    "near_antipode": lambda x: np.abs(x[:, 0]) >= L,
                }}
    if name == "mixture_gaussian":
        data = _mixture_data(p)
        target = tgt.make_mixture_gaussian_loglik(data)
        return {"name": name, "target": target,
                "structure": eqv.mixture_label_switch_structure(),
                "param_names": ["mu1", "mu2", "sigma1", "sigma2", "p"],
                "init": p.get("init", [10.0, 20.0, 3.0, 5.0, 0.7])}
    if name in ("conditional_gaussian", "smc_compare"):
        k = int(p.get("k", 10))
        data = _conditional_gaussian_data(p, k)
        target = tgt.make_conditional_gaussian_loglik(data, k)
        init = p.get("init", [10.0] + [0.0] * (k - 1))
        return {"name": name, "target": target, "k": k, "data": data,
                "structure": eqv.affine_sum_fiber_structure(k),
                "param_names": [f"mu{i + 1}" for i in range(k)], "init": init}
    if name == "ma1":
        data = _ma1_data(p)
        target = tgt.make_ma1_log_posterior(data, prior=p.get("prior", "gaussian"))
        return {"name": name, "target": target,
                "structure": eqv.ma1_flip_structure(),
                "param_names": ["theta", "log_sigma"],
                "init": p.get("init", [0.5, 0.0])}
    raise ConfigError(f"config.experiment: '{name}' is not runnable via cmd_run")


def _mixture_data(p: dict) -> np.ndarray:
    if "data_csv" in p:
        return tgt.load_series_csv(p["data_csv"])
    rng = np.random.default_rng(int(p.get("data_seed", 0)))
    n = int(p.get("n_obs", 200))
    mu1, mu2 = p.get("mu1", 10.0), p.get("mu2", 20.0)
    s1, s2 = p.get("sigma1", 3.0), p.get("sigma2", 5.0)
    w = p.get("weight", 0.7)
    comp = rng.random(n) < w
    return np.where(comp, rng.normal(mu1, s1, n), rng.normal(mu2, s2, n))


def _conditional_gaussian_data(p: dict, k: int) -> np.ndarray:
    if "data_csv" in p:
        return tgt.load_series_csv(p["data_csv"])
    rng = np.random.default_rng(int(p.get("data_seed", 0)))
    n = int(p.get("n_obs", 100))
    total = float(p.get("mu_sum", 10.0))
    return rng.normal(total, 1.0, n)


def _ma1_data(p: dict) -> np.ndarray:
    if "data_csv" in p:
        return tgt.load_series_csv(p["data_csv"])
    return tgt.simulate_ma1(p.get("theta", 0.5), p.get("sigma", 1.0),
                            int(p.get("T", 200)), int(p.get("data_seed", 0)))


def build_kernel_spec(kcfg: dict) -> krn.KernelSpec:
    """Translate a config kernel block into a KernelSpec."""
    kind = _require(kcfg, "kind", "config.kernel")
    tele_cfg = None
    if kcfg.get("teleport_mode", "exact") == "mtm":
        tele_cfg = eqv.TeleportConfig(mode="mtm",
                                      mtm_tries=int(kcfg.get("mtm_tries", 10)))
    if kind == "rwm":
        return krn.KernelSpec("rwm_gauss", {"scale": kcfg.get("scale", 1.0)})
    if kind == "ia_rwm":
        style = kcfg.get("style", "envelope")
        spec_kind = {"envelope": "envelope", "mixture": "mixture",
                     "pt": "compose_pt", "tp": "compose_tp"}.get(style)
        if spec_kind is None:
            raise ConfigError(f"config.kernel.style: unknown style '{style}'")
        tuning = {"local": "rwm_gauss",
                  "local_tuning": {"scale": kcfg.get("scale", 1.0)},
                  "config": tele_cfg}
        if style == "mixture":
            tuning["epsilon"] = kcfg.get("epsilon", 0.5)
        return krn.KernelSpec(spec_kind, tuning)
    if kind == "hmc":
        return krn.KernelSpec("hmc", {"eps": kcfg.get("eps", 0.1),
                                      "leapfrog_steps": kcfg.get("leapfrog_steps", 10)})
    if kind == "nuts":
        return krn.KernelSpec("nuts", {"step_size": kcfg.get("step_size", 0.1),
                                       "max_depth": kcfg.get("max_depth", 10)})
    raise ConfigError(f"config.kernel.kind: unknown kernel '{kind}'")


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run_finite(cfg: dict, exp: dict, seed: int) -> tuple[np.ndarray, dict]:
    """Simulate a four-state experiment at the matrix level."""
    ft = exp["finite"]
    mats = spc.four_state_matrices(ft.probs)
    kcfg = cfg.get("kernel", {"kind": "gibbs"})
    kind = kcfg.get("kind", "gibbs")
    scan = kcfg.get("scan", "random_scan")
    base = mats["P_RS"] if scan == "random_scan" else mats["P_sys"]
    if kind == "gibbs":
        P = base
    elif kind == "ia_gibbs":
        P = spc.envelope_matrix(base, mats["T"])
    else:
        raise ConfigError(f"config.kernel.kind: '{kind}' unsupported for four_state")
    n = int(cfg.get("N", 10000))
    burn = int(cfg.get("burn", 0))
    chains = int(cfg.get("chains", 1))
    init = int(cfg.get("params", {}).get("init_state", 0))
    path = krn.simulate_matrix_chains(P, init, burn + n, chains, seed)
    states = path[burn:].T.ravel()
    draws = np.array(ft.states, dtype=float)[states]
    fractions = {lbl: float((states == i).mean())
                 for i, lbl in enumerate(spc.FOUR_STATE_LABELS)}
    return draws, {"mode_fractions": fractions}


def _run_one_chain(args):
    kernel, target, init, n, burn, thin, seed = args
    return krn.run_chain(kernel, target, init, n, burn=burn, thin=thin, seed=seed)


def run_sampler(cfg: dict, exp: dict, seed: int, threads: int,
                kcfg: dict | None = None) -> tuple[np.ndarray, dict]:
    """Run the configured kernel for the experiment; returns pooled draws."""
    if exp["name"] == "four_state":
        return _run_finite(cfg, exp, seed)
    kcfg = kcfg if kcfg is not None else _require(cfg, "kernel")
    target = exp["target"]
    spec = build_kernel_spec(kcfg)
    structure = exp.get("structure") if kcfg.get("kind", "").startswith("ia_") else None
    kernel = krn.make_kernel(spec, target, structure=exp.get("structure"))
    n = int(cfg.get("N", 10000))
    burn = int(cfg.get("burn", 1000))
    thin = int(cfg.get("thin", 1))
    chains = int(cfg.get("chains", 1))
    if chains < 1:
        raise ConfigError("config.chains: need at least one chain")
    init = np.asarray(exp.get("init"), dtype=float)
    seeds = np.random.SeedSequence(seed).spawn(chains)
    jobs = [(kernel, target, init, n, burn, thin,
             np.random.default_rng(s)) for s in seeds]
    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_run_one_chain, jobs))
    else:
        runs = [_run_one_chain(j) for j in jobs]
    draws = np.concatenate([r.draws for r in runs], axis=0)
    meta = {"chains": chains,
            "acceptance_rates": runs[0].meta["acceptance_rates"],
            "wall_time_s": sum(r.meta["wall_time_s"] for r in runs)}
    m_aug = int(kcfg.get("augment_m", cfg.get("augment_m", 0)))
    if m_aug > 1:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        draws = krn.batch_augment(draws, target, exp["structure"], m_aug, rng)
        meta["augment_m"] = m_aug
    _ = structure
    return draws, meta


def _load_or_build_oracle(cfg: dict, exp: dict):
    ocfg = cfg.get("oracle")
    if ocfg is None:
        return None
    if isinstance(ocfg, str):
        return tgt.GridOracle.load(ocfg)
    axes = [tuple(ax) for ax in _require(ocfg, "axes", "config.oracle")]
    return tgt.build_grid_oracle(exp["target"], axes)


def make_report(draws: np.ndarray, exp: dict, oracle, meta: dict) -> diag.DiagnosticsReport:
    report = diag.DiagnosticsReport(meta=meta)
    names = exp["param_names"]
    if oracle is not None:
        for ax, nm in enumerate(names[:len(oracle.axes)]):
            report.tv_to_oracle[nm] = diag.tv_distance_hist(draws, oracle, axis=ax)
            report.ks_to_oracle[nm] = diag.ks_distance(draws, oracle, axis=ax)
    if draws.shape[0] >= 10:
        for ax, nm in enumerate(names):
            val, flagged = diag.ess(draws[:, ax])
            report.ess[nm] = val
            if flagged:
                report.meta.setdefault("ess_flags", []).append(nm)
    if "mode_fractions" in meta:
        report.mode_fractions = meta.pop("mode_fractions")
    elif exp.get("mode_regions"):
        report.mode_fractions = diag.mode_fraction(draws, exp["mode_regions"])
    if "target" in exp:
        report.summary = diag.summary_table(draws, exp["target"])
    return report


def write_outputs(out_dir: Path, draws: np.ndarray, names, report, oracle,
                  stem: str = "draws") -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savetxt(out_dir / f"{stem}.csv", draws, delimiter=",",
               header=",".join(names), comments="", fmt="%.17g")
    report.to_json(out_dir / "report.json")
    plots = out_dir / "plots"
    plots.mkdir(exist_ok=True)
    if oracle is not None:
        for ax, nm in enumerate(names[:len(oracle.axes)]):
            diag.overlay_plot(draws, oracle, ax, plots / f"{stem}_{nm}.svg")
    else:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        for ax, nm in enumerate(names):
            fig, axis = plt.subplots(figsize=(6, 4))
            axis.hist(draws[:, ax], bins=100, density=True)
            axis.set_xlabel(nm)
            fig.tight_layout()
            fig.savefig(plots / f"{stem}_{nm}.svg", format="svg")
            plt.close(fig)


def cmd_run(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    exp = build_experiment(cfg)
    if exp["name"] == "smc_compare":
        return _cmd_smc_compare(cfg, exp, out_dir, seed)
    draws, meta = run_sampler(cfg, exp, seed, threads)
    oracle = _load_or_build_oracle(cfg, exp)
    meta.update({"experiment": exp["name"], "seed": seed})
    report = make_report(draws, exp, oracle, meta)
    write_outputs(out_dir, draws, exp["param_names"], report, oracle)
    return 0


def _cmd_smc_compare(cfg: dict, exp: dict, out_dir: Path, seed: int) -> int:
    """Tempered SMC against teleport-augmented RWM on the sum-constrained target."""
    k = exp["k"]
    data = exp["data"]
    n_particles = int(cfg.get("n_particles", 100000))
    stages = int(cfg.get("stages", 20))
    sx, n = float(np.sum(data)), data.size

    def log_lik(mu):
        s = mu.sum(axis=-1)
        return -0.5 * n * s * s + sx * s

    lo, hi = -10.0, 10.0

    def prior_sampler(rng, m):
        return rng.uniform(lo, hi, size=(m, k))

    def log_prior(mu):
        inside = np.all((mu >= lo) & (mu <= hi), axis=-1)
        return np.where(inside, 0.0, -np.inf)

    p = cfg.get("params", {})
    init_mu = np.asarray(p.get("smc_init_mu", [10.0] + [0.0] * (k - 1)), dtype=float)
    init_sd = float(p.get("smc_init_sd", 1.0))

    def init_sampler(rng, m):
        return init_mu + init_sd * rng.standard_normal((m, k))

    def log_init(mu):
        return -0.5 * np.sum(((mu - init_mu) / init_sd) ** 2, axis=-1)

    system = smc_mod.smc_run(log_lik, prior_sampler, log_prior,
                             smc_mod.default_schedule(stages), n_particles, seed,
                             init_sampler=init_sampler, log_init=log_init)
    out_dir.mkdir(parents=True, exist_ok=True)
    smc_mod.export_particles_csv(system, out_dir / "smc_particles.csv",
                                 exp["param_names"])

    ia_cfg = dict(cfg)
    ia_cfg.setdefault("kernel", {"kind": "ia_rwm", "scale": 0.3,
                                 "augment_m": int(cfg.get("augment_m", 100))})
    draws, meta = run_sampler(ia_cfg, {**exp, "name": "conditional_gaussian"},
                              seed + 1, 1)
    report = diag.DiagnosticsReport(meta={
        "experiment": "smc_compare", "seed": seed,
        "smc_sd_mu1": float(np.sqrt(system.weighted_var()[0])),
        "ia_sd_mu1": float(draws[:, 0].std()),
        "ia_bin_occupancy_mu1": diag.occupied_bin_fraction(draws[:, 0], lo, hi, 50),
        **meta})
    report.summary = diag.summary_table(draws, exp["target"])
    write_outputs(out_dir, draws, exp["param_names"], report, None, stem="ia_draws")
    return 0


def cmd_compare(cfg: dict, out_dir: Path, seed: int, threads: int) -> int:
    exp = build_experiment(cfg)
    kernel_list = _require(cfg, "kernels")
    oracle = _load_or_build_oracle(cfg, exp)
    out_dir.mkdir(parents=True, exist_ok=True)
    combined = {}
    for i, kcfg in enumerate(kernel_list):
        label = kcfg.get("label", f"{kcfg.get('kind', 'kernel')}_{i}")
        draws, meta = run_sampler(cfg, exp, seed + i, threads, kcfg=kcfg)
        meta.update({"experiment": exp["name"], "seed": seed + i})
        report = make_report(draws, exp, oracle, meta)
        report.validate()
        np.savetxt(out_dir / f"draws_{label}.csv", draws, delimiter=",",
                   header=",".join(exp["param_names"]), comments="", fmt="%.17g")
        combined[label] = {"tv_to_oracle": report.tv_to_oracle,
                           "ks_to_oracle": report.ks_to_oracle,
                           "ess": report.ess,
                           "mode_fractions": report.mode_fractions,
                           "summary": report.summary}
    with open(out_dir / "report.json", "w") as fh:
        json.dump({"experiment": exp["name"], "seed": seed,
                   "kernels": combined}, fh, indent=2, default=float)
    return 0


def cmd_oracle(cfg: dict, out_dir: Path) -> int:
    exp = build_experiment(cfg)
    axes = [tuple(ax) for ax in _require(cfg, "axes")]
    oracle = tgt.build_grid_oracle(exp["target"], axes)
    out_dir.mkdir(parents=True, exist_ok=True)
    oracle.save(out_dir / cfg.get("oracle_file", "oracle.orc"))
    return 0


def cmd_spectral(cfg: dict, out_dir: Path) -> int:
    g = cfg.get("a_grid", {"start": 0.05, "stop": 0.49, "step": 0.01})
    if isinstance(g, dict):
        grid = np.arange(g["start"], g["stop"] + 1e-12, g["step"])
    else:
        grid = np.asarray(g, dtype=float)
    if np.any(grid <= 0.0) or np.any(grid >= 0.5):
        raise ConfigError("config.a_grid: values must lie in (0, 0.5)")
    rows = spc.gap_curve(grid)
    out_dir.mkdir(parents=True, exist_ok=True)
    spc.write_gap_curve_csv(rows, out_dir / "gap_curve.csv")
    spc.plot_gap_curve(rows, out_dir / "gap_curve.svg")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="iamcmc",
        description="identification-aware MCMC experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "spectral", "oracle", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None and args.command in ("run", "compare"):
            raise ConfigError("config.seed: a seed is required")
        out_dir = Path(args.out)
        if args.command == "run":
            return cmd_run(cfg, out_dir, int(seed), args.threads)
        if args.command == "compare":
            return cmd_compare(cfg, out_dir, int(seed), args.threads)
        if args.command == "oracle":
            return cmd_oracle(cfg, out_dir)
        return cmd_spectral(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
