"""Unified command-line entry point.

Subcommands: spectrum, quench, steady, positivep, meanfield, fit, verify,
figure.  Runs are configured by a JSON file with model / solver / sde / fit
sections plus key=value overrides; every run writes its data as CSV plus a
JSON manifest, and exits 0 on success, 2 on configuration errors, 3 on
numerical failures, 4 on verification failures.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, meanfield, positivep, spectral, steady
from .errors import ConfigError, EdgeburstError
from .io import RunManifest, check_manifest, read_csv, write_csv
from .model import ModelParams, damping_matrix, gain_matrix

CONFIG_SECTIONS = ("model", "solver", "sde", "fit")

SOLVER_DEFAULTS = {
    "epsrel": 1e-8,          # frequency-quadrature relative tolerance
    "route": "integral",     # integral | lyapunov | evolve
    "nk": 2001,              # momentum grid for spectra
    "quench_t_max": 4000.0,
    "quench_dt": None,
    "norm_tol": 1e-6,
    "resid_tol": 1e-8,
    "steady_tol": 1e-8,
    "evolve_t_max": 2000.0,
    "mf_t_max": 5000.0,
    "record_times": [],
    "init_seed": None,       # fig1d-style random initial occupation
    "correspondence": "auto",
}

FIT_DEFAULTS = {
    "x0_values": [],
    "d_near": 5,
    "x_min": 10,
    "min_points": 6,
    "burst_factor": 3.0,
}


def load_presets() -> dict:
    with resources.files("edgeburst").joinpath("presets.json").open("r") as fh:
        return json.load(fh)


def load_config(path: str | None) -> dict:
    cfg = {s: {} for s in CONFIG_SECTIONS}
    if path:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - set(CONFIG_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        for s in CONFIG_SECTIONS:
            sec = data.get(s, {})
            if not isinstance(sec, dict):
                raise ConfigError(f"config section '{s}' must be an object")
            cfg[s].update(sec)
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """key=value pairs; bare keys address the model section, dotted paths any."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like key=value")
        key, _, raw = item.partition("=")
        value = _parse_value(raw)
        if "." in key:
            section, _, field = key.partition(".")
            if section not in CONFIG_SECTIONS:
                raise ConfigError(f"unknown config section '{section}'")
            cfg[section][field] = value
        else:
            cfg["model"][key] = value
    return cfg


def merge_preset(cfg: dict, preset: dict) -> dict:
    for s in CONFIG_SECTIONS:
        merged = dict(preset.get(s, {}))
        merged.update(cfg[s])        # explicit config/overrides win
        cfg[s] = merged
    return cfg


def _model(cfg) -> ModelParams:
    if not cfg["model"]:
        raise ConfigError("no model parameters given (config file or overrides)")
    return ModelParams.from_dict(cfg["model"])


def _solver(cfg) -> dict:
    out = dict(SOLVER_DEFAULTS)
    unknown = set(cfg["solver"]) - set(SOLVER_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown solver option(s): {sorted(unknown)}")
    out.update(cfg["solver"])
    return out

def _fit_options(cfg) -> dict:
    out = dict(FIT_DEFAULTS)
    unknown = set(cfg["fit"]) - set(FIT_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown fit option(s): {sorted(unknown)}")
    out.update(cfg["fit"])
    return out


def _cells(L: int) -> np.ndarray:
    return np.arange(1, L + 1)


# ---------------------------------------------------------------- commands

def cmd_spectrum(cfg, outdir: Path, man: RunManifest) -> dict:
    params = _model(cfg)
    sol = _solver(cfg)
    res = spectral.pbc_spectrum(params, nk=int(sol["nk"]))
    write_csv(man.add_output(outdir / "spectrum_pbc.csv"), {
        "k": res.k,
        "re_lambda1": res.eigenvalues[:, 0].real,
        "im_lambda1": res.eigenvalues[:, 0].imag,
        "re_lambda2": res.eigenvalues[:, 1].real,
        "im_lambda2": res.eigenvalues[:, 1].imag,
    })
    obc = np.linalg.eigvals(damping_matrix(params))
    order = np.argsort(obc.real)
    write_csv(man.add_output(outdir / "spectrum_obc.csv"), {
        "re_lambda": obc[order].real, "im_lambda": obc[order].imag,
    })
    summary = {"max_re": res.max_real, "gapless": res.gapless,
               "omega0": None, "K": None, "delta_gamma_c": None}
    if 0 < params.t1 < params.t2:
        exp = spectral.expansion_coefficients(params)
        summary["omega0"] = exp["omega0"]
        summary["K"] = exp["K"]
        summary["delta_gamma_c"] = spectral.critical_imbalance(params)
    scan = spectral.beta_scan(params)
    write_csv(man.add_output(outdir / "beta_scan.csv"), {
        "omega": scan["omega"], "abs_beta_L": scan["abs_beta_L"],
        "abs_beta_R": scan["abs_beta_R"],
    })
    summary["gbz_radius"] = spectral.gbz_radius(params)
    return summary


def _emit_profile(outdir, man, name, values, extra=None):
    cols = {"x": _cells(len(values)), "value": values}
    if extra:
        cols.update(extra)
    return write_csv(man.add_output(outdir / name), cols)


def cmd_quench(cfg, outdir: Path, man: RunManifest) -> dict:
    params = _model(cfg)
    sol = _solver(cfg)
    fit = _fit_options(cfg)
    x0s = list(fit["x0_values"]) or [params.x0]
    profiles = {}
    summary = {"runs": {}}
    for x0 in x0s:
        p = params.replace(x0=int(x0))
        prof = steady.quench_loss(p, t_max=sol["quench_t_max"], dt=sol["quench_dt"],
                                  norm_tol=sol["norm_tol"],
                                  record_times=sol["record_times"])
        profiles[int(x0)] = prof.values
        _emit_profile(outdir, man, f"loss_x0{int(x0):04d}.csv", prof.values)
        for t, snap in prof.history:
            _emit_profile(outdir, man, f"loss_x0{int(x0):04d}_t{t:.1f}.csv", snap)
        summary["runs"][str(x0)] = {"total": prof.total, "norm2": prof.norm2,
                                    "t_end": prof.time,
                                    "edge_ratio": float(prof.values[0] / prof.values[1])}
    if len(x0s) > 1:
        d, v = analysis.edge_series(profiles)
        write_csv(man.add_output(outdir / "loss_edge_series.csv"),
                  {"x0_minus_1": d, "edge_value": v})
    return summary


def _steady_profile(params: ModelParams, sol: dict):
    """Returns (values, diagnostics, [(t, snapshot_values), ...])."""
    route = sol["route"]
    if route == "integral":
        prof = steady.steady_density_integral(params, epsrel=sol["epsrel"])
        return prof.values, {"quad_error": prof.quad_error}, []
    if route == "lyapunov":
        ss = steady.steady_state(params, resid_tol=sol["resid_tol"])
        return ss.n_B, {"residual": ss.residual}, []
    if route == "evolve":
        X = damping_matrix(params)
        Mg = gain_matrix(params)
        delta0 = None
        if sol["init_seed"] is not None:
            rng = np.random.default_rng(int(sol["init_seed"]))
            delta0 = np.zeros((params.dim, params.dim), dtype=complex)
            occ = rng.integers(0, 2, size=params.L)
            delta0[::2, ::2][np.diag_indices(params.L)] = occ
        hist = steady.evolve_correlator(X, Mg, delta0=delta0,
                                        t_max=sol["evolve_t_max"],
                                        steady_tol=sol["steady_tol"],
                                        record_times=sol["record_times"])
        final = hist[-1]
        snaps = [(st.time, st.n_B) for st in hist[:-1]]
        return final.n_B, {"residual": final.residual, "t_end": final.time}, snaps
    raise ConfigError(f"unknown steady route '{route}'")


def cmd_steady(cfg, outdir: Path, man: RunManifest) -> dict:
    params = _model(cfg)
    sol = _solver(cfg)
    fit = _fit_options(cfg)
    x0s = [int(v) for v in fit["x0_values"]] or [params.x0]
    summary = {"route": sol["route"], "runs": {}}

    if sol["route"] == "integral" and len(x0s) > 1:
        sweep = steady.density_profile_sweep(params, x0s, epsrel=sol["epsrel"])
        profiles = {x0: sweep[x0].values for x0 in x0s}
        diags = {x0: {"quad_error": sweep[x0].quad_error} for x0 in x0s}
    else:
        profiles, diags = {}, {}
        for x0 in x0s:
            vals, d, snaps = _steady_profile(params.replace(x0=x0), sol)
            profiles[x0], diags[x0] = vals, d
            for t, snap in snaps:
                _emit_profile(outdir, man, f"density_x0{x0:04d}_t{t:.1f}.csv", snap)

    for x0 in x0s:
        _emit_profile(outdir, man, f"density_x0{x0:04d}.csv", profiles[x0])
        summary["runs"][str(x0)] = {"total": float(profiles[x0].sum()), **diags[x0]}

    if len(x0s) > 1:
        d, v = analysis.edge_series(profiles)
        write_csv(man.add_output(outdir / "density_edge_series.csv"),
                  {"x0_minus_1": d, "edge_value": v})

    if _want_correspondence(sol, params) and params.delta_gamma == 0.0:
        x0c = params.x0 if params.x0 in profiles else x0s[0]
        prof = steady.quench_loss(params.replace(x0=x0c), norm_tol=1e-8)
        ref = (params.gamma_g / params.gamma1) * prof.values
        err = float(np.max(np.abs(profiles[x0c] - ref) / np.maximum(ref, 1e-300)))
        summary["correspondence_error"] = err
    return summary


def _want_correspondence(sol, params: ModelParams) -> bool:
    mode = sol["correspondence"]
    if mode == "auto":
        return (params.delta_gamma == 0.0 and params.gamma1 > 0
                and params.gamma_g > 0 and params.L <= 120)
    return bool(mode)


def cmd_positivep(cfg, outdir: Path, man: RunManifest) -> dict:
    params = _model(cfg)
    fit = _fit_options(cfg)
    sde_cfg = positivep.SdeConfig(**cfg["sde"]) if cfg["sde"] else positivep.SdeConfig()
    x0s = [int(v) for v in fit["x0_values"]] or [params.x0]
    man.seed = sde_cfg.base_seed
    summary = {"generator": positivep.GENERATOR_NAME, "dt": sde_cfg.dt,
               "n_traj": sde_cfg.n_traj, "runs": {}}
    for x0 in x0s:
        t0 = time.time()
        acc = positivep.run_ensemble(params.replace(x0=x0), sde_cfg)
        wall = time.time() - t0
        records = {}
        for t, a in sorted(acc.items()):
            write_csv(man.add_output(outdir / f"positivep_x0{x0:04d}_t{t:g}.csv"), {
                "x": _cells(params.L),
                "n_B": a.n_B, "stderr_n": a.n_B_stderr,
                "C_B": a.C_B, "stderr_C": a.C_B_stderr,
                "im_n_B": a.n_B_imag, "stderr_im_n": a.n_B_imag_stderr,
            })
            sc, sc_se = a.sum_C
            sn, sn_se = a.sum_n
            records[str(t)] = {
                "count": a.count, "discard_fraction": a.discard_fraction,
                "sum_C": sc, "sum_C_stderr": sc_se,
                "sum_n": sn, "sum_n_stderr": sn_se,
            }
        summary["runs"][str(x0)] = {"wall_time": wall, "records": records}
    man.diagnostics.update(summary)
    return summary


def cmd_meanfield(cfg, outdir: Path, man: RunManifest) -> dict:
    params = _model(cfg)
    sol = _solver(cfg)
    fit = _fit_options(cfg)
    x0s = [int(v) for v in fit["x0_values"]] or [params.x0]
    profiles = {}
    summary = {"runs": {}}
    for x0 in x0s:
        state = meanfield.evolve_meanfield(params.replace(x0=x0),
                                           t_max=sol["mf_t_max"],
                                           res_tol=sol["steady_tol"])
        nb = state.n_B
        profiles[x0] = nb
        _emit_profile(outdir, man, f"meanfield_x0{x0:04d}.csv", nb,
                      extra={"value_sq": nb**2})
        summary["runs"][str(x0)] = {
            "sum_sq": float(np.sum(nb**2)),
            "sum_sq_target": params.gamma_g / (2 * params.gamma2),
            "residual": state.residual, "t_end": state.time,
        }
    if len(x0s) > 1:
        d, v = analysis.edge_series(profiles)
        write_csv(man.add_output(outdir / "meanfield_edge_series.csv"),
                  {"x0_minus_1": d, "edge_value": v})
    return summary


def _profiles_from_files(paths) -> tuple[dict, dict | None]:
    """Collect {x0: values} from sweep CSVs named ..._x0<NUM>[...].csv."""
    profiles = {}
    sigmas = {}
    for p in paths:
        m = re.search(r"_x0(\d+)", Path(p).stem)
        if not m:
            raise ConfigError(f"cannot infer x0 from file name '{Path(p).name}' "
                              "(expected ..._x0<NUM>.csv)")
        x0 = int(m.group(1))
        data = read_csv(p)
        cols = list(data)
        profiles[x0] = data[cols[1]]
        if "stderr_n" in data:
            sigmas[x0] = data["stderr_n"]
    return profiles, (sigmas if sigmas else None)


def cmd_fit(cfg, outdir: Path, man: RunManifest, inputs) -> dict:
    if not inputs:
        raise ConfigError("fit needs at least one profile CSV")
    fit = _fit_options(cfg)
    profiles, sigmas = _profiles_from_files(inputs)
    report = analysis.scaling_report(profiles, sigmas=sigmas,
                                     d_near=int(fit["d_near"]),
                                     x_min=int(fit["x_min"]),
                                     min_points=int(fit["min_points"]))
    x0s = sorted(report["bulk_fits"])
    write_csv(man.add_output(outdir / "bulk_exponents.csv"), {
        "x0": np.array(x0s, dtype=float),
        "alpha_b": np.array([report["bulk_fits"][x].exponent for x in x0s]),
        "stderr": np.array([report["bulk_fits"][x].stderr for x in x0s]),
    })
    d, v = analysis.edge_series(profiles)
    write_csv(man.add_output(outdir / "edge_series.csv"),
              {"x0_minus_1": d, "edge_value": v})
    summary = {
        "alpha_b": report["alpha_b"],
        "alpha_e": report["alpha_e"],
        "difference": report["difference"],
        "edge_stderr": report["edge_fit"].stderr,
        "skipped_x0": report["skipped_x0"],
        "edge_burst": {str(x0): analysis.has_edge_burst(
            profiles[x0], x0, sigma=None if sigmas is None else sigmas.get(x0),
            factor=float(fit["burst_factor"]), d_near=int(fit["d_near"]),
            x_min=int(fit["x_min"]), min_points=int(fit["min_points"]))
            for x0 in x0s},
    }
    return summary


def cmd_figure(cfg, outdir: Path, man: RunManifest, name: str, profile: str) -> dict:
    presets = load_presets()
    key = "fig3_ci" if (name == "fig3" and profile == "ci") else name
    if name == "figS2":
        summary = {}
        for sub in ("figS2a", "figS2b"):
            sub_cfg = merge_preset({s: dict(cfg[s]) for s in CONFIG_SECTIONS},
                                   presets[sub])
            subdir = outdir / sub
            subdir.mkdir(parents=True, exist_ok=True)
            summary[sub] = cmd_steady(sub_cfg, subdir, man)
            summary[sub]["fit"] = _sweep_fit_summary(sub_cfg, subdir)
        return summary
    if key not in presets:
        raise ConfigError(f"unknown figure '{name}'")
    cfg = merge_preset(cfg, presets[key])

    if name == "fig1c":
        return cmd_quench(cfg, outdir, man)
    if name == "fig1d":
        cfg["solver"].setdefault("route", "evolve")
        cfg["solver"].setdefault("init_seed", 7)
        return cmd_steady(cfg, outdir, man)
    if name == "fig2":
        out = {"spectrum": cmd_spectrum(cfg, outdir, man),
               "steady": cmd_steady(cfg, outdir, man)}
        out["fit"] = _sweep_fit_summary(cfg, outdir)
        return out
    if name == "figS1":
        return cmd_spectrum(cfg, outdir, man)
    if name == "fig3":
        out = {"positivep": cmd_positivep(cfg, outdir, man)}
        mf_cfg = {s: dict(cfg[s]) for s in CONFIG_SECTIONS}
        out["meanfield"] = cmd_meanfield(mf_cfg, outdir, man)
        return out
    raise ConfigError(f"unknown figure '{name}'")


def _sweep_fit_summary(cfg, outdir: Path) -> dict:
    fit = _fit_options(cfg)
    paths = sorted(outdir.glob("density_x0*.csv"))
    profiles, _ = _profiles_from_files(paths)
    report = analysis.scaling_report(profiles, d_near=int(fit["d_near"]),
                                     x_min=int(fit["x_min"]),
                                     min_points=int(fit["min_points"]))
    return {"alpha_b": report["alpha_b"], "alpha_e": report["alpha_e"],
            "difference": report["difference"]}


# ---------------------------------------------------------------- verify

def _verify_checks() -> list[tuple[str, bool, str]]:
    """Fast invariant battery over every module; each entry is
    (name, passed, detail)."""
    from .model import bloch_hamiltonian, real_space_hamiltonian, stability_check
    from .spectral import (beta_roots, expansion_coefficients,
                           gap_closing_frequency, gbz_radius, onsite_greens_AA)

    checks = []
    rng = np.random.default_rng(11)

    p = ModelParams(t1=0.8, t2=1.0, gamma1=0.8, L=30, x0=25,
                    gamma_g=0.8, gamma_l=0.8)
    H0 = bloch_hamiltonian(p, 0.0)
    checks.append(("bloch_k0_matrix",
                   np.allclose(H0, [[0, 1.8], [1.8, -0.8j]], atol=1e-14), ""))

    pb = p.replace(bc="PBC", L=12, x0=6)
    Hr = damping_matrix(pb)
    ev_r = np.sort(np.linalg.eigvals(Hr).round(9))
    ev_b = np.sort(np.concatenate(
        [np.linalg.eigvals(spectral.bloch_damping(pb, 2 * np.pi * n / 12))
         for n in range(12)]).round(9))
    d = np.abs(ev_b[:, None] - ev_r[None, :]).min(axis=1).max()
    checks.append(("pbc_block_circulant_spectrum", d < 1e-9, f"max dist {d:.1e}"))

    X = damping_matrix(p)
    dH = np.abs(X - 1j * real_space_hamiltonian(p).conj()).max()
    checks.append(("balanced_damping_is_iHstar", dH < 1e-14, f"{dH:.1e}"))

    pg = p.replace(t1=0.5)
    r = gbz_radius(pg)
    prod_err = 0.0
    for w in rng.uniform(-4, 4, size=20):
        bl, br, _ = beta_roots(pg, w)
        prod_err = max(prod_err, abs(abs(bl * br) - r * r))
    checks.append(("root_product_identity", prod_err < 1e-10, f"{prod_err:.1e}"))

    w0 = gap_closing_frequency(pg)
    bl, _, _ = beta_roots(pg, w0)
    checks.append(("beta_L_unit_modulus_at_w0", abs(abs(bl) - 1) < 1e-10, ""))

    exp = expansion_coefficients(pg)
    dw = 1e-3
    blp, _, _ = beta_roots(pg, w0 + dw)
    K_fd = np.log(abs(blp)) / dw**2
    rel = abs(K_fd - exp["K"]) / exp["K"]
    checks.append(("K_matches_finite_difference", rel < 1e-3, f"rel {rel:.1e}"))

    g = onsite_greens_AA(pg, w0)
    target = (pg.t1 + pg.gamma1) / (pg.t1 * (2 * pg.t1 + pg.gamma1))
    checks.append(("greens_AA_at_w0", abs(g - target) < 1e-10, ""))

    prof = steady.quench_loss(p.replace(gamma_g=0, gamma_l=0), norm_tol=1e-8)
    checks.append(("quench_normalization", abs(prof.total - 1) < 1e-6,
                   f"sum {prof.total:.8f}"))

    ss = steady.steady_state(p)
    rel = np.max(np.abs(ss.n_B - prof.values) / prof.values)
    checks.append(("dynamical_steady_correspondence", rel < 1e-4, f"rel {rel:.1e}"))

    den = steady.steady_density_integral(p)
    rel = np.max(np.abs(den.values - ss.n_B) / np.maximum(ss.n_B, 1e-300))
    checks.append(("integral_vs_lyapunov", rel < 1e-5, f"rel {rel:.1e}"))

    p2 = ModelParams(t1=0.8, t2=1.0, gamma2=0.01, gamma_g=2.0, gamma_l=2.0,
                     L=4, x0=2)
    ok = True
    for _ in range(20):
        st = positivep.PhaseSpaceState(
            rng.normal(size=8) + 1j * rng.normal(size=8),
            rng.normal(size=8) + 1j * rng.normal(size=8))
        B = positivep.noise_matrix(p2, st)
        D = positivep.diffusion_matrix(p2, st)
        ok &= np.abs(B @ B.T - D).max() < 1e-12
    checks.append(("noise_factorization_BBt_eq_D", bool(ok), ""))

    worst = -np.inf
    for _ in range(20):
        t2 = rng.uniform(0.2, 2.0)
        pf = ModelParams(t1=rng.uniform(0.01, 1.0) * t2, t2=t2,
                         gamma1=rng.uniform(0, 2), gamma_g=rng.uniform(0, 2),
                         gamma_l=rng.uniform(0, 2), L=int(rng.integers(6, 20)),
                         x0=3, statistics="Fermionic")
        worst = max(worst, stability_check(damping_matrix(pf)).max_real)
    checks.append(("fermionic_damping_stable", worst <= 1e-9, f"max Re {worst:.1e}"))

    exps = meanfield.meanfield_exponents(pg)
    checks.append(("meanfield_exponents",
                   exps == {"bulk": 0.6, "edge": 0.1, "bulk_sq": 1.2, "edge_sq": 0.2}, ""))

    dd = np.arange(2.0, 42.0)
    fit = analysis.fit_power_law(dd, 7.0 * dd**-1.5)
    checks.append(("fit_exact_power_law",
                   abs(fit.exponent - 1.5) < 1e-12 and abs(fit.r_squared - 1) < 1e-12, ""))
    return checks


def cmd_verify(cfg, outdir: Path, man: RunManifest) -> tuple[dict, bool]:
    checks = _verify_checks()
    all_ok = all(ok for _, ok, _ in checks)
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name} {detail}".rstrip())

    stale = []
    for mpath in sorted(outdir.glob("**/*manifest.json")):
        missing = check_manifest(mpath)
        if missing:
            stale.append({"manifest": str(mpath), "missing": missing})
            all_ok = False
            print(f"[FAIL] manifest {mpath.name}: missing {missing}")
        else:
            print(f"[PASS] manifest {mpath.name}")
    summary = {"checks": {n: bool(ok) for n, ok, _ in checks},
               "stale_manifests": stale}
    return summary, bool(all_ok)


# ---------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgeburst",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="config override; bare keys hit the model section")
        sp.add_argument("--out", default=None,
                        help="output directory (default $EDGEBURST_OUT or cwd)")
        sp.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads")

    for name in ("spectrum", "quench", "steady", "positivep", "meanfield", "verify"):
        common(sub.add_parser(name))
    fp = sub.add_parser("fit")
    common(fp)
    fp.add_argument("inputs", nargs="*", help="profile CSVs from a sweep")
    gp = sub.add_parser("figure")
    common(gp)
    gp.add_argument("name", choices=["fig1c", "fig1d", "fig2", "fig3",
                                     "figS1", "figS2"])
    gp.add_argument("--profile", choices=["full", "ci"], default="ci",
                    help="fig3 scale (full matches the reference run; ci is fast)")
    return ap


def _limit_threads(n: int | None):
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads(args.threads)
    outdir = Path(args.out or os.environ.get("EDGEBURST_OUT", "."))
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        cfg = apply_overrides(load_config(args.config), args.override)
        man = RunManifest(command=args.command, config=cfg,
                          code_version=__version__)
        t0 = time.time()
        verified_ok = True
        if args.command == "spectrum":
            summary = cmd_spectrum(cfg, outdir, man)
        elif args.command == "quench":
            summary = cmd_quench(cfg, outdir, man)
        elif args.command == "steady":
            summary = cmd_steady(cfg, outdir, man)
        elif args.command == "positivep":
            summary = cmd_positivep(cfg, outdir, man)
        elif args.command == "meanfield":
            summary = cmd_meanfield(cfg, outdir, man)
        elif args.command == "fit":
            summary = cmd_fit(cfg, outdir, man, args.inputs)
        elif args.command == "verify":
            summary, verified_ok = cmd_verify(cfg, outdir, man)
        elif args.command == "figure":
            summary = cmd_figure(cfg, outdir, man, args.name, args.profile)
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command}")
        man.config = cfg
        man.wall_time = time.time() - t0
        man.diagnostics.setdefault("summary", summary)
        man_name = f"{args.command}_manifest.json"
        if args.command == "figure":
            man_name = f"{args.name}_manifest.json"
        man.write(outdir / man_name)
        print(json.dumps(summary, indent=2, default=_json_fallback))
        return 0 if verified_ok else 4
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        _emit_error(exc)
        return 2
    except EdgeburstError as exc:
        _emit_error(exc)
        return 3


def _json_fallback(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dict__"):
        return {k: v for k, v in vars(obj).items() if not k.startswith("_")}
    return str(obj)


def _emit_error(exc: Exception):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
