"""Experiment orchestration: build a model, run one task, write CSVs and a manifest."""
from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import spinboson as sb
from . import vsystem as vs
from .config import RunConfig
from .errors import ConfigError, ValidationError
from .ness import NULLITY_RTOL, RESIDUAL_RTOL, solve_ness
from .operators import (HERMITIAN_TOL, POSITIVITY_TOL, TRACE_TOL, HilbertSpace, Operator, SuperOperator,
                        assemble_liouvillian, lindblad_pair, projector)
from .partition import PARTITION_TOL, Partition, liouville_partition
from .rates import RANK_RTOL, ROUTES, SOLVE_RTOL, balance_report, rate_matrix, route_agreement

log = logging.getLogger(__name__)

TOLERANCES = {
    "hermitian": HERMITIAN_TOL, "trace": TRACE_TOL, "positivity": POSITIVITY_TOL,
    "partition": PARTITION_TOL, "nullity_rtol": NULLITY_RTOL, "ness_residual_rtol": RESIDUAL_RTOL,
    "rank_rtol": RANK_RTOL, "solve_rtol": SOLVE_RTOL, "fit_rtol": dyn.FIT_RTOL,
    "settle_tol": dyn.SETTLE_TOL,
}


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    params: Any
    L: SuperOperator
    partitions: dict[str, Partition]
    default_partition: str
    workspace: sb.SBWorkspace | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def space(self) -> HilbertSpace:
        return self.L.space


def vsystem_params(values: dict[str, Any]) -> vs.VParams:
    plain = {k: float(v) for k, v in values.items() if k not in ("Delta", "Gamma")}
    p = vs.VParams(**plain)
    if "Delta" in values:
        p = p.replace(eps_2=p.eps_1 + float(values["Delta"]))
    if "Gamma" in values:
        g = float(values["Gamma"])
        p = p.replace(Gamma_C2=g, Gamma_Df=g)
    return p


def spinboson_params(values: dict[str, Any], full_scale: bool) -> sb.SBParams:
    values = {k: (int(v) if k == "n_basis" else v) for k, v in values.items()}
    return sb.SBParams.full_scale(**values) if full_scale else sb.SBParams(**values)


def load_custom(path: str) -> tuple[SuperOperator, HilbertSpace]:
    """Liouvillian from an ``.npz`` with ``H``, ``jumps``, ``rates`` and optional ``occupations``, ``labels``."""
    try:
        data = np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise ConfigError(f"custom model file not found: {path}") from None
    for key in ("H", "jumps", "rates"):
        if key not in data:
            raise ConfigError(f"custom model {path} lacks array {key!r}")
    H = np.asarray(data["H"])
    d = H.shape[0]
    jumps = np.asarray(data["jumps"]).reshape(-1, d, d)
    rates = np.asarray(data["rates"], dtype=float).reshape(-1)
    occ = np.asarray(data["occupations"], dtype=float).reshape(-1) if "occupations" in data else np.zeros(rates.size)
    if not (jumps.shape[0] == rates.size == occ.size):
        raise ConfigError("jumps, rates and occupations disagree in length")
    space = (HilbertSpace.from_labels([str(s) for s in data["labels"]]) if "labels" in data
             else HilbertSpace.numbered(d))
    diss = [lindblad_pair(Operator(space, S), g, n) for S, g, n in zip(jumps, rates, occ)]
    return assemble_liouvillian(Operator(space, H), diss), space


def build_model(cfg: RunConfig, overrides: dict[str, Any] | None = None) -> Model:
    values = {**cfg.params, **(overrides or {})}
    if cfg.model == "vsystem":
        p = vsystem_params(values)
        m = vs.build(p)
        return Model("vsystem", p, m.L, {"standard": m.standard, "grouped": m.grouped}, "standard")
    if cfg.model == "spinboson":
        p = spinboson_params(values, cfg.full_scale)
        ws = sb.build_truncated(p)
        meta = {"truncated_dim": ws.dim, "q_x": ws.q_x, "E_rad": ws.E_rad, "n_rad": ws.n_rad,
                "n_ph": list(ws.n_ph), "e_cut": p.cutoff}
        return Model("spinboson", p, ws.L, dict(ws.partitions), "left-right", ws, meta)
    L, space = load_custom(cfg.custom["path"])
    return Model("custom-matrices", None, L, {"labels": Partition.from_labels(space)}, "labels")


def resolve_partition(model: Model, spec: dict[str, Any]) -> Partition:
    if "groups" in spec:
        groups = [list(map(str, g)) for g in spec["groups"]]
        if "names" in spec:
            names = [str(n) for n in spec["names"]]
            if len(names) != len(groups):
                raise ConfigError("partition.names and partition.groups differ in length")
            return Partition.from_groups(model.space, dict(zip(names, groups)))
        return Partition.from_groups(model.space, groups)
    name = spec.get("builtin", model.default_partition)
    if name not in model.partitions:
        raise ConfigError(f"unknown partition {name!r} for {model.name}; choose from {sorted(model.partitions)}")
    return model.partitions[name]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def _other_route(route: str) -> str:
    if route not in ROUTES:
        raise ConfigError(f"unknown route {route!r}; expected one of {ROUTES}")
    return ROUTES[1 - ROUTES.index(route)]


def _rate_entries(k) -> dict[str, float]:
    return {f"k_{a}_{b}": float(k.k[i, j]) for i, a in enumerate(k.names) for j, b in enumerate(k.names)}


def _analytic(model: Model, partition: Partition, rho_s: Operator) -> dict[str, float]:
    if model.name != "vsystem":
        return {}
    p = model.params
    if partition is model.partitions["standard"]:
        k21, k12 = vs.analytic_rates_standard(p)
        return {"k_2_1": k21, "k_1_2": k12, "beta": vs.derived(p).beta}
    if partition is model.partitions["grouped"]:
        r = vs.derived(p, rho_s).r
        k2A, kA2 = vs.analytic_rates_grouped(p, r)
        return {"k_2_A": k2A, "k_A_2": kA2, "r": r, "beta": vs.derived(p).beta}
    return {}


def task_ness(cfg, model, partition, out: Path, manifest) -> list[Path]:
    res = solve_ness(model.L)
    lp = liouville_partition(partition, res.rho_s)
    manifest["ness"] = {"residual": res.residual, "null_dim": res.null_dim, "min_eig": res.min_eig}
    rho = res.rho_s.matrix
    labels = model.space.labels
    return [
        write_csv(out / "populations.csv", ["component", "population"],
                  zip(partition.names, lp.steady_populations)),
        write_csv(out / "density.csv", ["row", "col", "re", "im"],
                  ((labels[i], labels[j], rho[i, j].real, rho[i, j].imag)
                   for i in range(len(labels)) for j in range(len(labels)))),
    ]


def task_rates(cfg, model, partition, out: Path, manifest) -> list[Path]:
    res = solve_ness(model.L)
    lp = liouville_partition(partition, res.rho_s)
    k = rate_matrix(model.L, lp, cfg.route)
    alt = _other_route(cfg.route)
    k_alt = rate_matrix(model.L, lp, alt)
    bal = balance_report(k, lp.steady_populations)
    manifest["ness"] = {"residual": res.residual, "null_dim": res.null_dim, "min_eig": res.min_eig}
    manifest["rates"] = {
        "route": cfg.route, "check_route": alt, "route_agreement": route_agreement(k, k_alt),
        "imag_residue": k.imag_residue, "kp_inf": bal.kp_inf,
        "max_column_sum": float(np.max(np.abs(bal.column_sums))),
        "eigenvalues": k.eigenvalues(), "analytic": _analytic(model, partition, res.rho_s),
    }
    n = partition.names
    rows = ((n[i], n[j], k.k[i, j], k_alt.k[i, j]) for i in range(len(n)) for j in range(len(n)))
    return [
        write_csv(out / "rates.csv", ["to", "from", "rate", f"rate_{alt}"], rows),
        write_csv(out / "populations.csv", ["component", "population"], zip(n, lp.steady_populations)),
    ]


def _initial_state(cfg: RunConfig, model: Model, partition: Partition, rho_s: Operator, manifest) -> Operator:
    d = cfg.dynamics
    kind = d.get("initial", "vertical-excitation" if model.name == "spinboson" else "perturbed")
    if kind == "vertical-excitation":
        if model.workspace is None:
            raise ConfigError("vertical-excitation initial state needs the spinboson model")
        ve = sb.vertical_excitation(model.workspace, float(d.get("alpha_dip", 0.45)), rho_s)
        manifest["vertical_excitation"] = {
            "excitation_energy": ve.excitation_energy, "promoted_population": ve.promoted_population,
            "energy_per_promoted": ve.energy_per_promoted, "n_terms": ve.n_terms}
        return ve.rho
    if kind != "perturbed":
        raise ConfigError(f"unknown initial state {kind!r}; use 'perturbed' or 'vertical-excitation'")
    default = {"vsystem": "1", "spinboson": "R"}.get(model.name, model.space.labels[0])
    target = str(d.get("target", default))
    if target in partition.names:
        P = partition.projectors[partition.index(target)]
    elif target in model.space.labels:
        P = projector(model.space, [target])
    else:
        raise ConfigError(f"dynamics.target {target!r} is neither a component nor a basis label")
    return dyn.perturbed_state(rho_s, P, float(d.get("eta", 0.5)))


def _trajectory_rows(traj, k):
    m1, m2 = dyn.m_split(traj, k)
    for i, t in enumerate(traj.times):
        yield [t, *traj.p[:, i], *traj.pdot[:, i], *m1[:, i], *m2[:, i]]


def _trajectory_header(names) -> list[str]:
    return ["t"] + [f"{pre}_{n}" for pre in ("p", "pdot", "m1", "m2") for n in names]


def _dynamics_setup(cfg, model, partition, manifest):
    if model.workspace is not None and cfg.dynamics.get("initial", "vertical-excitation") == "vertical-excitation":
        if model.params.Gamma_rad != 0:
            manifest["forced"] = {"spinboson.Gamma_rad": 0.0}
            model = build_model(cfg, {"Gamma_rad": 0.0})
            partition = model.partitions[partition_name(model, partition)]
    res = solve_ness(model.L)
    lp = liouville_partition(partition, res.rho_s)
    k = rate_matrix(model.L, lp, cfg.route)
    rho0 = _initial_state(cfg, model, partition, res.rho_s, manifest)
    return model, lp, k, rho0


def partition_name(model: Model, partition: Partition) -> str:
    for name, p in model.partitions.items():
        if p.names == partition.names:
            return name
    raise ConfigError("custom partitions cannot be rebuilt for the dark model")


def task_dynamics(cfg, model, partition, out: Path, manifest) -> list[Path]:
    model, lp, k, rho0 = _dynamics_setup(cfg, model, partition, manifest)
    ts = dyn.timescales(k, model.L, lp)
    t_final = float(cfg.dynamics.get("t_final", float(cfg.dynamics.get("tf_factor", 5.0)) * ts.t1))
    dt = float(cfg.dynamics.get("dt", t_final / 2000))
    times = np.arange(0.0, t_final + 0.5 * dt, dt)
    traj = dyn.propagate(model.L, rho0, times, lp)
    report = dyn.TimescaleReport(ts.t1, ts.t2, ts.kappa, dyn.settling_time(traj, lp.steady_populations))
    manifest["dynamics"] = {"timescales": report, "markovian": report.markovian, "method": traj.method,
                            "n_times": int(times.size), "dt": dt, "t_final": t_final}
    if model.workspace is not None and "R" in lp.partition.names and "vertical_excitation" in manifest:
        try:
            fit = sb.fit_transfer_rate(times, traj.p[lp.partition.index("R")])
            manifest["dynamics"]["transfer_fit"] = fit
        except Exception as exc:  # the fit is a summary; the trajectory is still written
            log.warning("transfer-rate fit failed: %s", exc)
    return [write_csv(out / "dynamics.csv", _trajectory_header(lp.partition.names), _trajectory_rows(traj, k))]


def task_markov(cfg, model, partition, out: Path, manifest) -> list[Path]:
    model, lp, k, rho0 = _dynamics_setup(cfg, model, partition, manifest)
    rep = dyn.markov_analysis(model.L, lp, k, rho0, float(cfg.dynamics["dt"]),
                              float(cfg.dynamics.get("tf_factor", 5.0)))
    report = {
        "relative_error": rep.relative_error, "t_final": rep.t_final,
        "timescales": rep.timescales, "markovian": rep.timescales.markovian,
        "k": k.k, "k_eigenvalues": k.eigenvalues(),
        "k_fit": rep.fit.k, "k_fit_eigenvalues": rep.fit.eigenvalues(),
        "k_fit_resolved_eigenvalues": rep.fit.resolved_eigenvalues(),
        "k_fit_slow_eigenvalue": rep.fit.slow_eigenvalue(),
        "gram_cond": rep.fit.gram_cond, "gram_rank": rep.fit.rank,
    }
    manifest["markov"] = report
    path = out / "markov.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    traj = rep.trajectory
    return [write_csv(out / "dynamics.csv", _trajectory_header(traj.names), _trajectory_rows(traj, k)), path]


def sweep_point(cfg: RunConfig, point: dict[str, float]) -> dict[str, float]:
    """All reported quantities at one grid point."""
    overrides = {name.split(".", 1)[1]: v for name, v in point.items()}
    model = build_model(cfg, overrides)
    if model.workspace is not None:
        three = cfg.partition.get("builtin") == "three-component"
        return dataclasses.asdict(sb.steady_rates(model.workspace, three, cfg.route))
    partition = resolve_partition(model, cfg.partition)
    res = solve_ness(model.L)
    lp = liouville_partition(partition, res.rho_s)
    k = rate_matrix(model.L, lp, cfg.route)
    row = {f"p_{n}": float(v) for n, v in zip(partition.names, lp.steady_populations)}
    row.update(_rate_entries(k))
    if model.name == "vsystem":
        row["beta"] = vs.derived(model.params).beta
    return row


def task_sweep(cfg, model, partition, out: Path, manifest, threads: int = 1) -> list[Path]:
    axes = cfg.sweep
    names = [g.parameter for g in axes]
    points = [dict(zip(names, combo)) for combo in itertools.product(*(g.values for g in axes))]
    fn: Callable = lambda pt: sweep_point(cfg, pt)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(fn, points))
    else:
        rows = [fn(pt) for pt in points]
    cols = list(rows[0])
    manifest["sweep"] = {"axes": [{"parameter": g.parameter, "n": len(g.values)} for g in axes],
                         "n_points": len(points)}
    return [write_csv(out / "sweep.csv", names + cols,
                      ([pt[n] for n in names] + [r[c] for c in cols] for pt, r in zip(points, rows)))]


TASKS = {"ness": task_ness, "rates": task_rates, "dynamics": task_dynamics, "markov": task_markov,
         "sweep": task_sweep}


def run(cfg: RunConfig, threads: int = 1) -> dict[str, Any]:
    """Execute ``cfg.task`` and write artifacts plus ``manifest.json`` into ``cfg.output_dir``."""
    if threads < 1:
        raise ValidationError("threads must be at least 1")
    t0 = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    partition = resolve_partition(model, cfg.partition)
    manifest: dict[str, Any] = {
        "version": __version__, "config": cfg.as_flat(), "model": model.name,
        "parameters": model.params if model.params is not None else {"path": cfg.custom.get("path")},
        "tolerances": TOLERANCES, "dimension": model.space.dim,
        "liouville_dimension": model.space.dim ** 2, "partition": list(partition.names), **model.meta,
    }
    task = TASKS[cfg.task]
    if cfg.task == "sweep":
        paths = task(cfg, model, partition, out, manifest, threads)
    else:
        paths = task(cfg, model, partition, out, manifest)
    manifest["artifacts"] = sorted(p.name for p in paths)
    manifest["wall_time_s"] = time.perf_counter() - t0
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return manifest
