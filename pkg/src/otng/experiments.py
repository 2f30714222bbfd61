"""Experiment drivers: fitting, statistical comparison, geodesics, tensors.

Each driver takes a validated config, runs fully seeded, and writes CSV
files (RFC-4180, 17 significant digits, first line a comment recording
the config hash and seed).
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .descent import Scheme, StoppingRule, Termination, run
from .families import Family, get_family, make_rng
from .geodesics import displacement_interpolation, geodesic_coordinate_descent
from .grid import Grid
from .tensors import (
    fisher_metric_tensor,
    modified_wasserstein_tensor,
    w2_hessian,
    wasserstein_metric_tensor,
)
from .transport import EmpiricalTarget, distribution, w2_squared

DEFAULT_DIAG_MIXTURE = (40.0, 1.0, 1.0, 1.0, 1.0)

# section-5 sampling ranges for the comparison protocol
MIXTURE_RANGES = {"a": (-2.0, 2.0), "mu": (-10.0, 10.0), "var": (1.0, 11.0)}
LAPLACE_RANGES = {"mu": (-10.0, 10.0), "b": (1.0, 4.0)}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.17g}"
    return v


def write_csv(path: Path, header, rows, cfg: dict, seed) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash(cfg)} seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _require(cfg: dict, key: str, ctx: str):
    if key not in cfg:
        raise ConfigError(f"{ctx}: missing required key {key!r}")
    return cfg[key]


def _check_keys(cfg: dict, allowed, ctx: str) -> None:
    extra = set(cfg) - set(allowed)
    if extra:
        raise ConfigError(f"{ctx}: unknown keys {sorted(extra)}")


def _parse_grid(cfg: dict, family: Family) -> Grid:
    sub = cfg.get("grid", {})
    _check_keys(sub, ("r", "m"), "grid")
    try:
        return family.default_grid(float(sub.get("r", 15.0)), int(sub.get("m", 4000)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _parse_stopping(cfg: dict) -> StoppingRule:
    sub = cfg.get("stopping", {})
    _check_keys(sub, ("grad_tol", "min_step", "max_iter"), "stopping")
    try:
        return StoppingRule(
            grad_tol=float(sub.get("grad_tol", 1e-1)),
            min_step=float(sub.get("min_step", 1e-4)),
            max_iter=int(sub.get("max_iter", 200)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_schemes(cfg: dict, family: Family) -> list[Scheme]:
    kinds = cfg.get("schemes", ["wasserstein", "fisher", "gd"])
    diag_p = cfg.get("diag_p")
    if diag_p is None and family.dim == 5:
        diag_p = DEFAULT_DIAG_MIXTURE
    schemes = []
    for kind in kinds:
        try:
            if kind == "diag":
                if diag_p is None:
                    raise ConfigError("diag scheme requires diag_p")
                schemes.append(Scheme("diag", np.asarray(diag_p, dtype=float)))
            else:
                schemes.append(Scheme(kind))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return schemes


def _parse_theta(cfg: dict, key: str, family: Family) -> np.ndarray:
    try:
        return family.validate(np.asarray(_require(cfg, key, "config"), dtype=float))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


# ---------------------------------------------------------------------------
# fit


def run_fit(cfg: dict, out_dir: Path) -> dict:
    _check_keys(
        cfg,
        (
            "family",
            "loss",
            "theta0",
            "theta_star",
            "n_samples",
            "schemes",
            "diag_p",
            "seed",
            "grid",
            "stopping",
        ),
        "fit",
    )
    family = _get_family(cfg)
    loss = cfg.get("loss", "w2")
    if loss not in ("w2", "nll"):
        raise ConfigError(f"unknown loss {loss!r}")
    theta0 = _parse_theta(cfg, "theta0", family)
    theta_star = _parse_theta(cfg, "theta_star", family)
    seed = int(_require(cfg, "seed", "fit"))
    n_samples = int(cfg.get("n_samples", 1000))
    grid = _parse_grid(cfg, family)
    stopping = _parse_stopping(cfg)
    schemes = _parse_schemes(cfg, family)

    data = family.sample(theta_star, n_samples, seed)
    target = EmpiricalTarget(data)

    traces = {}
    for scheme in schemes:
        traces[scheme.label] = run(
            scheme,
            loss,
            family,
            theta0,
            target=target if loss == "w2" else None,
            data=data if loss == "nll" else None,
            grid=grid,
            stopping=stopping,
        )

    labels = [s.label for s in schemes]
    depth = max(len(tr.objectives) for tr in traces.values())
    curve_rows = []
    for i in range(depth):
        row = [i]
        for lbl in labels:
            objs = traces[lbl].objectives
            row.append(objs[i] if i < len(objs) else "")
        curve_rows.append(row)
    write_csv(out_dir / "fit_curves.csv", ["iteration"] + labels, curve_rows, cfg, seed)

    report_rows = [
        [lbl, traces[lbl].final_objective, traces[lbl].iterations, traces[lbl].termination.value]
        for lbl in labels
    ]
    write_csv(
        out_dir / "fit_report.csv",
        ["scheme", "final_objective", "iterations", "termination"],
        report_rows,
        cfg,
        seed,
    )
    return traces


def _get_family(cfg: dict) -> Family:
    try:
        return get_family(_require(cfg, "family", "config"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# compare


def _draw_mixture_theta(rng: np.random.Generator) -> np.ndarray:
    a = rng.uniform(*MIXTURE_RANGES["a"])
    mu1, mu2 = rng.uniform(*MIXTURE_RANGES["mu"], size=2)
    v1, v2 = rng.uniform(*MIXTURE_RANGES["var"], size=2)
    return np.array([a, mu1, v1, mu2, v2])


def _draw_target_samples(rng: np.random.Generator, specified: str, n: int) -> np.ndarray:
    if specified == "well":
        family = get_family("mixture-logit")
        theta = _draw_mixture_theta(rng)
    elif specified == "mis":
        family = get_family("laplace")
        theta = np.array(
            [rng.uniform(*LAPLACE_RANGES["mu"]), rng.uniform(*LAPLACE_RANGES["b"])]
        )
    else:
        raise ConfigError(f"target must be 'well' or 'mis', got {specified!r}")
    u = np.clip(rng.random(n), 1e-16, 1.0 - 1e-16)
    return np.asarray(family.quantile(theta, u), dtype=float)


def run_compare(cfg: dict, out_dir: Path) -> dict:
    _check_keys(
        cfg,
        (
            "loss",
            "target",
            "trials",
            "n_samples",
            "schemes",
            "diag_p",
            "seed",
            "grid",
            "stopping",
            "hist_bins",
        ),
        "compare",
    )
    loss = cfg.get("loss", "w2")
    if loss not in ("w2", "nll"):
        raise ConfigError(f"unknown loss {loss!r}")
    specified = cfg.get("target", "well")
    trials = int(cfg.get("trials", 100))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    n_samples = int(cfg.get("n_samples", 200))
    seed = int(_require(cfg, "seed", "compare"))
    family = get_family("mixture-logit")
    grid = _parse_grid(cfg, family)
    stopping = _parse_stopping(cfg)
    schemes = _parse_schemes(cfg, family)
    hist_bins = int(cfg.get("hist_bins", 20))

    labels = [s.label for s in schemes]
    rows = []
    results = {lbl: {"obj": [], "iters": [], "term": []} for lbl in labels}
    for trial in range(trials):
        trial_seed = seed + trial
        rng = make_rng(trial_seed)
        theta0 = _draw_mixture_theta(rng)
        data = _draw_target_samples(rng, specified, n_samples)
        target = EmpiricalTarget(data)
        for scheme in schemes:
            trace = run(
                scheme,
                loss,
                family,
                theta0,
                target=target if loss == "w2" else None,
                data=data if loss == "nll" else None,
                grid=grid,
                stopping=stopping,
            )
            rows.append(
                [
                    trial,
                    trial_seed,
                    scheme.label,
                    trace.final_objective,
                    trace.iterations,
                    trace.termination.value,
                ]
            )
            res = results[scheme.label]
            res["obj"].append(trace.final_objective)
            res["iters"].append(trace.iterations)
            res["term"].append(trace.termination)

    write_csv(
        out_dir / "compare_trials.csv",
        ["trial", "trial_seed", "scheme", "final_objective", "iterations", "termination"],
        rows,
        cfg,
        seed,
    )

    summary_rows = []
    summary = {}
    for lbl in labels:
        obj = np.array(results[lbl]["obj"])
        iters = np.array(results[lbl]["iters"], dtype=float)
        terms = results[lbl]["term"]
        ddof = 1 if trials > 1 else 0
        # runs that ended by the gradient-norm rule; failed runs (line
        # search stalled or iteration cap) are aggregated separately so
        # the converged statistics are not polluted by outliers
        conv = np.array([t is Termination.CONVERGED for t in terms])
        cddof = 1 if conv.sum() > 1 else 0
        stats = {
            "obj_mean": float(obj.mean()),
            "obj_std": float(obj.std(ddof=ddof)),
            "iter_mean": float(iters.mean()),
            "iter_std": float(iters.std(ddof=ddof)),
            "obj_mean_converged": float(obj[conv].mean()) if conv.any() else float("nan"),
            "obj_std_converged": float(obj[conv].std(ddof=cddof)) if conv.any() else float("nan"),
            "iter_mean_converged": float(iters[conv].mean()) if conv.any() else float("nan"),
            "n_converged": int(conv.sum()),
            "n_line_search_failed": sum(t is Termination.LINE_SEARCH_FAILED for t in terms),
            "n_max_iterations": sum(t is Termination.MAX_ITERATIONS for t in terms),
        }
        summary[lbl] = stats
        summary_rows.append([lbl] + list(stats.values()))
    write_csv(
        out_dir / "compare_summary.csv",
        [
            "scheme",
            "obj_mean",
            "obj_std",
            "iter_mean",
            "iter_std",
            "obj_mean_converged",
            "obj_std_converged",
            "iter_mean_converged",
            "n_converged",
            "n_line_search_failed",
            "n_max_iterations",
        ],
        summary_rows,
        cfg,
        seed,
    )

    all_obj = np.array([r[3] for r in rows], dtype=float)
    edges = np.histogram_bin_edges(all_obj, bins=hist_bins)
    hist_rows = []
    for lbl in labels:
        counts, _ = np.histogram(np.array(results[lbl]["obj"]), bins=edges)
        for k in range(hist_bins):
            hist_rows.append([lbl, edges[k], edges[k + 1], int(counts[k])])
    write_csv(
        out_dir / "compare_hist.csv",
        ["scheme", "bin_left", "bin_right", "count"],
        hist_rows,
        cfg,
        seed,
    )
    return {"summary": summary, "rows": rows}


# ---------------------------------------------------------------------------
# geodesic


def run_geodesic(cfg: dict, out_dir: Path) -> dict:
    _check_keys(
        cfg,
        ("family", "theta0", "theta1", "segments", "grid", "max_sweeps", "tol", "t_points", "seed"),
        "geodesic",
    )
    family = _get_family(cfg)
    theta0 = _parse_theta(cfg, "theta0", family)
    theta1 = _parse_theta(cfg, "theta1", family)
    segments = int(cfg.get("segments", 20))
    grid = _parse_grid(cfg, family)
    t_points = int(cfg.get("t_points", 11))
    seed = cfg.get("seed", "none")

    path = geodesic_coordinate_descent(
        family,
        theta0,
        theta1,
        grid,
        n_segments=segments,
        max_sweeps=int(cfg.get("max_sweeps", 200)),
        tol=float(cfg.get("tol", 1e-6)),
    )
    w2sq = w2_squared(distribution(family, theta0), distribution(family, theta1), grid)

    knot_rows = [
        [i, i / segments] + list(path.knots[i]) for i in range(segments + 1)
    ]
    write_csv(
        out_dir / "geodesic_knots.csv",
        ["index", "t"] + list(family.slot_names),
        knot_rows,
        cfg,
        seed,
    )
    write_csv(
        out_dir / "geodesic_report.csv",
        ["path_energy", "w2_squared"],
        [[path.energy, w2sq]],
        cfg,
        seed,
    )

    ts = np.linspace(0.0, 1.0, t_points)
    src = distribution(family, theta0)
    tgt = distribution(family, theta1)
    manifold = [family.pdf(path.theta_at(t), grid.nodes) for t in ts]
    displacement = [displacement_interpolation(src, tgt, t, grid) for t in ts]
    header = ["x"]
    for i in range(t_points):
        header += [f"manifold_t{i}", f"displacement_t{i}"]
    rows = []
    for j in range(grid.m):
        row = [grid.nodes[j]]
        for i in range(t_points):
            row += [manifold[i][j], displacement[i][j]]
        rows.append(row)
    write_csv(out_dir / "geodesic_densities.csv", header, rows, cfg, seed)
    return {"path": path, "w2_squared": w2sq, "ts": ts}


# ---------------------------------------------------------------------------
# metric


def run_metric(cfg: dict, out_dir: Path) -> dict:
    _check_keys(cfg, ("family", "theta", "target_theta", "grid", "seed"), "metric")
    family = _get_family(cfg)
    theta = _parse_theta(cfg, "theta", family)
    grid = _parse_grid(cfg, family)
    seed = cfg.get("seed", "none")

    tensors = {
        "wasserstein": wasserstein_metric_tensor(family, theta, grid),
        "fisher": fisher_metric_tensor(family, theta, grid),
    }
    if "target_theta" in cfg:
        target = distribution(family, _parse_theta(cfg, "target_theta", family))
        tensors["modified_wasserstein"] = modified_wasserstein_tensor(
            family, theta, target, grid
        )
        tensors["hessian"] = w2_hessian(family, theta, target, grid)

    entry_rows = []
    eig_rows = []
    for name, tensor in tensors.items():
        d = tensor.dim
        for i in range(d):
            for j in range(d):
                entry_rows.append([name, i, j, tensor.entries[i, j]])
        for k, ev in enumerate(np.sort(tensor.eigenvalues())):
            eig_rows.append([name, k, ev])
    write_csv(
        out_dir / "metric_entries.csv", ["matrix", "i", "j", "value"], entry_rows, cfg, seed
    )
    write_csv(
        out_dir / "metric_eigenvalues.csv", ["matrix", "k", "value"], eig_rows, cfg, seed
    )
    return tensors
