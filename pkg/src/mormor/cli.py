"""Experiment runner: mormor <kind> [flags] --config <path> --out <dir>.

Kinds: pod-greedy | eim-pod-greedy | eim-classical | sequence-rate, plus
`compare` to merge two completed runs.  A run writes report.csv (fixed
schema, byte-deterministic), report.json (full records including wall
times), convergence.svg, and summary.txt into the output directory.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import eim as eim_mod
from . import models
from ._util import fit_loglog_slope, resolve_threads
from .errors import ConfigError, ContractViolation, SolverError
from .figures import compare_chart, line_chart
from .greedy import GreedyConfig, pod_greedy, width_proxy

RUN_KINDS = ("pod-greedy", "eim-pod-greedy", "eim-classical", "sequence-rate")
EXCERPT_ITERS = (4, 8, 12, 16, 20)


@dataclass
class ExperimentConfig:
    kind: str
    out: str = "mormor_out"
    n: int = 20
    m: int = 1
    selection: str = "exact-error"
    tolerance: float = 0.0
    track_exact: bool = False
    mesh: int = 65
    tau_exp: int = 7
    params: int = 20
    alpha: float = 1.0
    lam: float = 1.0
    dim: int = 0  # 0 = default 2*n for the sequence model
    levels: int = 128
    sigma_count: int = 100
    param_grid: int = 10
    threads: int = 0  # 0 = resolve from env / machine
    seed: int = 0  # reserved; current experiments are deterministic
    width_proxy: bool = False

    def validate(self):
        if self.kind not in RUN_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be positive")
        if self.kind == "pod-greedy":
            if self.mesh < 3 or self.mesh % 2 == 0:
                raise ConfigError(f"mesh must be odd >= 3, got {self.mesh}")
            if self.tau_exp < 0:
                raise ConfigError("tau exponent must be >= 0")
            snapshots = self.params * (2**self.tau_exp + 1)
            if self.n * self.m > snapshots:
                raise ConfigError(
                    f"n*m = {self.n * self.m} exceeds {snapshots} available snapshots"
                )
            if self.selection not in ("exact-error", "estimator"):
                raise ConfigError(f"unknown selection mode {self.selection!r}")
        if self.kind in ("eim-pod-greedy", "eim-classical"):
            if self.kind == "eim-pod-greedy" and self.n * self.m > self.sigma_count:
                raise ConfigError(
                    f"n*m = {self.n * self.m} exceeds {self.sigma_count} candidate points"
                )
            if self.levels < 2:
                raise ConfigError("need at least two time levels")
        if self.kind == "sequence-rate":
            if self.dim and self.n > self.dim:
                raise ConfigError(f"n = {self.n} exceeds sequence dimension {self.dim}")


def load_config_file(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return data


def build_config(kind, file_values, overrides):
    cfg = ExperimentConfig(kind=kind)
    known = set(asdict(cfg))
    for source, values in (("config file", file_values), ("flags", overrides)):
        for key, val in values.items():
            if key == "kind":
                continue
            if key not in known:
                raise ConfigError(f"unknown {source} field {key!r}")
            if val is not None:
                setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _write_report(report, cfg, out_dir, extra_meta=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.meta["kind"] = cfg.kind
    report.meta["config"] = asdict(cfg)
    if extra_meta:
        report.meta.update(extra_meta)
    # wall times stay in report.json; the CSV is byte-deterministic
    report.to_csv(out / "report.csv", zero_seconds=True)
    report.to_json(out / "report.json")
    return out


def _excerpt(report, names):
    lines = []
    for row in report.rows:
        if row["n"] in EXCERPT_ITERS:
            cells = ", ".join(f"{c}={row.get(c, float('nan')):.6g}" for c in names)
            lines.append(f"  n={row['n']}: {cells}")
    return lines


def _summary(out, cfg, report, lines):
    total = float(np.nansum(report.column("seconds")))
    text = [
        f"kind: {cfg.kind}",
        f"status: {report.status}",
        f"iterations recorded: {len(report.rows)}",
        *lines,
        f"total wall seconds: {total:.3f}",
        "",
    ]
    (Path(out) / "summary.txt").write_text("\n".join(text))


def _error_series(report):
    """Per-row (N, n, error) with sigma preferred over delta_sup."""
    Ns, ns, errs = [], [], []
    for row in report.rows:
        sigma = row.get("sigma", float("nan"))
        delta = row.get("delta_sup", float("nan"))
        err = sigma if np.isfinite(sigma) else delta
        if "sigma_hat" in row:
            err = row["sigma_hat"]
        Ns.append(row.get("N", row["n"]))
        ns.append(row["n"])
        errs.append(err)
    return np.array(Ns, dtype=float), np.array(ns, dtype=float), np.array(errs, dtype=float)


def run(cfg):
    """Execute one experiment; artifacts land in cfg.out."""
    cfg.validate()
    threads = resolve_threads(cfg.threads if cfg.threads else None)
    if cfg.kind == "pod-greedy":
        return _run_pod_greedy(cfg, threads)
    if cfg.kind == "sequence-rate":
        return _run_sequence(cfg, threads)
    if cfg.kind == "eim-pod-greedy":
        return _run_eim(cfg)
    if cfg.kind == "eim-classical":
        return _run_eim_classical(cfg)
    raise ConfigError(f"unknown experiment kind {cfg.kind!r}")


def _run_pod_greedy(cfg, threads):
    model = models.diffusion_model(cfg.mesh, 2.0**-cfg.tau_exp, cfg.params)
    gconf = GreedyConfig(
        n_iters=cfg.n,
        m=cfg.m,
        selection=cfg.selection,
        tolerance=cfg.tolerance,
        track_exact=cfg.track_exact,
        threads=threads,
    )
    basis, report = pod_greedy(model, gconf)
    out = _write_report(report, cfg, cfg.out, {"basis_dim": basis.size})

    N, n, err = _error_series(report)
    line_chart(
        [(f"m={cfg.m} ({cfg.selection})", N, err)],
        out / "convergence.svg",
        xlabel="subspace dimension N",
        ylabel="sup error over training set",
        title="POD-Greedy convergence",
    )
    slope = fit_loglog_slope(n, err)
    lines = [
        f"first error: {err[0] if err.size else float('nan'):.6g}",
        f"final error: {err[-1] if err.size else float('nan'):.6g}",
        f"log-log slope (error vs n, all iterations): {slope:.4f}",
        "theta excerpt:",
        *_excerpt(report, ("theta",)),
    ]
    if cfg.width_proxy:
        sv = width_proxy([model.solve(mu) for mu in model.parameters], model.ip)
        np.savetxt(out / "width_proxy.csv", sv, fmt="%.17g", header="sv", comments="")
        lines.append(f"width proxy: {min(sv.size, 10)} leading values "
                     + ", ".join(f"{v:.3e}" for v in sv[:10]))
    _summary(out, cfg, report, lines)
    return 0


def _run_sequence(cfg, threads):
    D = cfg.dim if cfg.dim else 2 * cfg.n
    model = models.sequence_model(cfg.alpha, cfg.lam, D)
    gconf = GreedyConfig(n_iters=cfg.n, m=cfg.m, selection="exact-error", threads=threads)
    basis, report = pod_greedy(model, gconf)
    out = _write_report(report, cfg, cfg.out, {"basis_dim": basis.size, "dim": D})

    N, n, err = _error_series(report)
    window = (10, cfg.n) if cfg.n >= 15 else None
    slope = fit_loglog_slope(n, err, window=window)
    closed = np.array([model.sigma_exact(int(row["mu"])) for row in report.rows])
    rel_dev = float(np.max(np.abs(err - closed) / closed)) if closed.size else float("nan")
    line_chart(
        [(f"alpha={cfg.alpha}", n, err), ("closed form", n, closed)],
        out / "convergence.svg",
        xlabel="iteration n",
        ylabel="greedy error",
        title="Sequence-model rate",
        xlog=True,
    )
    _summary(
        out,
        cfg,
        report,
        [
            f"decay exponent alpha: {cfg.alpha}",
            f"fitted slope of log(sigma) vs log(n){' over n in ' + str(list(window)) if window else ''}: {slope:.4f}",
            f"max relative deviation from closed form: {rel_dev:.3e}",
        ],
    )
    return 0


def _family(cfg):
    return models.inverse_distance_family(cfg.levels, cfg.sigma_count, cfg.param_grid)


def _theorem_diagnostic(report, family, m):
    """Fitted constant making the recorded error bound chain hold."""
    vals = np.hstack([family.values(mu) for mu in family.parameters])
    w = sla.svdvals(np.sqrt(family.grid.tau) * vals)
    lam_tilde = report.column("lambda_tilde")
    theta = report.column("theta")
    sig = report.column("sigma_hat")
    ratios = []
    for idx in range(len(sig)):
        n = idx + 1
        if m * n > w.size or not np.isfinite(sig[idx]) or sig[idx] <= 0:
            continue
        lt_prev = np.concatenate([[0.0], lam_tilde[:idx]])  # Lambda_0 = 0
        th = theta[: idx + 1]
        if not (np.all(np.isfinite(lt_prev)) and np.all(np.isfinite(th)) and np.all(th > 0)):
            continue
        geo = float(np.exp(np.mean(np.log((1.0 + lt_prev) / np.sqrt(th)))))
        rhs = (1.0 + lt_prev[-1]) * geo * np.sqrt(n) * w[m * n - 1]
        if rhs > 0:
            ratios.append(sig[idx] / rhs)
    return max(ratios) if ratios else float("nan")


def _run_eim(cfg):
    family = _family(cfg)
    itp, report = eim_mod.eim_pod_greedy(family, family.grid, cfg.n, cfg.m)
    out = _write_report(report, cfg, cfg.out, {"points": list(itp.points)})
    itp.to_json(out / "interpolant.json")

    N, n, err = _error_series(report)
    line_chart(
        [(f"EIM-POD-Greedy m={cfg.m}", N, err)],
        out / "convergence.svg",
        xlabel="subspace dimension N",
        ylabel="sup interpolation error",
        title="EIM-POD-Greedy convergence",
    )
    c_fit = _theorem_diagnostic(report, family, cfg.m)
    _summary(
        out,
        cfg,
        report,
        [
            f"final sup error: {err[-1] if err.size else float('nan'):.6g}",
            f"entropy-bound fitted constant: {c_fit:.4g}",
            "effectivity / conditioning excerpt:",
            *_excerpt(report, ("eta_bar", "kappa", "lambda_tilde", "theta")),
        ],
    )
    return 0


def _run_eim_classical(cfg):
    family = _family(cfg)
    itp, report = eim_mod.classical_eim_2d(family, family.grid, cfg.n)
    out = _write_report(report, cfg, cfg.out, {"points": list(itp.points)})
    itp.to_json(out / "interpolant.json")
    N, n, err = _error_series(report)
    line_chart(
        [("classical EIM", n, err)],
        out / "convergence.svg",
        xlabel="iteration n",
        ylabel="sup interpolation error",
        title="Classical space-time EIM",
    )
    _summary(
        out,
        cfg,
        report,
        [f"final sup error: {err[-1] if err.size else float('nan'):.6g}"],
    )
    return 0


_ERROR_FAMILIES = {
    "pod-greedy": "projection",
    "sequence-rate": "projection",
    "eim-pod-greedy": "interpolation",
    "eim-classical": "interpolation",
}


def compare(dir_a, dir_b, out_dir):
    """Merge two completed runs into one aligned table and overlay chart."""
    runs = []
    for d in (dir_a, dir_b):
        path = Path(d) / "report.json"
        if not path.exists():
            raise ConfigError(f"no report.json under {d}; run the experiment first")
        with open(path) as fh:
            payload = json.load(fh)
        kind = payload.get("meta", {}).get("kind")
        if kind not in _ERROR_FAMILIES:
            raise ConfigError(f"{path} has unknown kind {kind!r}")
        runs.append((kind, payload))
    fam_a, fam_b = (_ERROR_FAMILIES[k] for k, _ in runs)
    if fam_a != fam_b:
        raise ConfigError(
            f"experiment kinds do not share an error metric: {runs[0][0]} vs {runs[1][0]}"
        )

    series = []
    for kind, payload in runs:
        rows = payload["rows"]
        n = [row["n"] for row in rows]
        N = [row.get("N", row["n"]) for row in rows]
        key = "sigma_hat" if fam_a == "interpolation" else "sigma"
        err = []
        for row in rows:
            val = row.get(key, float("nan"))
            if val is None or not np.isfinite(val):
                val = row.get("delta_sup", float("nan"))
            err.append(val)
        series.append((kind, np.array(n), np.array(N, dtype=float), np.array(err, dtype=float)))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_rows = max(s[1].size for s in series)
    with open(out / "compare.csv", "w") as fh:
        fh.write("n,N_a,error_a,N_b,error_b\n")
        for i in range(n_rows):
            cells = [str(i + 1)]
            for _, n, N, err in series:
                if i < n.size:
                    cells += [f"{N[i]:.17g}", f"{err[i]:.17g}"]
                else:
                    cells += ["nan", "nan"]
            fh.write(",".join(cells) + "\n")

    labels = [f"{kind} (a)" if i == 0 else f"{kind} (b)" for i, (kind, *_rest) in enumerate(series)]
    by_dim = [(lab, s[2], s[3]) for lab, s in zip(labels, series)]
    by_iter = [(lab, s[1], s[3]) for lab, s in zip(labels, series)]
    compare_chart(by_dim, by_iter, out / "compare.svg", title="run comparison")
    return 0


def _add_run_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out", help="output directory")
    p.add_argument("--n", type=int, help="number of greedy iterations")
    p.add_argument("--m", type=int, help="POD modes per iteration")
    p.add_argument("--tolerance", type=float, help="early-stop threshold")
    p.add_argument("--threads", type=int, help="sweep parallelism (MORMOR_THREADS)")
    p.add_argument("--seed", type=int, help="reserved; experiments are deterministic")


def make_parser():
    parser = argparse.ArgumentParser(prog="mormor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pod-greedy", help="diffusion benchmark POD-Greedy run")
    _add_run_flags(p)
    p.add_argument("--mesh", type=int, help="vertices per side (odd)")
    p.add_argument("--tau", type=int, dest="tau_exp", help="time step exponent: tau = 2^-E")
    p.add_argument("--params", type=int, help="training parameters in [1,2]")
    p.add_argument("--selection", choices=("exact-error", "estimator"))
    p.add_argument("--track-exact", action="store_true", default=None, dest="track_exact")
    p.add_argument("--width-proxy", action="store_true", default=None, dest="width_proxy")

    p = sub.add_parser("sequence-rate", help="synthetic decay-rate check")
    _add_run_flags(p)
    p.add_argument("--alpha", type=float, help="decay exponent")
    p.add_argument("--lambda", type=float, dest="lam", help="time decay rate")
    p.add_argument("--dim", type=int, help="sequence truncation (default 2n)")

    for kind in ("eim-pod-greedy", "eim-classical"):
        p = sub.add_parser(kind, help=f"{kind} on the inverse-distance family")
        _add_run_flags(p)
        p.add_argument("--levels", type=int, help="time levels (J = levels-1)")
        p.add_argument("--sigma-count", type=int, dest="sigma_count")
        p.add_argument("--param-grid", type=int, dest="param_grid")

    p = sub.add_parser("compare", help="merge two completed runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        if args.command == "compare":
            return compare(args.run_a, args.run_b, args.out)
        file_values = load_config_file(args.config) if args.config else {}
        overrides = {
            k: v
            for k, v in vars(args).items()
            if k not in ("command", "config") and v is not None
        }
        cfg = build_config(args.command, file_values, overrides)
        return run(cfg)
    except (ConfigError, ContractViolation) as exc:
        print(f"mormor: config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"mormor: solver error (parameter {exc.parameter}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
