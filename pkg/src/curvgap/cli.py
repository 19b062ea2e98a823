"""Command line front end.

Subcommands cover the pipeline stages: ``curvature`` evaluates the selected
functional on the configured geometry, ``certify`` checks the sign and
nondegeneracy hypotheses, ``solve`` runs the continuation path, ``audit``
verifies the full estimate chain (end-to-end from a config, or on a
previously solved run directory), and ``report`` prints a stored result.

Every failure exits nonzero with a stable error code on stderr:

    E02  configuration or parameter error
    E03  solver failure (the partial path is kept and stays auditable)
    E04  I/O or checksum failure
    E05  internal inconsistency (an audit invariant that must never break)

``CURVGAP_MAX_THREADS`` caps the linear-algebra thread pools for the whole
process.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import audit as audit_mod
from .certify import (
    certify_delta1_bounded,
    certify_quasi_negative,
    certify_volume_noncollapse,
    find_delta,
)
from .config import RunConfig
from .continuity import (
    ContinuityPath,
    PathSample,
    _psi_on_grid,
    _threshold,
    assemble_problem,
    run_continuation,
)
from .errors import (
    FieldChecksumError,
    LinearSolveFailure,
    MaxIterExceeded,
    ParameterError,
    PositivityLoss,
)
from .functionals import (
    k_ricci_field,
    kappa_field,
    lambda_max,
    mu_eta,
    tau_field,
)
from .metrics import chern_curvature
from .rundir import RunDirectory, sanitize_json

E_OK, E_CONFIG, E_SOLVER, E_IO, E_INCONSISTENT = 0, 2, 3, 4, 5


def _cap_threads() -> None:
    raw = os.environ.get("CURVGAP_MAX_THREADS")
    if not raw:
        return
    try:
        limit = int(raw)
        if limit < 1:
            raise ValueError
    except ValueError:
        raise ParameterError(
            f"CURVGAP_MAX_THREADS must be a positive integer, got {raw!r}")
    import threadpoolctl
    threadpoolctl.threadpool_limits(limits=limit)


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _functional_field(cfg: RunConfig, curv, kind: str):
    f = cfg.functional
    common = dict(restarts=f["restarts"], seed=cfg.seed, max_iter=f["max_iter"])
    if kind == "rbc":
        return kappa_field(curv, **common)
    if kind == "ric_perp":
        return tau_field(curv, f["alpha"], f["beta"], **common)
    return k_ricci_field(curv, f["k"], **common)


class Pipeline:
    """Lazily built shared state for one configured run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.omega0 = cfg.build_omega0()
        self.eta = cfg.build_eta()
        self.psi = cfg.psi_expr()
        self.region = cfg.region()
        self._extremal = {}

    def curvature_source(self, kind: str):
        # quasi-negativity in the first theorem is a property of the
        # comparison metric; the orthogonal-Ricci route works on the
        # background itself
        if kind == "rbc" and self.eta is not None:
            return self.eta
        return self.omega0

    def extremal(self, kind: str):
        if kind not in self._extremal:
            curv = chern_curvature(self.curvature_source(kind))
            self._extremal[kind] = _functional_field(self.cfg, curv, kind)
        return self._extremal[kind]

    def mode_kind(self) -> str:
        return "rbc" if self.cfg.mode == "thm1" else "ric_perp"

    def mode_extremal(self):
        return self.extremal(self.mode_kind())

    def level_constant(self) -> float:
        ext = self.mode_extremal()
        return mu_eta(ext) if self.cfg.mode == "thm1" else lambda_max(ext)

    def psi_grid(self):
        return _psi_on_grid(self.psi, self.omega0.grid)

    def certify_all(self) -> dict:
        cfg = self.cfg
        hyp = cfg.hypotheses
        ext = self.extremal(cfg.functional["kind"])
        eta = self.eta if self.eta is not None else self.omega0
        return {
            "quasi_negative": certify_quasi_negative(
                ext, hyp["eps"], hyp["delta"], self.region, self.omega0.grid),
            "delta1_bounded": certify_delta1_bounded(
                eta, self.omega0, self.psi, hyp["delta1"]),
            "volume_noncollapse": certify_volume_noncollapse(
                eta, self.omega0, hyp["delta2"], self.region),
        }

    def solve(self, on_sample=None) -> ContinuityPath:
        cfg = self.cfg
        hyp, sol, f = cfg.hypotheses, cfg.solver, cfg.functional
        level = self.level_constant()
        mu = level if cfg.mode == "thm1" else None
        lam = level if cfg.mode == "thm2" else None
        return run_continuation(
            self.omega0, cfg.mode, cfg.schedule(),
            alpha=f["alpha"], beta=f["beta"], delta1=hyp["delta1"],
            psi=self.psi, eta=self.eta, mu=mu, lam=lam,
            tol=sol["tol"], max_iter=sol["max_iter"],
            positivity_floor=sol["positivity_floor"], on_sample=on_sample)


# ---------------------------------------------------------------------------
# subcommands


def cmd_curvature(cfg: RunConfig, out) -> int:
    started = time.perf_counter()
    rd = RunDirectory(out)
    rd.write_config(cfg.echo)
    pipe = Pipeline(cfg)
    kind = cfg.functional["kind"]
    source = pipe.curvature_source(kind)
    curv = chern_curvature(source)
    ext = pipe.extremal(kind)

    rd.save_field("curvature_tensor", curv.tensor)
    rd.save_field("ricci", curv.ricci)
    rd.save_field("extremal_max", ext.max_field)
    rd.save_field("extremal_weighted", ext.weighted_field)
    rd.save_field("omega0_det", pipe.omega0.det)

    level_name = {"rbc": "mu_eta", "ric_perp": "lambda_max",
                  "k_ricci": "global_max"}[kind]
    report = {
        "command": "curvature",
        "functional": cfg.functional,
        level_name: float(ext.global_max),
        "argmax": [int(i) for i in ext.argmax],
        "weighted_field": {
            "min": float(ext.weighted_field.min()),
            "max": float(ext.weighted_field.max()),
            "mean": float(ext.weighted_field.mean()),
        },
        "neg_ricci_volume": float(audit_mod.neg_ricci_volume(pipe.omega0)),
        "fields": rd.list_fields(),
    }
    rd.write_report(sanitize_json(report))
    rd.write_meta(pipe.omega0.grid.shape,
                  timings={"total": time.perf_counter() - started})
    print(f"curvature: {level_name} = {ext.global_max:.6g} "
          f"(field range [{report['weighted_field']['min']:.6g}, "
          f"{report['weighted_field']['max']:.6g}]) -> {rd.root}")
    return E_OK


def cmd_certify(cfg: RunConfig, out, want_delta: bool, sweep) -> int:
    started = time.perf_counter()
    rd = RunDirectory(out)
    rd.write_config(cfg.echo)
    pipe = Pipeline(cfg)
    hyp = cfg.hypotheses
    ext = pipe.extremal(cfg.functional["kind"])
    reports = pipe.certify_all()

    payload = {
        "command": "certify",
        "hypotheses": {k: v.to_dict() for k, v in reports.items()},
        "all_certified": all(v.certified for v in reports.values()),
    }
    if want_delta:
        payload["find_delta"] = float(find_delta(
            ext, hyp["eps"], pipe.region, pipe.omega0.grid))
    if sweep:
        rows = []
        for eps in sweep:
            rep = certify_quasi_negative(ext, eps, hyp["delta"], pipe.region,
                                         pipe.omega0.grid)
            row = {"eps": eps, "certified": rep.certified,
                   "margins": rep.margins}
            if want_delta:
                row["find_delta"] = float(find_delta(
                    ext, eps, pipe.region, pipe.omega0.grid))
            rows.append(row)
        payload["sweep"] = rows

    rd.write_report(sanitize_json(payload))
    rd.write_meta(pipe.omega0.grid.shape,
                  timings={"total": time.perf_counter() - started})
    for name, rep in reports.items():
        print(f"certify: {name}: {'certified' if rep.certified else 'NOT certified'}")
    if want_delta:
        print(f"certify: largest certifiable delta = {payload['find_delta']:.6g}")
    print(f"certify: -> {rd.root}")
    return E_OK


def _solve_into(pipe: Pipeline, rd: RunDirectory) -> ContinuityPath:
    counter = {"i": 0}

    def persist(sample):
        idx = counter["i"]
        rd.save_field(f"phi_{idx:04d}", sample.phi)
        rd.append_summary_row(idx, sample)
        counter["i"] += 1

    return pipe.solve(on_sample=persist)


def cmd_solve(cfg: RunConfig, out) -> int:
    started = time.perf_counter()
    rd = RunDirectory(out)
    rd.write_config(cfg.echo)
    pipe = Pipeline(cfg)
    path = _solve_into(pipe, rd)
    report = {
        "command": "solve",
        "mode": path.mode,
        "c": path.c,
        "termination": path.termination,
        "params": path.params,
        "samples": [
            {"t": s.t, **s.diagnostics} for s in path.samples
        ],
    }
    rd.write_report(sanitize_json(report))
    rd.write_meta(pipe.omega0.grid.shape,
                  timings={"total": time.perf_counter() - started})
    print(f"solve: {len(path.samples)} samples, termination: {path.termination}")
    print(f"solve: -> {rd.root}")
    if path.termination.startswith("solver_failure"):
        print(f"error[E{E_SOLVER:02d}]: {path.termination}", file=sys.stderr)
        return E_SOLVER
    return E_OK


def _load_path(rd: RunDirectory, cfg: RunConfig, pipe: Pipeline) -> ContinuityPath:
    """Rebuild the continuation path from dumped fields and summary rows."""
    rows = rd.read_summary()
    if not rows:
        raise ParameterError(
            f"{rd.root}/summary.csv has no sample rows; run `solve` first")
    prior = {}
    try:
        prior = rd.read_report()
    except ParameterError:
        pass
    termination = prior.get("termination") or \
        prior.get("solve", {}).get("termination") or "reached_t_end"

    hyp, f, sol = cfg.hypotheses, cfg.functional, cfg.solver
    level = pipe.level_constant()
    mu = level if cfg.mode == "thm1" else None
    lam = level if cfg.mode == "thm2" else None
    params = {"alpha": f["alpha"], "beta": f["beta"], "delta1": hyp["delta1"],
              "mu": mu, "lam": lam,
              "threshold": _threshold(cfg.mode, cfg.n, hyp["delta1"],
                                      f["alpha"], mu, lam),
              "tol": sol["tol"]}
    samples = []
    c_exp = None
    for row in rows:
        idx = int(row["index"])
        t = float(row["t"])
        phi = rd.load_field(f"phi_{idx:04d}")
        problem = assemble_problem(pipe.omega0, cfg.mode, t,
                                   alpha=f["alpha"], beta=f["beta"],
                                   delta1=hyp["delta1"], psi=pipe.psi)
        c_exp = problem.c
        diagnostics = {k: (int(row[k]) if k == "newton_iters" else float(row[k]))
                       for k in row if k not in ("index", "t")}
        samples.append(PathSample(t=t, phi=phi,
                                  u=problem.potential_u(phi),
                                  diagnostics=diagnostics))
    return ContinuityPath(mode=cfg.mode, c=float(c_exp), samples=samples,
                          schedule=cfg.schedule(), termination=termination,
                          params=params)


def _audit_run(cfg: RunConfig, rd: RunDirectory, pipe: Pipeline,
               path: ContinuityPath) -> int:
    started = time.perf_counter()
    hyp, f, acfg = cfg.hypotheses, cfg.functional, cfg.audit
    mode = cfg.mode
    ext = pipe.mode_extremal()
    level = pipe.level_constant()
    kappa = ext.weighted_field
    psi_grid = pipe.psi_grid()
    eta = pipe.eta if pipe.eta is not None else pipe.omega0
    ineq_tol = acfg["ineq_tol"]

    hypotheses = pipe.certify_all()
    constants = audit_mod.compute_constants(
        pipe.omega0, mode, region=pipe.region, eps=hyp["eps"], c0=acfg["c0"],
        delta1=hyp["delta1"], alpha=f["alpha"], psi=pipe.psi, path=path,
        t_limit=acfg.get("t_limit"), family_size=acfg["family_size"],
        seed=cfg.seed)
    c1_val = constants["c1"]["c1"] if constants.get("c1") else None
    c2_val = constants.get("c2")

    states = audit_mod.prepare_states(pipe.omega0, path, psi=pipe.psi)
    records = []
    for st in states:
        if mode == "thm1":
            records.append(audit_mod.check_schwarz(
                st.w, eta, 1.0, st.t / hyp["delta1"], level, kappa=kappa,
                grid=pipe.omega0.grid, tol=ineq_tol,
                name=f"schwarz[t={st.t:.6g}]"))
        else:
            records.append(audit_mod.check_thm2_differential(
                pipe.omega0, st.sample, alpha=f["alpha"], beta=f["beta"],
                lam=level, tau=kappa, state=st, tol=ineq_tol))
        records.extend(audit_mod.check_integral_lemma(
            pipe.omega0, st.sample, kappa, pipe.region, mode=mode,
            psi=pipe.psi, eta=eta, delta1=hyp["delta1"], alpha=f["alpha"],
            beta=f["beta"], delta=hyp["delta"], delta2=hyp["delta2"],
            c1=c1_val, c2=c2_val, state=st, tol=ineq_tol))
    if mode == "thm1":
        records.extend(audit_mod.check_trace_bound(
            pipe.omega0, path, hyp["delta1"], level, eta=eta.matrix,
            psi=pipe.psi, states=states, tol=ineq_tol))
    records.extend(audit_mod.check_sup_ut(
        pipe.omega0, path, hyp["delta1"], hyp["eps"], constants["b0"],
        acfg["c0"], psi=pipe.psi, states=states, tol=ineq_tol))

    gap = audit_mod.gap_report(pipe.omega0, path, hypotheses, constants,
                               hyp["eps"], mode=mode)
    records.extend(gap.checks)

    summary = audit_mod.summarize(records)
    report = {
        "command": "audit",
        "mode": mode,
        "level_constant": float(level),
        "solve": {
            "termination": path.termination,
            "c": path.c,
            "params": path.params,
            "samples": [{"t": s.t, **s.diagnostics} for s in path.samples],
        },
        "hypotheses": {k: v.to_dict() for k, v in hypotheses.items()},
        "constants": constants,
        "checks": [r.to_dict() for r in records],
        "summary": summary,
        "gap": gap.gap,
    }
    rd.write_report(sanitize_json(report))
    _emit_plots(rd, path, records)
    rd.write_meta(pipe.omega0.grid.shape,
                  timings={"audit": time.perf_counter() - started})
    print(f"audit: {summary['total']} checks, {summary['passed']} passed, "
          f"{summary['failed']} failed, {summary['vacuous']} vacuous")
    if summary["worst_check"] is not None:
        print(f"audit: worst margin {summary['worst_margin']:.3e} "
              f"({summary['worst_check']})")
    print(f"audit: verdict: {gap.gap['verdict']}")
    print(f"audit: -> {rd.root}")
    return E_OK


def _emit_plots(rd: RunDirectory, path: ContinuityPath, records) -> None:
    from . import plots

    ts = [s.t for s in path.samples]
    # per-sample records carry their t in the name suffix
    named = {rec.name: rec for rec in records if "[t=" in rec.name}
    families = sorted({rec.name.split("[")[0] for rec in named.values()}
                      - {"chain.composite"})
    margins_by_family = {}
    for family in families:
        series = []
        for t in ts:
            rec = named.get(f"{family}[t={t:.6g}]")
            series.append(None if rec is None or rec.vacuous else rec.margin)
        if any(m is not None for m in series):
            margins_by_family[family] = series
    plots.margin_curves(margins_by_family, ts, rd.plots_dir / "margins_vs_t.svg")

    sup_u = [s.diagnostics["sup_u"] for s in path.samples]
    bounds = []
    for t, su in zip(ts, sup_u):
        rec = named.get(f"sup_bound[t={t:.6g}]")
        missing = rec is None or rec.vacuous or rec.margin is None
        bounds.append(None if missing else su + rec.margin)
    plots.sup_u_curves(ts, sup_u, bounds, rd.plots_dir / "sup_u_vs_bound.svg")
    plots.path_diagnostics(ts, [s.diagnostics for s in path.samples],
                           rd.plots_dir / "path_diagnostics.svg")


def cmd_audit(cfg, out, run) -> int:
    if run is not None:
        rd = RunDirectory(run, create=False)
        cfg = RunConfig.from_dict(rd.read_config())
        pipe = Pipeline(cfg)
        path = _load_path(rd, cfg, pipe)
    else:
        if cfg is None or out is None:
            raise ParameterError(
                "audit needs either --run <solved run dir> or --config with --out")
        rd = RunDirectory(out)
        rd.write_config(cfg.echo)
        pipe = Pipeline(cfg)
        path = _solve_into(pipe, rd)
    code = _audit_run(cfg, rd, pipe, path)
    if path.termination.startswith("solver_failure"):
        print(f"note: audited a partial path ({path.termination})",
              file=sys.stderr)
    return code


def cmd_report(run, as_json: bool) -> int:
    rd = RunDirectory(run, create=False)
    report = rd.read_report()
    if as_json:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
        return E_OK
    print(f"command:  {report.get('command', '?')}")
    if "mode" in report:
        print(f"mode:     {report['mode']}")
    solve = report.get("solve")
    if solve:
        print(f"path:     {len(solve['samples'])} samples, "
              f"termination: {solve['termination']}")
    summary = report.get("summary")
    if summary:
        print(f"checks:   {summary['total']} total, {summary['passed']} passed, "
              f"{summary['failed']} failed, {summary['vacuous']} vacuous")
        if summary.get("worst_check") is not None:
            print(f"worst:    {summary['worst_margin']:.3e} ({summary['worst_check']})")
    gap = report.get("gap")
    if gap:
        print(f"verdict:  {gap['verdict']}")
    for key in ("mu_eta", "lambda_max", "global_max", "find_delta"):
        if key in report:
            print(f"{key}: {report[key]:.6g}")
    hyps = report.get("hypotheses")
    if hyps and "summary" not in report:
        for name, rep in sorted(hyps.items()):
            state = "certified" if rep["certified"] else "NOT certified"
            print(f"{name}: {state}")
    return E_OK


# ---------------------------------------------------------------------------
# argument plumbing


def _apply_overrides(raw: dict, args) -> dict:
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        raw.setdefault("solver", {})["tol"] = args.tol
    return raw


def _load_config(args) -> RunConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ParameterError(
                f"{args.config}: not valid JSON: line {err.lineno} "
                f"column {err.colno}: {err.msg}") from err
    return RunConfig.from_dict(_apply_overrides(raw, args))


def _parse_sweep(raw: str) -> list:
    try:
        values = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ParameterError(f"--sweep expects comma-separated numbers, got {raw!r}")
    if not values or any(v < 0 for v in values):
        raise ParameterError(f"--sweep values must be nonnegative, got {raw!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvgap",
        description="curvature-gap laboratory on periodic model geometries")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required,
                        help="run configuration JSON")
        sp.add_argument("--out", type=Path, required=config_required,
                        help="run directory to create")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
        sp.add_argument("--tol", type=float, default=None,
                        help="override the configured solver tolerance")

    common(sub.add_parser("curvature", help="evaluate the curvature functional"))
    sp = sub.add_parser("certify", help="check the curvature hypotheses")
    common(sp)
    sp.add_argument("--find-delta", action="store_true",
                    help="bisect for the largest certifiable delta on the region")
    sp.add_argument("--sweep", type=str, default=None,
                    help="comma-separated eps values to sweep")
    common(sub.add_parser("solve", help="run the continuation path"))
    sp = sub.add_parser("audit", help="verify the estimate chain")
    common(sp, config_required=False)
    sp.add_argument("--run", type=Path, default=None,
                    help="audit an existing solved run directory")
    sp = sub.add_parser("report", help="print a stored report")
    sp.add_argument("--run", type=Path, required=True)
    sp.add_argument("--json", action="store_true", help="dump raw JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _cap_threads()
        if args.command == "report":
            return cmd_report(args.run, args.json)
        if args.command == "audit":
            cfg = _load_config(args) if args.config else None
            if args.run is not None and args.seed is not None:
                raise ParameterError(
                    "--seed with --run would diverge from the stored config; "
                    "edit the run's config.json instead")
            return cmd_audit(cfg, args.out, args.run)
        cfg = _load_config(args)
        if args.command == "curvature":
            return cmd_curvature(cfg, args.out)
        if args.command == "certify":
            sweep = _parse_sweep(args.sweep) if args.sweep else None
            return cmd_certify(cfg, args.out, args.find_delta, sweep)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        raise ParameterError(f"unknown command {args.command!r}")
    except ParameterError as err:
        print(f"error[E{E_CONFIG:02d}]: {err}", file=sys.stderr)
        return E_CONFIG
    except (PositivityLoss, MaxIterExceeded, LinearSolveFailure) as err:
        print(f"error[E{E_SOLVER:02d}]: {type(err).__name__}: {err}",
              file=sys.stderr)
        return E_SOLVER
    except FieldChecksumError as err:
        print(f"error[E{E_IO:02d}]: {err}", file=sys.stderr)
        return E_IO
    except OSError as err:
        print(f"error[E{E_IO:02d}]: {err}", file=sys.stderr)
        return E_IO
    except AssertionError as err:
        print(f"error[E{E_INCONSISTENT:02d}]: {err}", file=sys.stderr)
        return E_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
