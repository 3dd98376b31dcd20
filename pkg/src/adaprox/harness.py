"""Experiment front end: dataset I/O, trace persistence, and grid execution."""

from __future__ import annotations

import configparser
import io
import json
import math
import os
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .adaptive import RhoSequence
from .core import UsageError
from .problems import (
    FactorShape,
    SparseDesign,
    lasso_problem,
    lasso_synthetic,
    logistic_gamma,
    logistic_problem,
    logistic_synthetic,
    mc_problem,
    mc_synthetic,
    nmf_problem,
    nmf_synthetic,
    quadratic_problem,
    rng,
)
from .solver import IterationRecord, RunResult, SolverConfig, Trace, run


class ParseError(UsageError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# LIBSVM text format

_LABEL_MAP = {"1": 1.0, "+1": 1.0, "0": 0.0, "-1": 0.0}


def parse_libsvm(source) -> SparseDesign:
    """Parse `<label> <idx>:<val> ...` lines (1-based, strictly increasing
    indices) into a 0-based SparseDesign. Blank lines and # comments skipped."""
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [ln.rstrip("\n") for ln in source]
    rows: List[Tuple[Tuple[int, float], ...]] = []
    labels: List[float] = []
    n_max = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] not in _LABEL_MAP:
            raise ParseError(f"unknown label {tokens[0]!r}", lineno)
        labels.append(_LABEL_MAP[tokens[0]])
        entries = []
        prev_idx = 0
        for tok in tokens[1:]:
            idx_s, _, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed token {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} must be >= 1", lineno)
            if idx <= prev_idx:
                raise ParseError("indices must be strictly increasing", lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            entries.append((idx - 1, val))
            prev_idx = idx
        n_max = max(n_max, prev_idx)
        rows.append(tuple(entries))
    if not rows:
        raise UsageError("empty dataset")
    return SparseDesign(m=len(rows), n=max(n_max, 1), rows=rows,
                        labels=np.asarray(labels))


def write_libsvm(design: SparseDesign, stream) -> None:
    for row, label in zip(design.rows, design.labels):
        parts = ["1" if label == 1.0 else "0"]
        parts.extend(f"{idx + 1}:{format(val, '.17g')}" for idx, val in row)
        stream.write(" ".join(parts) + "\n")


# ---------------------------------------------------------------------------
# Trace persistence

TRACE_COLUMNS = ("k", "elapsed_s", "f", "F", "gradmap_norm", "lambda",
                 "L_k", "l_k", "rho", "n_grad", "n_prox")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _record_row(r: IterationRecord) -> list:
    return [r.k, r.elapsed_seconds, r.f_value, r.F_value, r.gradmap_norm,
            r.lam, r.L_k, r.l_k, r.rho_used, r.n_gradient, r.n_prox]


def write_trace(trace: Trace, fmt: str, path: str) -> None:
    """Persist a trace: CSV (17 significant digits, LF endings) or JSON with a
    run-metadata object."""
    records = trace.all_records()
    if not records:
        raise UsageError("trace is empty")
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        for r in records:
            row = _record_row(r)
            buf.write(",".join([str(row[0])] + [_fmt(v) for v in row[1:9]]
                              + [str(row[9]), str(row[10])]) + "\n")
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    elif fmt == "json":
        payload = {
            "metadata": {
                "solver": trace.engine,
                "seed": trace.seed,
                "problem": trace.problem_name,
                "termination": trace.termination,
                "lambda0": trace.lambda0,
            },
            "records": [dict(zip(TRACE_COLUMNS, _record_row(r))) for r in records],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise UsageError(f"unknown trace format {fmt!r}")


def _records_from_dicts(dicts) -> List[IterationRecord]:
    recs = []
    for d in dicts:
        recs.append(IterationRecord(
            k=int(d["k"]), f_value=float(d["f"]), F_value=float(d["F"]),
            gradmap_norm=float(d["gradmap_norm"]), lam=float(d["lambda"]),
            L_k=float(d["L_k"]), l_k=float(d["l_k"]), rho_used=float(d["rho"]),
            elapsed_seconds=float(d["elapsed_s"]), n_value=0,
            n_gradient=int(d["n_grad"]), n_prox=int(d["n_prox"])))
    return recs


def read_trace(path: str) -> Trace:
    """Load a persisted trace. CSV carries no metadata, so the engine defaults
    to the primary branch rule there."""
    if path.endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        meta = payload["metadata"]
        recs = _records_from_dicts(payload["records"])
        engine = meta["solver"]
        lambda0 = float(meta["lambda0"])
        seed = meta.get("seed")
        problem_name = meta.get("problem", "")
        termination = meta.get("termination", "")
    else:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        header = lines[0].split(",")
        if tuple(header) != TRACE_COLUMNS:
            raise UsageError(f"unexpected CSV header in {path}")
        recs = _records_from_dicts(dict(zip(TRACE_COLUMNS, ln.split(","))) for ln in lines[1:])
        engine, seed, problem_name, termination = "adapgnc", None, "", ""
        lambda0 = recs[0].lam if recs else 1.0
    if not recs or recs[0].k != 0:
        raise UsageError(f"trace {path} lacks the k=0 record")
    return Trace(problem_name=problem_name, engine=engine, lambda0=lambda0,
                 init=recs[0], records=recs[1:], termination=termination,
                 seed=seed)


# ---------------------------------------------------------------------------
# Experiment configuration

_RHO_NAMES = ("rho1", "rho2", "zero")


def make_rho(name: str) -> RhoSequence:
    if name == "rho1":
        return RhoSequence.rho1()
    if name == "rho2":
        return RhoSequence.rho2()
    if name == "zero":
        return RhoSequence.zero()
    raise UsageError(f"unknown rho sequence {name!r}; choose from {_RHO_NAMES}")


def rho_name(seq: RhoSequence) -> str:
    return seq.kind


@dataclass
class ExperimentConfig:
    problem: Dict[str, str]
    solvers: List[Tuple[str, SolverConfig]]
    seeds: List[int]
    out_dir: str
    trace_format: str = "csv"

    def __post_init__(self):
        if not self.solvers:
            raise UsageError("need at least one solver")
        if not self.seeds:
            raise UsageError("need at least one seed")
        if self.trace_format not in ("csv", "json"):
            raise UsageError("trace format must be csv or json")


def load_config(path: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    if "problem" not in cp or "run" not in cp:
        raise UsageError("config needs [problem] and [run] sections")
    problem = dict(cp["problem"])
    runsec = cp["run"]
    seeds = [int(s) for s in runsec.get("seeds", "0").split()]
    out_dir = runsec.get("out", "out")
    fmt = runsec.get("format", "csv")
    solvers = []
    for section in cp.sections():
        if not section.startswith("solver "):
            continue
        name = section[len("solver "):]
        s = cp[section]
        sc = SolverConfig(
            engine=s.get("engine", "adapgnc"),
            rho=make_rho(s.get("rho", "rho2")),
            lambda0=s.getfloat("lambda0", 1.0),
            fixed_step=s.getfloat("fixed_step", fallback=None),
            max_iters=s.getint("max_iters", 1000),
            max_seconds=s.getfloat("max_seconds", math.inf),
            gradmap_tol=s.getfloat("tol", 0.0),
        )
        sc.validate()
        solvers.append((name, sc))
    return ExperimentConfig(problem=problem, solvers=solvers, seeds=seeds,
                            out_dir=out_dir, trace_format=fmt)


def save_config(config: ExperimentConfig, path: str) -> None:
    cp = configparser.ConfigParser()
    cp["problem"] = {k: str(v) for k, v in config.problem.items()}
    cp["run"] = {
        "seeds": " ".join(str(s) for s in config.seeds),
        "out": config.out_dir,
        "format": config.trace_format,
    }
    for name, sc in config.solvers:
        sec = f"solver {name}"
        cp[sec] = {
            "engine": sc.engine,
            "rho": rho_name(sc.rho),
            "lambda0": _fmt(sc.lambda0),
            "max_iters": str(sc.max_iters),
            "tol": _fmt(sc.gradmap_tol),
        }
        if sc.fixed_step is not None:
            cp[sec]["fixed_step"] = _fmt(sc.fixed_step)
        if math.isfinite(sc.max_seconds):
            cp[sec]["max_seconds"] = _fmt(sc.max_seconds)
    with open(path, "w") as fh:
        cp.write(fh)


# ---------------------------------------------------------------------------
# Problem construction from a spec dict


def build_problem(spec: Dict[str, str], seed: int):
    """Instantiate (problem, x0) from a flat problem spec and a seed."""
    kind = spec.get("kind", "quadratic")
    if kind == "quadratic":
        dim = int(spec.get("dim", 10))
        eigs = np.linspace(float(spec.get("eig_min", 1.0)),
                           float(spec.get("eig_max", 1.0)), dim)
        problem = quadratic_problem(eigs, seed=seed)
        x0 = rng(seed + 1).standard_normal(dim)
    elif kind == "logistic":
        if "data" in spec:
            with open(spec["data"]) as fh:
                design = parse_libsvm(fh)
        else:
            design = logistic_synthetic(int(spec.get("m", 200)),
                                        int(spec.get("n", 20)), seed)
        gamma = float(spec["gamma"]) if "gamma" in spec else logistic_gamma(design)
        problem = logistic_problem(design, gamma)
        x0 = np.zeros(design.n)
    elif kind == "lasso":
        A, b, w = lasso_synthetic(int(spec.get("m", 100)), int(spec.get("n", 50)), seed)
        if "l1_weight" in spec:
            w = float(spec["l1_weight"])
        problem = lasso_problem(A, b, w)
        x0 = np.zeros(A.shape[1])
    elif kind == "nmf":
        n = int(spec.get("n", 200))
        r = int(spec.get("r", 5))
        m = int(spec.get("m", 300))
        A = nmf_synthetic(n, r, m, seed)
        shape = FactorShape(p=n, q=m, r=r)
        problem = nmf_problem(A, shape)
        x0 = np.abs(rng(seed + 1).standard_normal(shape.dim))
    elif kind == "mc":
        p = int(spec.get("p", 15))
        q = int(spec.get("q", 12))
        r = int(spec.get("r", 3))
        N = int(spec.get("nobs", 60))
        noise = float(spec.get("noise", 0.0))
        obs = mc_synthetic(p, q, r, N, noise, seed)
        shape = FactorShape(p=p, q=q, r=r)
        problem = mc_problem(obs, shape)
        x0 = rng(seed + 1).standard_normal(shape.dim)
    else:
        raise UsageError(f"unknown problem kind {kind!r}")
    return problem, x0


# ---------------------------------------------------------------------------
# Grid execution


@dataclass
class ComparisonRow:
    solver: str
    seed: int
    iterations: int
    grad_res: float
    best_F: float
    opt_gap: float
    wall_seconds: float
    termination: str
    error: Optional[str] = None


def run_experiment(config: ExperimentConfig):
    """Execute every (solver, seed) cell, persist one trace per cell, and
    return comparison rows with OptGap measured against the grid minimum."""
    os.makedirs(config.out_dir, exist_ok=True)
    probe = os.path.join(config.out_dir, ".writable")
    try:
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise UsageError(f"output directory not writable: {config.out_dir}: {exc}") from exc

    rows: List[ComparisonRow] = []
    results: List[Optional[RunResult]] = []
    for name, sc in config.solvers:
        for seed in config.seeds:
            t_start = time.perf_counter()
            try:
                problem, x0 = build_problem(config.problem, seed)
                result = run(problem, x0, replace(sc), seed=seed)
                wall = time.perf_counter() - t_start
                path = os.path.join(config.out_dir,
                                    f"{name}_seed{seed}.{config.trace_format}")
                write_trace(result.trace, config.trace_format, path)
                rows.append(ComparisonRow(
                    solver=name, seed=seed,
                    iterations=len(result.trace.records),
                    grad_res=result.trace.min_gradmap(),
                    best_F=result.best_F, opt_gap=math.nan,
                    wall_seconds=wall, termination=result.termination))
                results.append(result)
            except Exception as exc:  # noqa: BLE001 - cell failures never kill the grid
                rows.append(ComparisonRow(
                    solver=name, seed=seed, iterations=0, grad_res=math.nan,
                    best_F=math.nan, opt_gap=math.nan,
                    wall_seconds=time.perf_counter() - t_start,
                    termination="error", error=str(exc)))
                results.append(None)

    finite = [r.best_F for r in rows if math.isfinite(r.best_F)]
    fhat = min(finite) if finite else math.nan
    for r in rows:
        if math.isfinite(r.best_F):
            r.opt_gap = r.best_F - fhat
    return rows, fhat


def write_summary(rows: List[ComparisonRow], fhat: float, path: str) -> None:
    payload = {
        "fstar_hat": fhat,
        "rows": [
            {"solver": r.solver, "seed": r.seed, "iterations": r.iterations,
             "grad_res": r.grad_res, "opt_gap": r.opt_gap,
             "wall_seconds": r.wall_seconds, "termination": r.termination,
             "error": r.error}
            for r in rows
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def summary_table(rows: List[ComparisonRow]) -> str:
    header = f"{'solver':<16}{'seed':>6}{'iters':>8}{'GradRes':>12}{'OptGap':>12}{'time_s':>9}  term"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r.solver:<16}{r.seed:>6}{r.iterations:>8}{r.grad_res:>12.3e}"
            f"{r.opt_gap:>12.3e}{r.wall_seconds:>9.2f}  {r.termination}")
    return "\n".join(lines)
