"""Command-line front end.

Every subcommand writes one JSON document (``"schema": "sketchreg/1"``) to
``--out`` or stdout, except ``gen`` (writes a dataset) and ``experiment``
(writes a CSV).  Exit codes: 0 success, 1 input error, 2 solver
non-convergence, 3 bound or consistency violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from . import linalg
from .bounds import (
    NonConvergenceError,
    cross_entropy_report,
    lowrank_loss_gap,
    report_from_fits,
)
from .datagen import (
    DataFormatError,
    GenerativeConfig,
    generate_generative,
    load_dataset,
    save_csv,
    save_libsvm,
    streams,
    to_standard_form,
)
from .glm import DataSet
from .mu import LPFailure, compute_mu, compute_mu_direct
from .sketch import (
    SketchMatrix,
    coordinate_sketch,
    low_rank_approx,
    pca_sketch,
    random_orthonormal_sketch,
    tightness_instance,
    top_coefficient_sketch,
)
from .solver import SeparableDataError, SolveConfig, fit_full, fit_sketched

__all__ = ["main", "parse_sketch", "ExperimentConfig", "load_experiment_config", "run_experiment"]

SCHEMA = "sketchreg/1"
EXIT_OK, EXIT_INPUT, EXIT_NONCONV, EXIT_VIOLATION = 0, 1, 2, 3
CSV_COLUMNS = [
    "instance_id", "sketch", "n", "d", "k", "lambda", "phi", "lower",
    "actual", "upper", "sandwich_ok", "mu", "runtime_ms",
]

log = logging.getLogger("sketchreg")


class InputError(Exception):
    """Bad flags, files or config; maps to exit code 1."""


# --- serialization ---------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, inf to strings, nan to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(command: str, result: dict) -> str:
    # json writes floats with repr, the shortest string that round-trips
    doc = {"schema": SCHEMA, "command": command, "result": _clean(result)}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt_float(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


# --- argument helpers ------------------------------------------------------

def parse_sketch(spec: str, data: DataSet, beta_d=None, seed: Optional[int] = None) -> SketchMatrix:
    """``coord:i,j,...`` (0-based) | ``topcoef:k`` | ``pca:k`` | ``rand:k[:seed]``."""
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "coord":
            if len(parts) != 1:
                raise ValueError
            return coordinate_sketch(data.d, [int(t) for t in parts[0].split(",") if t.strip()])
        if kind in ("topcoef", "pca"):
            if len(parts) != 1:
                raise ValueError
            k = int(parts[0])
            if kind == "pca":
                return pca_sketch(data.X, k)
            if beta_d is None:
                raise InputError("topcoef sketch needs the full-problem solution")
            return top_coefficient_sketch(beta_d, k)
        if kind == "rand":
            if len(parts) == 2:
                return random_orthonormal_sketch(data.d, int(parts[0]), int(parts[1]))
            if len(parts) == 1 and seed is not None:
                return random_orthonormal_sketch(data.d, int(parts[0]), seed)
            raise ValueError
    except InputError:
        raise
    except ValueError as exc:
        msg = str(exc) or "malformed"
        raise InputError(f"sketch {spec!r}: {msg}") from None
    raise InputError(f"sketch {spec!r}: unknown kind {kind!r} (coord, topcoef, pca, rand)")


def _sketch_k(spec: str) -> Optional[int]:
    kind, _, rest = spec.partition(":")
    try:
        if kind == "coord":
            return len([t for t in rest.split(",") if t.strip()])
        return int(rest.split(":")[0])
    except ValueError:
        return None


def _nonneg_float(name: str):
    def conv(s: str) -> float:
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}") from None
        if not (v >= 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"{name} must be finite and >= 0, got {s}")
        return v
    return conv


def _pos_float(name: str):
    def conv(s: str) -> float:
        v = _nonneg_float(name)(s)
        if v == 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0")
        return v
    return conv


def _add_data_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--data", required=required, help="dataset file")
    p.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--label-column", type=int, default=0, help="0-based CSV label column (default 0)")
    p.add_argument("--labels01", action="store_true", help="accept 0/1 labels, 0 -> -1")
    p.add_argument("--d-hint", type=int, default=None, help="libsvm feature count")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=_pos_float("--tol"), default=1e-10, help="gradient-norm tolerance")
    p.add_argument("--max-iters", type=int, default=200)


def _load(args) -> DataSet:
    kw: dict[str, Any] = {"recode01": args.labels01}
    if args.format == "csv":
        kw.update(has_header=args.header, label_column=args.label_column)
    else:
        kw.update(d_hint=args.d_hint)
    try:
        return load_dataset(args.data, args.format, **kw)
    except FileNotFoundError:
        raise InputError(f"no such file: {args.data}") from None
    except (DataFormatError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _solver_cfg(args) -> SolveConfig:
    if args.max_iters < 1:
        raise InputError("--max-iters must be >= 1")
    return SolveConfig(grad_tol=args.tol, max_iters=args.max_iters)


# --- subcommands -----------------------------------------------------------

def cmd_fit(args) -> int:
    data = _load(args)
    cfg = _solver_cfg(args)
    try:
        res = fit_full(data, args.lam, cfg)
    except SeparableDataError as exc:
        out = exc.result.to_dict()
        out["diagnostic"] = str(exc)
        _emit(dump_json("fit", out), args.out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    _emit(dump_json("fit", res.to_dict()), args.out)
    if not res.converged:
        print(f"error: solver stopped ({res.message}) at grad norm {res.grad_norm:.3e}", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_bounds(args) -> int:
    data = _load(args)
    cfg = _solver_cfg(args)
    full = fit_full(data, args.lam, cfg)
    if not full.converged:
        print(f"error: full fit did not converge ({full.message})", file=sys.stderr)
        return EXIT_NONCONV
    sk = parse_sketch(args.sketch, data, beta_d=full.beta)
    red = fit_sketched(data, sk, args.lam, cfg)
    if not red.converged:
        print(f"error: sketched fit did not converge ({red.message})", file=sys.stderr)
        return EXIT_NONCONV
    rep = report_from_fits(data, sk, args.lam, full.beta, red.beta)
    out = rep.to_dict(include_betas=args.include_betas)
    code = EXIT_OK if rep.sandwich_ok else EXIT_VIOLATION
    if args.xent:
        xe = cross_entropy_report(data, sk, full.beta, red.beta, args.lam)
        xd = xe.to_dict()
        if not args.include_betas:
            xd.pop("p")
            xd.pop("q")
        xd["chain_ok"] = bool(rep.actual <= rep.upper + rep.slack and rep.upper <= xe.bound + 1e-8)
        out["cross_entropy"] = xd
        if not xd["chain_ok"]:
            code = EXIT_VIOLATION
    _emit(dump_json("bounds", out), args.out)
    if code == EXIT_VIOLATION:
        print("error: bound violated", file=sys.stderr)
    return code


def cmd_mu(args) -> int:
    data = _load(args)
    C = args.budget
    try:
        res = compute_mu(data, C)
    except LPFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    out = res.to_dict(include_beta=args.beta)
    code = EXIT_OK
    if args.cross_check:
        try:
            alt = compute_mu_direct(data, C)
        except LPFailure as exc:
            print(f"error: cross-check LP failed: {exc}", file=sys.stderr)
            return EXIT_NONCONV
        agree = mu_agree(res, alt)
        out["cross_check"] = {"mu": alt.mu, "status": alt.status, "agree": agree}
        if not agree:
            code = EXIT_VIOLATION
            print(f"error: mu disagreement {res.mu!r} vs {alt.mu!r}", file=sys.stderr)
    _emit(dump_json("mu", out), args.out)
    return code


def mu_agree(a, b, rel: float = 1e-6) -> bool:
    if a.status != b.status:
        return False
    if a.status != "finite":
        return True
    return abs(a.mu - b.mu) <= rel * max(1.0, a.mu)


def _kv_tokens(tokens: Sequence[str], allowed: dict) -> dict:
    out = dict(allowed)
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or key not in allowed:
            raise InputError(f"--tightness: expected one of {sorted(allowed)} as key=value, got {tok!r}")
        try:
            out[key] = type(allowed[key])(val)
        except ValueError:
            raise InputError(f"--tightness: bad value for {key}: {val!r}") from None
    return out


def cmd_lowrank(args) -> int:
    if args.tightness is not None:
        kv = _kv_tokens(args.tightness, {"n": 10, "x": 50.0, "s": 1.0})
        try:
            inst = tightness_instance(kv["n"], kv["x"], kv["s"])
        except ValueError as exc:
            raise InputError(str(exc)) from None
        data, Xt, beta = inst.data(), inst.X_tilde, inst.beta
        sigma_next = kv["s"]
        k = None
    else:
        if args.data is None or args.k is None:
            raise InputError("lowrank needs --data and --k (or --tightness)")
        data = _load(args)
        if args.k < 1:
            raise InputError("--k must be >= 1")
        k = args.k
        Xt = low_rank_approx(data.X, k)
        sigma_next = linalg.spectral_norm(data.X - Xt)
        beta = _lowrank_beta(args, data)
        if beta is None:
            return EXIT_NONCONV
    gap, budget = lowrank_loss_gap(data, Xt, beta)
    ok = gap <= budget * (1 + 1e-12) + 1e-12
    out = {
        "n": data.n,
        "d": data.d,
        "k": k,
        "gap": gap,
        "budget": budget,
        "ratio": gap / budget if budget > 0 else (0.0 if gap == 0 else math.inf),
        "sigma_k_plus_1": sigma_next,
        "beta_norm": float(np.linalg.norm(beta)),
        "bound_ok": ok,
    }
    _emit(dump_json("lowrank", out), args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


def _lowrank_beta(args, data: DataSet):
    spec = args.beta
    if spec == "fit":
        res = fit_full(data, args.lam, SolveConfig(grad_tol=args.tol, max_iters=args.max_iters))
        if not res.converged:
            print(f"error: fit did not converge ({res.message})", file=sys.stderr)
            return None
        return res.beta
    kind, _, seed = spec.partition(":")
    if kind != "random" or not seed:
        raise InputError(f"--beta must be 'fit' or 'random:SEED', got {spec!r}")
    try:
        rng = streams(int(seed), 1)[0]
    except ValueError:
        raise InputError(f"--beta: bad seed {seed!r}") from None
    return rng.standard_normal(data.d)


def _parse_covariance(spec: str, d: int):
    if spec == "identity":
        return "identity"
    kind, _, vals = spec.partition(":")
    if kind != "diag":
        raise InputError(f"--covariance must be 'identity' or 'diag:v1,...,vd', got {spec!r}")
    try:
        v = np.array([float(t) for t in vals.split(",")])
    except ValueError:
        raise InputError(f"--covariance: bad number in {vals!r}") from None
    if v.shape[0] != d:
        raise InputError(f"--covariance: need {d} diagonal entries, got {v.shape[0]}")
    return v


def _beta_true(beta_norm: float, d: int) -> np.ndarray:
    b = np.zeros(d)
    b[0] = beta_norm
    return b


def cmd_gen(args) -> int:
    if args.n < 1 or args.d < 1:
        raise InputError("--n and --d must be >= 1")
    try:
        cfg = GenerativeConfig(
            n=args.n,
            d=args.d,
            covariance=_parse_covariance(args.covariance, args.d),
            sigma_x=args.sigma_x,
            beta_true=_beta_true(args.beta_norm, args.d),
            seed=args.seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    data = generate_generative(cfg)
    if args.standard_form:
        data = to_standard_form(data)
    (save_csv if args.format == "csv" else save_libsvm)(data, args.out)
    return EXIT_OK


# --- experiments -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Grid of (lambda, sketch, seed) cells over one dataset source.

    ``generative`` holds keys of the Gaussian design (n, d, sigma_x,
    covariance, beta_norm); each seed draws a fresh instance.  With ``path``
    the file is loaded once and seeds only feed ``rand:k`` sketches.
    """

    lambdas: list
    sketches: list
    seeds: list = field(default_factory=lambda: [0])
    generative: Optional[dict] = None
    path: Optional[str] = None
    fmt: str = "csv"
    header: bool = False
    label_column: int = 0
    labels01: bool = False
    grad_tol: float = 1e-10
    max_iters: int = 200
    output: Optional[str] = None
    compute_mu: bool = True
    timing: bool = False
    workers: int = 1


class ConfigError(InputError):
    pass


def _req(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"config error: {where}: {msg}")


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_experiment_config(path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"no such config file: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config error: not valid YAML: {exc}") from None
    return parse_experiment_config(raw, base=Path(path).parent)


def parse_experiment_config(raw, base: Path = Path(".")) -> ExperimentConfig:
    _req(isinstance(raw, dict), "<top>", "expected a mapping")
    known = {"dataset", "lambdas", "sketches", "seeds", "solver", "output", "compute_mu", "timing", "workers"}
    extra = sorted(set(raw) - known)
    _req(not extra, extra[0] if extra else "", f"unknown key (allowed: {', '.join(sorted(known))})")

    lams = raw.get("lambdas")
    _req(isinstance(lams, list) and len(lams) > 0, "lambdas", "need a nonempty list")
    for i, v in enumerate(lams):
        _req(_is_num(v) and v > 0, f"lambdas[{i}]", f"must be a positive number, got {v!r}")

    seeds = raw.get("seeds", [0])
    _req(isinstance(seeds, list) and len(seeds) > 0, "seeds", "need a nonempty list of integers")
    for i, s in enumerate(seeds):
        _req(isinstance(s, int) and not isinstance(s, bool) and s >= 0, f"seeds[{i}]", f"must be an integer >= 0, got {s!r}")
    _req(len(set(seeds)) == len(seeds), "seeds", "duplicate seeds")

    ds = raw.get("dataset")
    _req(isinstance(ds, dict), "dataset", "need a mapping with 'generative' or 'path'")
    cfg = ExperimentConfig(lambdas=[float(v) for v in lams], sketches=[], seeds=list(seeds))
    if "generative" in ds:
        _req("path" not in ds, "dataset", "give either 'generative' or 'path', not both")
        g = ds["generative"]
        _req(isinstance(g, dict), "dataset.generative", "expected a mapping")
        gk = {"n", "d", "sigma_x", "covariance", "beta_norm"}
        bad = sorted(set(g) - gk)
        _req(not bad, f"dataset.generative.{bad[0]}" if bad else "", "unknown key")
        for key in ("n", "d"):
            v = g.get(key)
            _req(isinstance(v, int) and not isinstance(v, bool) and v >= 1, f"dataset.generative.{key}", f"must be an integer >= 1, got {v!r}")
        for key, dflt in (("sigma_x", 1.0), ("beta_norm", 1.0)):
            v = g.get(key, dflt)
            _req(_is_num(v) and v >= 0 and (key != "sigma_x" or v > 0), f"dataset.generative.{key}", f"bad value {v!r}")
        cov = g.get("covariance", "identity")
        if isinstance(cov, list):
            _req(len(cov) == g["d"] and all(_is_num(c) and c >= 0 for c in cov), "dataset.generative.covariance", "diagonal list needs d nonnegative numbers")
        else:
            _req(cov == "identity", "dataset.generative.covariance", "must be 'identity' or a list of d variances")
        cfg.generative = {"n": g["n"], "d": g["d"], "sigma_x": float(g.get("sigma_x", 1.0)),
                          "covariance": cov, "beta_norm": float(g.get("beta_norm", 1.0))}
        d = g["d"]
    else:
        _req("path" in ds, "dataset", "need 'generative' or 'path'")
        p = ds["path"]
        _req(isinstance(p, str) and p, "dataset.path", "must be a file name")
        fmt = ds.get("format", "csv")
        _req(fmt in ("csv", "libsvm"), "dataset.format", "must be csv or libsvm")
        cfg.path = str((base / p)) if not Path(p).is_absolute() else p
        cfg.fmt = fmt
        cfg.header = bool(ds.get("header", False))
        lc = ds.get("label_column", 0)
        _req(isinstance(lc, int) and not isinstance(lc, bool), "dataset.label_column", "must be an integer")
        cfg.label_column = lc
        cfg.labels01 = bool(ds.get("labels01", False))
        d = None

    sks = raw.get("sketches")
    _req(isinstance(sks, list) and len(sks) > 0, "sketches", "need a nonempty list")
    for i, s in enumerate(sks):
        _req(isinstance(s, str), f"sketches[{i}]", "must be a string like pca:3")
        kind = s.partition(":")[0]
        _req(kind in ("coord", "topcoef", "pca", "rand"), f"sketches[{i}]", f"unknown kind in {s!r}")
        k = _sketch_k(s)
        _req(k is not None and k >= 1, f"sketches[{i}]", f"cannot read k from {s!r}")
        if d is not None:
            _req(k < d, f"sketches[{i}]", f"k={k} must be < d={d}")
    _req(len(set(sks)) == len(sks), "sketches", "duplicate entries")
    cfg.sketches = list(sks)

    solver = raw.get("solver", {}) or {}
    _req(isinstance(solver, dict), "solver", "expected a mapping")
    bad = sorted(set(solver) - {"grad_tol", "max_iters"})
    _req(not bad, f"solver.{bad[0]}" if bad else "", "unknown key")
    gt = solver.get("grad_tol", 1e-10)
    _req(_is_num(gt) and gt > 0, "solver.grad_tol", f"must be a positive number, got {gt!r}")
    mi = solver.get("max_iters", 200)
    _req(isinstance(mi, int) and not isinstance(mi, bool) and mi >= 1, "solver.max_iters", "must be an integer >= 1")
    cfg.grad_tol, cfg.max_iters = float(gt), mi

    out = raw.get("output")
    _req(out is None or (isinstance(out, str) and out), "output", "must be a file name")
    cfg.output = None if out is None else (out if Path(out).is_absolute() else str(base / out))
    for key in ("compute_mu", "timing"):
        v = raw.get(key, getattr(cfg, key))
        _req(isinstance(v, bool), key, "must be true or false")
        setattr(cfg, key, v)
    w = raw.get("workers", 1)
    _req(isinstance(w, int) and not isinstance(w, bool) and w >= 1, "workers", "must be an integer >= 1")
    cfg.workers = w
    return cfg


def _instance(cfg: ExperimentConfig, seed: int) -> tuple[str, DataSet]:
    if cfg.generative is not None:
        g = cfg.generative
        cov = g["covariance"] if g["covariance"] == "identity" else np.asarray(g["covariance"], dtype=float)
        gc = GenerativeConfig(g["n"], g["d"], cov, g["sigma_x"], _beta_true(g["beta_norm"], g["d"]), seed)
        return f"gen-s{seed}", generate_generative(gc)
    kw: dict[str, Any] = {"recode01": cfg.labels01}
    if cfg.fmt == "csv":
        kw.update(has_header=cfg.header, label_column=cfg.label_column)
    data = load_dataset(cfg.path, cfg.fmt, **kw)
    return f"{Path(cfg.path).stem}-s{seed}", data


def _run_seed(cfg: ExperimentConfig, seed: int) -> list[dict]:
    """All (lambda, sketch) cells for one seed; one instance, one mu."""
    iid, data = _instance(cfg, seed)
    for s in cfg.sketches:
        if _sketch_k(s) >= data.d:
            raise InputError(f"sketch {s!r}: k must be < d={data.d}")
    solver = SolveConfig(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters)
    mu = math.nan
    if cfg.compute_mu:
        mu = compute_mu(data).mu
    snorm_sq = linalg.spectral_norm(data.X) ** 2
    rows = []
    for li, lam in enumerate(cfg.lambdas):
        t0 = time.perf_counter()
        full = fit_full(data, lam, solver)
        t_full = time.perf_counter() - t0
        for si, spec in enumerate(cfg.sketches):
            row = {"_key": (lam, si, seed), "instance_id": iid, "sketch": spec, "n": data.n,
                   "d": data.d, "lambda": lam, "mu": mu, "converged": True}
            t1 = time.perf_counter()
            sk = parse_sketch(spec, data, beta_d=full.beta, seed=seed)
            red = fit_sketched(data, sk, lam, solver)
            row["k"] = sk.k
            if not (full.converged and red.converged):
                row.update(converged=False, phi=math.nan, lower=math.nan, actual=math.nan,
                           upper=math.nan, sandwich_ok=None)
            else:
                rep = report_from_fits(data, sk, lam, full.beta, red.beta, snorm_sq=snorm_sq)
                row.update(phi=rep.phi, lower=rep.lower, actual=rep.actual, upper=rep.upper,
                           sandwich_ok=rep.sandwich_ok)
            row["runtime_ms"] = 1000.0 * (t_full + time.perf_counter() - t1)
            rows.append(row)
    return rows


def run_experiment(cfg: ExperimentConfig) -> tuple[str, list[dict]]:
    """Returns the CSV text and the row dicts, sorted by (lambda, sketch, seed)."""
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(_run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        parts = [_run_seed(cfg, s) for s in cfg.seeds]
    rows = sorted((r for part in parts for r in part), key=lambda r: r["_key"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        ok = r["sandwich_ok"]
        w.writerow([
            r["instance_id"], r["sketch"], r["n"], r["d"], r["k"], _fmt_float(r["lambda"]),
            _fmt_float(r["phi"]), _fmt_float(r["lower"]), _fmt_float(r["actual"]),
            _fmt_float(r["upper"]), "" if ok is None else str(ok).lower(),
            _fmt_float(r["mu"]),
            # wall-clock time would break byte-identical reruns, so it is opt-in
            f"{r['runtime_ms']:.3f}" if cfg.timing else "",
        ])
    return buf.getvalue(), rows


def cmd_experiment(args) -> int:
    cfg = load_experiment_config(args.config)
    if args.out:
        cfg.output = args.out
    try:
        text, rows = run_experiment(cfg)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {exc.filename}") from None
    except DataFormatError as exc:
        raise InputError(str(exc)) from None
    _emit(text, cfg.output)
    if any(not r["converged"] for r in rows):
        print("error: some fits did not converge", file=sys.stderr)
        return EXIT_NONCONV
    if any(r["sandwich_ok"] is False for r in rows):
        print("error: sandwich bound violated in at least one cell", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sketchreg", description="Sketched logistic regression bounds and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit regularized logistic regression")
    _add_data_flags(f)
    f.add_argument("--lambda", dest="lam", type=_nonneg_float("--lambda"), required=True)
    _add_solver_flags(f)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bounds", help="forward-error bound report for one sketch")
    _add_data_flags(b)
    b.add_argument("--sketch", required=True, help="coord:i,j,... | topcoef:k | pca:k | rand:k:seed")
    b.add_argument("--lambda", dest="lam", type=_pos_float("--lambda"), required=True)
    b.add_argument("--xent", action="store_true", help="add the cross-entropy bound")
    b.add_argument("--include-betas", action="store_true")
    _add_solver_flags(b)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("mu", help="classification complexity measure")
    _add_data_flags(m)
    m.add_argument("--budget", type=_pos_float("--budget"), default=1.0, help="l1 budget C (default 1)")
    m.add_argument("--cross-check", action="store_true", help="also solve the direct formulation and compare")
    m.add_argument("--beta", action="store_true", help="include beta* and z* in the output")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mu)

    lr = sub.add_parser("lowrank", help="loss gap under a rank-k feature approximation")
    _add_data_flags(lr, required=False)
    lr.add_argument("--k", type=int)
    lr.add_argument("--beta", default="fit", help="fit | random:SEED (default fit)")
    lr.add_argument("--lambda", dest="lam", type=_nonneg_float("--lambda"), default=1.0, help="ridge weight for --beta fit")
    lr.add_argument("--tightness", nargs="*", metavar="KEY=VAL", help="scaled-identity witness, keys n, x, s")
    _add_solver_flags(lr)
    lr.add_argument("--out")
    lr.set_defaults(func=cmd_lowrank)

    g = sub.add_parser("gen", help="draw a dataset from the Gaussian generative model")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sigma-x", type=_pos_float("--sigma-x"), default=1.0)
    g.add_argument("--covariance", default="identity", help="identity | diag:v1,...,vd")
    g.add_argument("--beta-norm", type=_nonneg_float("--beta-norm"), default=1.0, help="true coefficient e_1 scaled")
    g.add_argument("--standard-form", action="store_true", help="write (-D_y X, -1)")
    g.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("experiment", help="run a lambda x sketch x seed grid from a YAML config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="CSV path (overrides the config's output)")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; the contract reserves 2 for the solver
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
