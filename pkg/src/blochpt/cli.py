"""Config-driven batch runner.

Usage: ``blochpt --config run.yaml [--mode M] [--out PATH] [--seed N] [--threads N]``.
Environment variables ``BLOCHPT_MODE``, ``BLOCHPT_OUT``, ``BLOCHPT_SEED`` and
``BLOCHPT_THREADS`` override the config file; command-line flags override both.

Exit codes: 0 ok, 1 acceptance failure, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bloch import eigenfunction_error, predict_expansion
from .core import DEFAULT_CONFIG, NumericConfig, PaperParams, validate_params
from .domains import classify, sample_sphere
from .hill import default_n_modes, solve_Tv
from .isoenergetic import find_isoenergetic_point, prune_P_b_and_A, sample_surface
from .lattice import Lattice, sublattice_geometry
from .nonres import DenominatorFloorError, F_series
from .oracle import NumericalFailure, assemble_and_solve, match_delta_state, match_eigenvalue, shell_solve
from .potential import FourierPotential, directional, load_potential
from .resonance import build_C, predict_singleres

log = logging.getLogger("blochpt")

MODES = ("spectrum", "classify", "predict-nonres", "predict-res", "predict-singleres", "bloch",
         "isoenergetic", "hill", "verify-all")
ENV_PREFIX = "BLOCHPT_"
EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class ExperimentSpec:
    mode: str
    out: Path
    seed: int = 0
    threads: int = 1
    lattice: Lattice | None = None
    potential: FourierPotential | None = None
    rhos: list = field(default_factory=list)
    preset: str = "standard"
    s: int | None = None
    numeric: NumericConfig = DEFAULT_CONFIG
    raw: dict = field(default_factory=dict)

    def params(self, rho: float) -> PaperParams:
        d = self.lattice.d
        if self.preset == "delta":
            return PaperParams.delta_preset(d, rho, self.s)
        return PaperParams.standard(d, rho, self.s)


# ---------------------------------------------------------------- config parsing

def _key_lines(text: str) -> dict:
    """Line numbers (1-based) of top-level and nested mapping keys, by dotted path."""
    out = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}{k.value}"
                out[path] = k.start_mark.line + 1
                walk(v, path + ".")

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return out


def _fail(lines: dict, key: str, msg: str, source: str):
    line = lines.get(key)
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: {key}: {msg}")


def _build_lattice(cfg: dict, lines, source) -> Lattice:
    lat = cfg.get("lattice", {"kind": "square", "dim": 2})
    if not isinstance(lat, dict):
        _fail(lines, "lattice", "must be a mapping", source)
    kind = lat.get("kind", "square")
    try:
        if kind == "square":
            return Lattice.square(int(lat.get("dim", 2)))
        if kind == "hexagonal":
            return Lattice.hexagonal()
        if kind == "basis":
            return Lattice(np.asarray(lat["basis"], dtype=float))
        if kind == "dual":
            return Lattice.from_dual(np.asarray(lat["dual"], dtype=float))
    except KeyError as exc:
        _fail(lines, "lattice", f"missing field {exc}", source)
    except (ValueError, np.linalg.LinAlgError) as exc:
        _fail(lines, f"lattice.{kind}" if f"lattice.{kind}" in lines else "lattice", str(exc), source)
    _fail(lines, "lattice.kind", f"unknown kind {kind!r} (square, hexagonal, basis, dual)", source)


def _build_potential(cfg: dict, lattice: Lattice, lines, source, base: Path) -> FourierPotential:
    if "potential" in cfg:
        path = Path(cfg["potential"])
        if not path.is_absolute():
            path = base / path
        try:
            return load_potential(path, lattice)
        except OSError as exc:
            _fail(lines, "potential", f"cannot read {path}: {exc.strerror}", source)
        except ValueError as exc:
            _fail(lines, "potential", str(exc), source)
    if "cosines" in cfg:
        amps = {}
        for k, v in (cfg["cosines"] or {}).items():
            try:
                amps[tuple(int(s) for s in str(k).split(","))] = float(v)
            except ValueError:
                _fail(lines, "cosines", f"bad entry {k!r}: {v!r}", source)
        try:
            return FourierPotential.cosines(lattice, amps)
        except ValueError as exc:
            _fail(lines, "cosines", str(exc), source)
    return FourierPotential.zero(lattice)


def load_spec(path: Path | None, overrides: dict) -> ExperimentSpec:
    text = path.read_text() if path else "{}"
    source = str(path) if path else "<defaults>"
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")
    lines = _key_lines(text)
    for k in ("mode", "out", "seed", "threads"):
        env = os.environ.get(ENV_PREFIX + k.upper())
        if env is not None:
            cfg[k] = env
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    mode = cfg.get("mode")
    if mode not in MODES:
        _fail(lines, "mode", f"must be one of {', '.join(MODES)} (got {mode!r})", source)
    try:
        seed, threads = int(cfg.get("seed", 0)), int(cfg.get("threads", 1))
    except ValueError:
        _fail(lines, "seed", "seed and threads must be integers", source)
    out = Path(cfg.get("out", f"{mode}.csv" if mode != "verify-all" else "verify_report.txt"))
    spec = ExperimentSpec(mode, out, seed, max(1, threads), raw=cfg)
    if mode == "verify-all":
        spec.numeric = _numeric(cfg, lines, source)
        return spec
    spec.lattice = _build_lattice(cfg, lines, source)
    base = path.parent if path else Path.cwd()
    spec.potential = _build_potential(cfg, spec.lattice, lines, source, base)
    rhos = cfg.get("rho", [20.0])
    rhos = rhos if isinstance(rhos, list) else [rhos]
    try:
        spec.rhos = [float(r) for r in rhos]
    except (TypeError, ValueError):
        _fail(lines, "rho", "must be a number or a list of numbers", source)
    if any(r <= 0 for r in spec.rhos):
        _fail(lines, "rho", "values must be positive", source)
    spec.preset = cfg.get("preset", "standard")
    if spec.preset not in ("standard", "delta"):
        _fail(lines, "preset", "must be 'standard' or 'delta'", source)
    spec.s = cfg.get("s")
    spec.numeric = _numeric(cfg, lines, source)
    bad = validate_params(spec.params(spec.rhos[0]))
    if bad:
        _fail(lines, "s", f"parameter constraints violated: {'; '.join(bad)}", source)
    _require(spec, lines, source)
    return spec


def _numeric(cfg, lines, source) -> NumericConfig:
    extra = cfg.get("numeric") or {}
    try:
        return DEFAULT_CONFIG.with_(**extra)
    except (TypeError, ValueError) as exc:
        _fail(lines, "numeric", str(exc), source)


def _require(spec: ExperimentSpec, lines, source):
    need = {"predict-singleres": ["delta"], "hill": ["delta"]}.get(spec.mode, [])
    for k in need:
        if k not in spec.raw:
            _fail(lines, "mode", f"mode {spec.mode} needs '{k}'", source)
    if "points" in spec.raw:
        try:
            pts = np.asarray(spec.raw["points"], dtype=float)
        except ValueError:
            _fail(lines, "points", "must be a list of coordinate lists", source)
        if pts.ndim != 2 or pts.shape[1] != spec.lattice.d:
            _fail(lines, "points", f"each point needs {spec.lattice.d} coordinates", source)


# ---------------------------------------------------------------- record producers

def _points(spec: ExperimentSpec, rho: float, rng) -> np.ndarray:
    if "points" in spec.raw:
        return np.asarray(spec.raw["points"], dtype=float)
    n = int(spec.raw.get("samples", 10))
    return sample_sphere(rng, n, spec.lattice.d, rho)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in np.asarray(v).ravel().tolist())
    return str(v)


def _oracle_match(spec, x, P, window=None):
    L = spec.lattice
    g, t = L.split(x)
    sol = shell_solve(spec.potential, t, float(np.linalg.norm(x)), spec.numeric.oracle_cutoff_margin, 4.0)
    return match_eigenvalue(sol, g, P, window=window), sol, g


def task_spectrum(spec, rho, _x):
    t = np.asarray(spec.raw.get("t", [0.0] * spec.lattice.d), dtype=float)
    if "cutoff" in spec.raw:
        sol = assemble_and_solve(spec.potential, t, float(spec.raw["cutoff"]))
    else:
        sol = shell_solve(spec.potential, t, rho, spec.numeric.oracle_cutoff_margin,
                          float(spec.raw.get("half_width", 4.0)))
    return [{"rho": rho, "index": i, "eigenvalue": float(v)} for i, v in enumerate(sol.eigenvalues)]


def task_classify(spec, rho, x):
    lab = classify(x, spec.lattice, spec.params(rho), spec.numeric)
    return [{"rho": rho, "x": x, "kind": lab.kind, "order": lab.order, "shell_ok": lab.shell_ok,
             "directions": lab.directions}]


def task_nonres(spec, rho, x):
    P = spec.params(rho)
    order = int(spec.raw.get("order", 3))
    res = F_series(x, order, spec.potential, P, spec.numeric)
    m, _, _ = _oracle_match(spec, x, P)
    lam = m.value if m else float("nan")
    return [{"rho": rho, "x": x, "predicted": res.predicted, "oracle": lam,
             "error": abs(lam - res.predicted), "min_denominator": res.min_denominator}]


def task_res(spec, rho, x):
    P = spec.params(rho)
    lab = classify(x, spec.lattice, P, spec.numeric)
    if lab.nonresonant:
        raise ValueError("point is non-resonant; use predict-nonres")
    C = build_C(x, lab.directions, spec.potential, P, spec.numeric)
    m, _, _ = _oracle_match(spec, x, P, window=4.0)
    lam = m.value if m else float("nan")
    j = int(np.argmin(np.abs(C.eigenvalues - lam)))
    return [{"rho": rho, "x": x, "kind": lab.kind, "b_k": C.index.b_k, "nearest_lambda": float(C.eigenvalues[j]),
             "oracle": lam, "error": abs(lam - C.eigenvalues[j])}]


def task_singleres(spec, rho, x):
    P = spec.params(rho)
    geom = sublattice_geometry(spec.lattice, np.asarray(spec.raw["delta"], dtype=float))
    ctx, res = predict_singleres(x, geom, spec.potential, P, int(spec.raw.get("order", 2)), spec.numeric)
    sol = shell_solve(spec.potential, ctx.t, float(np.linalg.norm(x)), spec.numeric.oracle_cutoff_margin, 4.0)
    hit = match_delta_state(sol, ctx, res.state)
    lam = hit[1] if hit else float("nan")
    return [{"rho": rho, "x": x, "j": res.state.j, "lambda_jb": res.lambda_jb, "predicted": res.predicted,
             "oracle": lam, "error": abs(lam - res.predicted)}]


def task_bloch(spec, rho, x):
    P = spec.params(rho)
    order = int(spec.raw.get("order", 2))
    m, sol, g = _oracle_match(spec, x, P)
    if m is None:
        raise NumericalFailure("no oracle eigenvalue matched this centre")
    ex = predict_expansion(x, order, spec.potential, P, spec.numeric)
    err, tail = eigenfunction_error(sol, ex, m, g)
    return [{"rho": rho, "x": x, "order_used": ex.order, "b_center": ex.b_center, "error": err, "tail": tail}]


def task_iso(spec, rho, x):
    u = x / np.linalg.norm(x)
    ip = find_isoenergetic_point(u, rho, spec.potential, spec.params(rho), spec.numeric)
    return [{"rho": rho, "direction": u, "root": ip.root, "value": ip.value, "residual": ip.residual,
             "simple": ip.simple, "iterations": ip.iterations}]


def task_hill(spec, rho, _x):
    geom = sublattice_geometry(spec.lattice, np.asarray(spec.raw["delta"], dtype=float))
    Q = directional(spec.potential, geom)
    vs = spec.raw.get("v", [0.25])
    jmax = int(spec.raw.get("jmax", 5))
    rows = []
    for v in (vs if isinstance(vs, list) else [vs]):
        sp = solve_Tv(Q, float(v), geom.delta_norm, default_n_modes(Q, jmax))
        for j in range(-jmax, jmax + 1):
            rows.append({"v": float(v), "j": j, "mu": sp.mu_of(j)})
    return rows


TASKS = {"spectrum": task_spectrum, "classify": task_classify, "predict-nonres": task_nonres,
         "predict-res": task_res, "predict-singleres": task_singleres, "bloch": task_bloch,
         "isoenergetic": task_iso, "hill": task_hill}
PER_RHO = {"spectrum", "hill"}


def _safe(fn, spec, rho, x):
    try:
        return fn(spec, rho, x), None
    except (NumericalFailure, DenominatorFloorError, ArithmeticError, ValueError) as exc:
        base = {"rho": rho}
        if x is not None:
            base["x"] = x
        return [base], f"{type(exc).__name__}: {exc}"


def run(spec: ExperimentSpec) -> int:
    if spec.mode == "verify-all":
        from .verify import format_report, run_all
        results = run_all(spec.numeric, spec.raw.get("only"))
        spec.out.write_text(format_report(results))
        print(format_report(results), end="")
        return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE
    fn = TASKS[spec.mode]
    rng = np.random.default_rng(spec.seed)
    jobs = []
    for rho in spec.rhos:
        if spec.mode in PER_RHO:
            jobs.append((rho, None))
        else:
            jobs.extend((rho, x) for x in _points(spec, rho, rng))
    with ThreadPoolExecutor(spec.threads) as pool:
        results = list(pool.map(lambda job: _safe(fn, spec, *job), jobs))
    rows, n_err = [], 0
    for recs, err in results:
        n_err += err is not None
        for r in recs:
            rows.append({**r, "error_message": err or ""})
    if spec.mode == "isoenergetic" and "surface_samples" in spec.raw:
        _write_surface(spec)
    _write_csv(spec.out, rows)
    log.info("wrote %d records to %s (%d failed)", len(rows), spec.out, n_err)
    return EXIT_NUMERICAL if n_err else EXIT_OK


def _write_surface(spec):
    out = spec.out.with_name(spec.out.stem + "_surface.csv")
    rows = []
    for rho in spec.rhos:
        P = spec.params(rho)
        pts = sample_surface(int(spec.raw["surface_samples"]), rho, spec.potential, P,
                             np.random.default_rng(spec.seed), spec.numeric)
        rep = prune_P_b_and_A(pts, spec.potential, P, spec.numeric)
        for x, why in zip(pts, rep.reasons):
            rows.append({"rho": rho, "x": x if x is not None else [math.nan] * spec.lattice.d,
                         "retained": x is not None and not why, "reason": why})
        rows.append({"rho": rho, "x": "summary", "retained": rep.retained_fraction,
                     "reason": f"sphere-relative {rep.sphere_fraction!r}"})
    _write_csv(out, rows)


def _write_csv(path: Path, rows: list):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="blochpt", description=__doc__.split("\n")[0])
    ap.add_argument("--config", type=Path, help="YAML experiment description")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.config is not None and not args.config.is_file():
        print(f"error: config file {args.config} not found", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = load_spec(args.config, {"mode": args.mode, "out": args.out, "seed": args.seed,
                                       "threads": args.threads})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(spec)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
