"""Batch front door: every computation in the analysis as a subcommand.

Each subcommand reads a JSON config, writes machine-readable artifacts
into an output directory, and exits 0 iff every check in the invoked
suite passes.  Artifacts are deterministic given (config, seed): JSON is
emitted with sorted keys, exact values are serialized as strings, and
floats round-trip through repr.  The seed is recorded in every output
header.  Presets for the standard scenarios ship with the package under
``heisenkep/presets``; a bare config name is resolved there when no file
of that name exists.

Grammar::

    heisenkep <simulate|verify|ve|galois|factorize|sweep>
        --config <path> [--out <dir>] [--seed <u64>] [--format csv|json]

``HEISENKEP_THREADS`` caps the fan-out of the sweep subcommand.
"""

from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import click
import numpy as np

from .exactalg import ExactMatrix, ExactPoly, ExactRatFunc, ExactScalar
from .heisenmodel import (
    GroupElement,
    PhaseState2B,
    SystemSpec,
    condition_coefficient_a,
    first_integrals,
    hamiltonian,
    particular_solution,
    poisson_bracket,
    rho,
)
from .dynamics import (
    ExtendedState,
    IntegrationError,
    IntegratorConfig,
    extended_poisson_build,
    integrate,
    integrate_extended,
    max_line_deviation,
    monitor_conserved,
    trajectory_to_csv,
)
from .variational import (
    GaugeMatrix,
    LinearSystem,
    cyclic_to_scalar,
    exp_substitution,
    gauge_transform,
    reduction_gauge,
    reduction_gauge_resonant,
    ve_along,
    ve_blocks_transformed,
    ve_twobody_blocks,
)
from .galois import (
    exterior_square,
    factorization_basis,
    liouvillian_verdict_o3r,
    parabolic_from_ode,
    plucker_check,
    rehm_classify,
    system_exp_solutions,
)


# ---------------------------------------------------------------------------
# Run configuration and plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: subcommand, parsed config, and output policy."""

    subcommand: str
    config: dict
    config_name: str
    out_dir: Path
    seed: int
    fmt: str = "json"

    def header(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config": self.config_name,
            "seed": self.seed,
            "format": self.fmt,
        }


def preset_path(name: str) -> Path:
    """Path of a packaged preset config (name with or without .json)."""
    if not name.endswith(".json"):
        name += ".json"
    return Path(str(resources.files("heisenkep") / "presets" / name))


def _load_config(subcommand: str, config, out_dir, seed, fmt) -> RunConfig:
    path = Path(config)
    if not path.exists() and os.sep not in str(config):
        candidate = preset_path(str(config))
        if candidate.exists():
            path = candidate
    if not path.exists():
        raise click.ClickException(f"config file not found: {config}")
    doc = json.loads(path.read_text())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return RunConfig(subcommand, doc, path.name, out, int(seed), fmt)


def _write_json(rc: RunConfig, name: str, doc: dict) -> Path:
    doc = dict(doc)
    doc["header"] = rc.header()
    path = rc.out_dir / name
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _frac(v) -> Fraction:
    return Fraction(str(v))


def _matrix_strs(A: ExactMatrix) -> list:
    return [[str(A[i, j]) for j in range(A.cols)] for i in range(A.rows)]


def _finish(rc: RunConfig, name: str, doc: dict, ok: bool):
    path = _write_json(rc, name, doc)
    click.echo(f"{'PASS' if ok else 'FAIL'} {path}")
    if not ok:
        raise SystemExit(1)


def _common(f):
    for opt in (
        click.option("--format", "fmt", default="json",
                     type=click.Choice(["csv", "json"]),
                     help="Tabular artifact format (exact data is always JSON)."),
        click.option("--seed", default=0, type=click.IntRange(0, 2**64 - 1),
                     help="RNG seed, recorded in every output header."),
        click.option("--out", "out_dir", default=".",
                     type=click.Path(file_okay=False),
                     help="Output directory (created if missing)."),
        click.option("--config", required=True,
                     help="JSON config path or packaged preset name."),
    ):
        f = opt(f)
    return f


@click.group()
@click.version_option(package_name="heisenkep")
def main():
    """Reproduce the integrability analysis as batch subcommands."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _initial_state(spec: SystemSpec, cfg: dict) -> np.ndarray:
    if "particular" in cfg:
        s = particular_solution(spec, {
            k: float(_frac(v)) for k, v in cfg["particular"].items()
        }, cfg.get("t0", 0.0))
        return s.to_array()
    return np.asarray(cfg["state"], dtype=float)


def _line_deviation(spec: SystemSpec, traj, n: int = 300) -> float:
    ts = np.linspace(traj.t[0], traj.t[-1], n)
    pts = traj.at(ts)
    if spec.kind == "one-body":
        return max_line_deviation(pts[:, :3])
    return max(max_line_deviation(pts[:, :3]), max_line_deviation(pts[:, 3:6]))


def _simulate_checks(spec, traj, rep, thresholds: dict) -> dict:
    checks = {}
    for key, tol in thresholds.items():
        if key == "line":
            val = _line_deviation(spec, traj)
        elif key == "djdt":
            val = rep.djdt_residual_max
        elif key == "j_drift":
            val = rep.j_drift
        else:
            val = rep.drifts[key]
        checks[key] = {"value": float(val), "tol": float(tol),
                       "pass": bool(val < tol)}
    return checks


@main.command()
@_common
def simulate(config, out_dir, seed, fmt):
    """Integrate one orbit, monitor its invariants, export the trajectory."""
    rc = _load_config("simulate", config, out_dir, seed, fmt)
    spec = SystemSpec.from_json(rc.config["system"])
    icfg = IntegratorConfig(**rc.config.get("integrator", {}))
    s0 = _initial_state(spec, rc.config)
    try:
        traj = integrate(spec, s0, icfg)
    except IntegrationError as e:
        doc = {"system": spec.to_json(), "flagged_event": "integration_failure",
               "last_t": float(e.last_t), "last_state": list(map(float, e.last_state)),
               "all_pass": False}
        _finish(rc, "report.json", doc, ok=False)
        return

    if rc.fmt == "csv":
        trajectory_to_csv(spec, traj, rc.out_dir / "trajectory.csv",
                          header_meta=rc.header())
    else:
        (rc.out_dir / "trajectory.json").write_text(json.dumps({
            "header": rc.header(), "t": traj.t.tolist(), "y": traj.y.tolist(),
        }, sort_keys=True) + "\n")

    if traj.flagged_event is not None:
        doc = {"system": spec.to_json(), "flagged_event": traj.flagged_event,
               "last_t": float(traj.t[-1]),
               "last_state": traj.y[-1].tolist(), "all_pass": False}
        _finish(rc, "report.json", doc, ok=False)
        return

    rep = monitor_conserved(spec, traj)
    thresholds = rc.config.get("thresholds", {"H": 1e-9})
    checks = _simulate_checks(spec, traj, rep, thresholds)
    ok = all(c["pass"] for c in checks.values())
    doc = {
        "system": spec.to_json(),
        "flagged_event": None,
        "monitor": rep.to_json(),
        "max_line_deviation": _line_deviation(spec, traj),
        "checks": checks,
        "all_pass": ok,
    }
    _finish(rc, "report.json", doc, ok=ok)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _probe_states(spec: SystemSpec, rng, n: int) -> list:
    out = []
    while len(out) < n:
        a = rng.uniform(-1.5, 1.5, size=spec.dim)
        if spec.kind == "one-body":
            r = rho(GroupElement(a[0], a[1], a[2]))
        else:
            r = rho(PhaseState2B.from_array(a).relative)
        if r > 0.4:
            out.append(a)
    return out


def _bracket_rows(spec: SystemSpec, states) -> list:
    H = lambda s: hamiltonian(spec, s)
    J = lambda s: first_integrals(spec, s)["J"]
    rows = []

    def row(name, residual_fn, tol):
        res = max(abs(residual_fn(a)) for a in states)
        rows.append({"name": name, "residual": float(res), "tol": tol,
                     "pass": bool(res < tol)})

    row("{J,H} - 2H", lambda a: poisson_bracket(J, H, a) - 2 * H(a), 1e-6)
    if spec.kind == "one-body":
        pth = lambda s: first_integrals(spec, s)["p_theta"]
        row("{p_theta,H}", lambda a: poisson_bracket(pth, H, a), 1e-6)
        return rows
    I = {k: (lambda s, k=k: first_integrals(spec, s)[k])
         for k in ("I1", "I2", "I3", "I4")}
    row("{I1,I2} - I3",
        lambda a: poisson_bracket(I["I1"], I["I2"], a)
        - first_integrals(spec, a)["I3"], 1e-6)
    row("{I1,I4} - I2",
        lambda a: poisson_bracket(I["I1"], I["I4"], a)
        - first_integrals(spec, a)["I2"], 1e-6)
    row("{I2,I4} + I1",
        lambda a: poisson_bracket(I["I2"], I["I4"], a)
        + first_integrals(spec, a)["I1"], 1e-6)
    for k in ("I1", "I2", "I3", "I4"):
        row(f"{{{k},H}}", lambda a, k=k: poisson_bracket(I[k], H, a), 1e-6)
    return rows


def _extended_rows(spec: SystemSpec, rng, n_points: int) -> list:
    lifted = extended_poisson_build(spec)
    rows = []

    def leaf_point():
        q = rng.uniform(-2, 2, size=3)
        p = rng.uniform(-2, 2, size=3)
        u = math.sqrt((q[0] ** 2 + q[1] ** 2) ** 2 + 16 * q[2] ** 2)
        return np.concatenate([q, p, [u]])

    pts = [leaf_point() for _ in range(n_points)]
    rank_fail = sum(
        1 for x in pts if np.linalg.matrix_rank(lifted.J(x), tol=1e-10) != 6
    )
    rows.append({"name": "rank(J) = 2n", "residual": float(rank_fail),
                 "tol": 0.5, "pass": rank_fail == 0})
    anti = max(float(np.max(np.abs(lifted.J(x) + lifted.J(x).T))) for x in pts)
    rows.append({"name": "J antisymmetry", "residual": anti, "tol": 1e-12,
                 "pass": anti < 1e-12})
    cas = max(
        abs(lifted.bracket(lifted.P, f, x, grad_f=lifted.grad_P))
        for x in pts[:25]
        for f in [lifted.K] + [lambda s, i=i: float(s[i]) ** 2 for i in range(7)]
    )
    rows.append({"name": "{P,.} Casimir", "residual": float(cas), "tol": 1e-10,
                 "pass": cas < 1e-10})

    q0, p0 = (1.0, 0.0, 0.2), (0.3, 1.2, 0.1)
    u0 = math.sqrt((q0[0] ** 2 + q0[1] ** 2) ** 2 + 16 * q0[2] ** 2)
    tight = IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12, t_end=10.0)
    direct = integrate(spec, np.array(q0 + p0), tight)
    ext = integrate_extended(lifted, ExtendedState(q0, p0, u0), tight)
    ts = np.linspace(0, 10, 200)
    proj = float(np.max(np.abs(ext.at(ts)[:, :6] - direct.at(ts))))
    rows.append({"name": "extended-flow projection", "residual": proj,
                 "tol": 1e-6, "pass": proj < 1e-6})
    pd = float(ext.stats["max_casimir_residual"])
    rows.append({"name": "P drift", "residual": pd, "tol": 1e-8,
                 "pass": pd < 1e-8})
    return rows


def _rows_to_csv(rows, path: Path, header: dict):
    lines = ["# " + json.dumps(header, sort_keys=True),
             "name,residual,tol,pass"]
    for r in rows:
        lines.append(f"{r['name']},{r['residual']!r},{r['tol']!r},{r['pass']}")
    path.write_text("\n".join(lines) + "\n")


@main.command()
@_common
def verify(config, out_dir, seed, fmt):
    """Run the bracket/identity suites and report residuals per identity."""
    rc = _load_config("verify", config, out_dir, seed, fmt)
    spec = SystemSpec.from_json(rc.config["system"])
    suites = rc.config.get(
        "suites", ["brackets"] + (["extended"] if spec.kind == "one-body" else [])
    )
    rng = np.random.default_rng(rc.seed)
    rows = []
    if "brackets" in suites:
        states = _probe_states(spec, rng, int(rc.config.get("n_probes", 50)))
        rows += _bracket_rows(spec, states)
    if "extended" in suites:
        if spec.kind != "one-body":
            raise click.ClickException("extended suite requires the one-body system")
        rows += _extended_rows(spec, rng, int(rc.config.get("n_points", 100)))
    ok = all(r["pass"] for r in rows)
    if rc.fmt == "csv":
        _rows_to_csv(rows, rc.out_dir / "verify.csv", rc.header())
    doc = {"system": spec.to_json(), "rows": rows, "all_pass": ok}
    _finish(rc, "verify.json", doc, ok=ok)


# ---------------------------------------------------------------------------
# ve
# ---------------------------------------------------------------------------

def _sqrt_fraction(q: Fraction) -> Fraction | None:
    if q <= 0:
        return None
    rn = math.isqrt(q.numerator)
    rd = math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def _kepler_c(cfg: dict, kappa: Fraction) -> Fraction:
    if "c" in cfg:
        return _frac(cfg["c"])
    a = _frac(cfg["a"])
    c = _sqrt_fraction(kappa / (8 * a))
    if c is None:
        raise click.ClickException(
            "a must satisfy kappa/(8a) = c^2 for a rational c; give c directly"
        )
    return c


def _parabolic_json(p) -> dict:
    return {
        "alpha_sq": str(p.alpha_sq),
        "two_alpha_beta": str(p.two_alpha_beta),
        "gamma": str(p.gamma),
        "ratio_squared": str(p.ratio_squared()),
    }


def _ve_kepler(cfg: dict) -> dict:
    kappa = _frac(cfg.get("kappa", 1))
    spec = SystemSpec("one-body", kappa)
    c = _kepler_c(cfg, kappa)
    a = condition_coefficient_a(spec, c)
    full = ve_along(spec, {"c": c})
    blocks = ve_blocks_transformed(spec, c)
    ode = cyclic_to_scalar(blocks.subsystem([0, 1]), 0)
    # y = w exp(-i a t^2 / 2) removes the first-derivative term
    reduced = exp_substitution(ode, ExactPoly([0, 0, ExactScalar(0, -a / 2)]))
    return {
        "system": "kepler",
        "a": str(a),
        "c": str(c),
        "ve_matrix": _matrix_strs(full.A),
        "weil_block": _matrix_strs(full.subsystem(range(4)).A),
        "blocks_transformed": _matrix_strs(blocks.A),
        "scalar_ode": [str(cf) for cf in ode.coeffs],
        "reduced_ode": [str(cf) for cf in reduced.coeffs],
        "parabolic": _parabolic_json(parabolic_from_ode(reduced)),
    }


def _ve_twobody(cfg: dict) -> dict:
    mu = _frac(cfg["mu"])
    tau0 = _frac(cfg.get("tau0", 0))
    w2 = _frac(cfg.get("w2", 1))
    blocks = ve_twobody_blocks(mu, tau0, w2)
    a1 = blocks.subsystem(range(4))
    out = {
        "system": "twobody",
        "mu": str(ExactScalar.coerce(mu)),
        "tau0": str(ExactScalar.coerce(tau0)),
        "w2": str(ExactScalar.coerce(w2)),
        "blocks": _matrix_strs(blocks.A),
        "A1": _matrix_strs(a1.A),
    }
    if mu == -1:
        if tau0 != 1:
            raise click.ClickException("the resonant reduction needs tau0 = 1")
        g = gauge_transform(a1, reduction_gauge_resonant())
        sub3 = g.subsystem(range(3))
        ode = cyclic_to_scalar(sub3, 1)
        o3r = exp_substitution(ode, ExactPoly([0, 0, Fraction(2, 3)], var="tau"))
        out.update({
            "A1_reduced": _matrix_strs(g.A),
            "scalar_ode": [str(cf) for cf in ode.coeffs],
            "o3r_coefficients": [str(cf) for cf in o3r.coeffs],
        })
        return out
    if tau0 != 0:
        raise click.ClickException("the generic reduction needs tau0 = 0")
    g = gauge_transform(a1, reduction_gauge(mu))
    ode = cyclic_to_scalar(g.subsystem([1, 2]), 0)
    reduced = exp_substitution(
        ode, ExactPoly([0, 0, (1 - mu) / 2], var="tau")
    )
    out.update({
        "A1_reduced": _matrix_strs(g.A),
        "scalar_ode": [str(cf) for cf in ode.coeffs],
        "reduced_ode": [str(cf) for cf in reduced.coeffs],
        "parabolic": _parabolic_json(parabolic_from_ode(reduced)),
    })
    return out


@main.command()
@_common
def ve(config, out_dir, seed, fmt):
    """Exact variational matrices and the gauge-reduced scalar equations."""
    rc = _load_config("ve", config, out_dir, seed, fmt)
    try:
        if rc.config["system"] == "kepler":
            doc = _ve_kepler(rc.config)
        elif rc.config["system"] == "twobody":
            doc = _ve_twobody(rc.config)
        else:
            raise click.ClickException(
                f"unknown system {rc.config['system']!r}"
            )
    except ValueError as e:
        raise click.ClickException(str(e)) from e
    _finish(rc, "ve.json", doc, ok=True)


# ---------------------------------------------------------------------------
# galois
# ---------------------------------------------------------------------------

def _galois_kepler(cfg: dict) -> dict:
    data = _ve_kepler(cfg)
    spec = SystemSpec("one-body", _frac(cfg.get("kappa", 1)))
    c = _kepler_c(cfg, _frac(cfg.get("kappa", 1)))
    blocks = ve_blocks_transformed(spec, c)
    ode = cyclic_to_scalar(blocks.subsystem([0, 1]), 0)
    a = condition_coefficient_a(spec, c)
    reduced = exp_substitution(ode, ExactPoly([0, 0, ExactScalar(0, -a / 2)]))
    verdict = rehm_classify(parabolic_from_ode(reduced))
    return {"branch": "kepler", "a": data["a"],
            "parabolic": data["parabolic"], "verdict": json.loads(verdict.to_json())}


def _galois_twobody_generic(cfg: dict) -> dict:
    mu = _frac(cfg["mu"])
    a1 = ve_twobody_blocks(mu, 0, _frac(cfg.get("w2", 1))).subsystem(range(4))
    g = gauge_transform(a1, reduction_gauge(mu))
    ode = cyclic_to_scalar(g.subsystem([1, 2]), 0)
    reduced = exp_substitution(ode, ExactPoly([0, 0, (1 - mu) / 2], var="tau"))
    p = parabolic_from_ode(reduced)
    verdict = rehm_classify(p)
    return {"branch": "twobody", "mu": str(ExactScalar.coerce(mu)),
            "parabolic": _parabolic_json(p), "verdict": json.loads(verdict.to_json())}


@main.command()
@_common
def galois(config, out_dir, seed, fmt):
    """Non-solvability verdict for the chosen branch of the analysis."""
    rc = _load_config("galois", config, out_dir, seed, fmt)
    branch = rc.config["branch"]
    try:
        if branch == "kepler":
            doc = _galois_kepler(rc.config)
        elif branch == "twobody" and _frac(rc.config["mu"]) != -1:
            doc = _galois_twobody_generic(rc.config)
        elif branch == "twobody":
            verdict = liouvillian_verdict_o3r()
            doc = {"branch": "twobody", "mu": "-1",
                   "verdict": json.loads(verdict.to_json())}
        else:
            raise click.ClickException(f"unknown branch {branch!r}")
    except ValueError as e:
        raise click.ClickException(str(e)) from e
    ok = doc["verdict"]["tag"] == "NotSolvableIdentityComponent"
    _finish(rc, "galois.json", doc, ok=ok)


# ---------------------------------------------------------------------------
# factorize
# ---------------------------------------------------------------------------

def _input_matrix(cfg: dict) -> ExactMatrix:
    if "matrix" in cfg:
        rows = [
            [ExactScalar.parse(e) if isinstance(e, str) else e for e in row]
            for row in cfg["matrix"]
        ]
        return ExactMatrix(rows)
    kappa = _frac(cfg.get("kappa", 1))
    spec = SystemSpec("one-body", kappa)
    c = _kepler_c(cfg, kappa) if ("a" in cfg or "c" in cfg) else Fraction(1, 4)
    return ve_along(spec, {"c": c}).subsystem(range(4)).A


def _quadric_value(v: list) -> ExactRatFunc:
    z01, z02, z03, z12, z13, z23 = v
    return z03 * z12 - z02 * z13 + z23 * z01


@main.command()
@_common
def factorize(config, out_dir, seed, fmt):
    """Factor the 4-dim variational block through its exterior square."""
    rc = _load_config("factorize", config, out_dir, seed, fmt)
    try:
        A = _input_matrix(rc.config)
        E = exterior_square(A)
    except ValueError as e:
        raise click.ClickException(str(e)) from e
    sols = system_exp_solutions(E)
    sol_docs = []
    decomposable = []
    for s, v in sols:
        ok = plucker_check(v)
        sol_docs.append({
            "exponent": str(s),
            "direction": [str(e) for e in v],
            "plucker_quadric": str(_quadric_value(list(v))),
            "decomposable": ok,
        })
        if ok and not s.is_zero():
            decomposable.append(v)
    doc = {"exterior_square": _matrix_strs(E), "solutions": sol_docs}
    if rc.config.get("plucker_only", False):
        _finish(rc, "factorize.json", doc, ok=True)
        return
    if not decomposable:
        doc["error"] = "no decomposable exponential solutions"
        _finish(rc, "factorize.json", doc, ok=False)
        return
    fb = factorization_basis(decomposable)
    blocks = gauge_transform(LinearSystem(A, var=A.var), fb.Q)
    doc.update({
        "Q": _matrix_strs(fb.Q.Q),
        "det_Q": str(fb.Q.Q.det()),
        "complete": fb.complete,
        "blocks": _matrix_strs(blocks.A),
    })
    _finish(rc, "factorize.json", doc, ok=fb.complete)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_states(spec: SystemSpec, cfg: dict, seed: int) -> list:
    if "states" in cfg:
        return [np.asarray(s, dtype=float) for s in cfg["states"]]
    rnd = cfg["random"]
    rng = np.random.default_rng(seed)
    n = int(rnd.get("n", 4))
    rho_min = float(rnd.get("rho_min", 0.5))
    half = spec.dim // 2
    out = []
    while len(out) < n:
        q = rng.uniform(rnd.get("q_low", -1.5), rnd.get("q_high", 1.5), size=half)
        p = rng.uniform(rnd.get("p_low", -1.0), rnd.get("p_high", 1.0), size=half)
        a = np.concatenate([q, p])
        if spec.kind == "one-body":
            r = rho(GroupElement(a[0], a[1], a[2]))
            # nonzero angular momentum keeps random orbits off the center
            p_theta = abs(a[0] * a[4] - a[1] * a[3])
            if p_theta < float(rnd.get("min_p_theta", 0.0)):
                continue
        else:
            r = rho(PhaseState2B.from_array(a).relative)
        if r > rho_min:
            out.append(a)
    return out


@main.command()
@_common
def sweep(config, out_dir, seed, fmt):
    """Integrate a family of orbits concurrently and summarize the drifts."""
    rc = _load_config("sweep", config, out_dir, seed, fmt)
    spec = SystemSpec.from_json(rc.config["system"])
    icfg = IntegratorConfig(**rc.config.get("integrator", {}))
    thresholds = rc.config.get("thresholds", {"H": 1e-9})
    states = _sweep_states(spec, rc.config, rc.seed)
    threads = int(os.environ.get("HEISENKEP_THREADS", os.cpu_count() or 1))
    # warm the cached symbolic lambdifications before fanning out
    spec._rhs_fn

    def run(item):
        idx, s0 = item
        try:
            traj = integrate(spec, s0, icfg)
        except IntegrationError:
            return {"index": idx, "initial_state": s0.tolist(),
                    "flagged_event": "integration_failure", "pass": False}
        if traj.flagged_event is not None:
            return {"index": idx, "initial_state": s0.tolist(),
                    "flagged_event": traj.flagged_event, "pass": False}
        rep = monitor_conserved(spec, traj)
        checks = _simulate_checks(spec, traj, rep, thresholds)
        return {"index": idx, "initial_state": s0.tolist(),
                "flagged_event": None, "drifts": rep.to_json()["drifts"],
                "checks": checks,
                "pass": all(c["pass"] for c in checks.values())}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = sorted(pool.map(run, enumerate(states)), key=lambda r: r["index"])
    ok = all(r["pass"] for r in rows)
    if rc.fmt == "csv":
        lines = ["# " + json.dumps(rc.header(), sort_keys=True),
                 "index,flagged_event,pass"]
        for r in rows:
            lines.append(f"{r['index']},{r['flagged_event'] or ''},{r['pass']}")
        (rc.out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    doc = {"system": spec.to_json(), "threads": threads,
           "runs": rows, "all_pass": ok}
    _finish(rc, "sweep.json", doc, ok=ok)


if __name__ == "__main__":
    main()
