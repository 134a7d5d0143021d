"""Command-line front end: spectrum | critical | solve | expand | verify | sweep.

Outputs are deterministic: payloads go to stdout (or --out), diagnostics and
timings to stderr.  Exit codes: 0 success, 1 failed verification or
computation, 2 invalid input.  Flag values override --config file entries,
which override built-in defaults.
"""

from __future__ import annotations

import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import click

from .errors import (
    BiharmError,
    DomainError,
    InvalidParams,
    NoPcValue,
    SubcriticalInput,
)
from .expansion import (
    detect_regime,
    fit_expansion,
    regime_ordering_ok,
    representation_check,
    window_shift_stability,
)
from .ladder import compute_ladder, parity_boundary_check
from .params import ProblemParams
from .shooting import (
    ShootControls,
    check_monotone_y,
    check_positivity,
    decay_slope,
    dump_solution,
    emden_fowler_residual,
    shoot,
    y_integral_identity_check,
)
from .spectrum import compute_spectrum
from .verify import run_checks

_INPUT_ERRORS = (InvalidParams, SubcriticalInput, DomainError)

DEFAULTS = {
    "alpha": 1.0,
    "r_max": 1e4,
    "tol_integrator": 1e-12,
    "tol_root": 1e-3,
    "tol_fit": 1e-3,
    "tol_rung": 1e-4,
}


def _fmt(x) -> str:
    return f"{x:.17g}"


def _resolve(config, key, flag):
    """Flag > config file > default."""
    if flag is not None:
        return flag
    if config and key in config:
        return config[key]
    return DEFAULTS[key]


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _emit(payload: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(payload)
        click.echo(f"wrote {out}", err=True)
    else:
        click.echo(payload, nl=False)


def _as_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _as_kv_csv(obj: dict) -> str:
    buf = io.StringIO()
    buf.write("key,value\n")
    for k, v in obj.items():
        if isinstance(v, float):
            v = _fmt(v)
        elif isinstance(v, (list, tuple)):
            v = ";".join(_fmt(x) if isinstance(x, float) else str(x) for x in v)
        buf.write(f"{k},{v}\n")
    return buf.getvalue()


def _report(obj: dict, fmt: str, out):
    _emit(_as_json(obj) if fmt == "json" else _as_kv_csv(obj), out)


def _controls(tol_integrator, tol_root) -> ShootControls:
    return ShootControls(
        rtol=tol_integrator,
        atol=tol_integrator * 1e-2,
        target_tol=tol_root,
    )


format_option = click.option(
    "--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
    show_default=True, help="payload format",
)
out_option = click.option("--out", type=click.Path(writable=True), default=None,
                          help="write payload to this file instead of stdout")
config_option = click.option("--config", type=click.Path(exists=True), default=None,
                             help="JSON file with default option values")


@click.group()
@click.version_option(version="0.1.0", prog_name="biharm")
def main():
    """Numerics for positive radial solutions of the fourth-order equation
    Delta^2 phi = phi^p at and above the critical exponent."""


@main.command()
@click.option("--n", type=int, required=True, help="space dimension (n >= 13 for finite p_c)")
@click.option("--p", type=float, required=True, help="supercritical exponent")
@format_option
@out_option
def spectrum(n, p, fmt, out):
    """Eigenvalues of the linearized operator at (n, p)."""
    try:
        s = compute_spectrum(ProblemParams(n, p))
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    payload = {
        "n": n,
        "p": p,
        "lambda_star": s.lambda_star,
        "lambda_1": s.lambdas[0],
        "lambda_2": s.lambdas[1],
        "lambda_3": s.lambdas[2],
        "lambda_4": s.lambdas[3],
        "L": s.L,
        "degenerate": s.degenerate,
        "symmetry_residual_outer": s.symmetry_residual[0],
        "symmetry_residual_inner": s.symmetry_residual[1],
    }
    _report(payload, fmt, out)


@main.command()
@click.option("--n", type=int, required=True)
@format_option
@out_option
def critical(n, fmt, out):
    """Critical exponent, rung ladder, and closed-form count for dimension n."""
    from .errors import LadderMismatch
    from .ladder import ladder_length_formula

    try:
        try:
            lad = compute_ladder(n)
        except NoPcValue:
            payload = {
                "n": n,
                "p_c": None,
                "note": "p_c is infinite for n <= 12; the ladder is empty",
            }
            _report(payload, fmt, out)
            return
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except LadderMismatch as exc:
        _report({"n": n, "ladder_mismatch": str(exc)}, fmt, out)
        sys.exit(1)
    payload = {
        "n": n,
        "p_c": lad.p_c,
        "rungs": list(lad.rungs),
        "N_computed": lad.N,
        "N_formula": ladder_length_formula(n),
        "tail_limits": list(lad.tail_limits),
    }
    if n % 2 == 1:
        pb = parity_boundary_check(n)
        payload["parity_boundary"] = {
            "k": pb.k,
            "quartic_value": pb.quartic_value,
            "factored_value": pb.factored_value,
            "positive": pb.positive,
        }
    _report(payload, fmt, out)


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--p", type=float, required=True)
@click.option("--alpha", type=float, default=None, help="initial height phi(0)")
@click.option("--r-max", type=float, default=None, help="outer radius of the solve")
@click.option("--tol-integrator", type=float, default=None, help="adaptive integrator rtol")
@click.option("--tol-root", type=float, default=None,
              help="shooting target |r^m phi(r_max)/L - 1|")
@click.option("--out", type=click.Path(writable=True), default="solution_dump.csv",
              show_default=True, help="solution dump path")
@config_option
def solve(n, p, alpha, r_max, tol_integrator, tol_root, out, config):
    """Shoot for the entire positive solution and dump it (s, r, phi, W, Y, Z)."""
    cfg = _load_config(config)
    alpha = _resolve(cfg, "alpha", alpha)
    r_max = _resolve(cfg, "r_max", r_max)
    controls = _controls(
        _resolve(cfg, "tol_integrator", tol_integrator),
        _resolve(cfg, "tol_root", tol_root),
    )
    try:
        sol = shoot(ProblemParams(n, p), alpha=alpha, r_max=r_max, controls=controls)
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except BiharmError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    with open(out, "w") as fh:
        dump_solution(sol, fh)
    click.echo(f"wrote {out} ({sol.s_grid.size} rows)", err=True)
    summary = {
        "n": n,
        "p": p,
        "alpha": alpha,
        "r_max": r_max,
        "v0": sol.v0,
        "final_ratio": 1.0 + sol.target_residual,
        "target_residual": sol.target_residual,
        "phi_positive": check_positivity(sol),
        "Y_negative_nondecreasing": check_monotone_y(sol),
        "decay_slope": decay_slope(sol),
        "lambda_3": sol.spectrum.lambdas[2],
        "transform_residual": emden_fowler_residual(sol),
        "integral_identity_deviation": y_integral_identity_check(sol),
        "chart_overlap_residual": sol.chart_overlap_residual,
        "error_estimate": sol.error_estimate,
        "bisection_steps": sol.n_bisect,
    }
    click.echo(_as_json(summary), nl=False)


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--p", type=float, required=True)
@click.option("--alpha", type=float, default=None)
@click.option("--r-max", type=float, default=None)
@click.option("--window", type=float, nargs=2, default=None,
              help="fit window (s_lo, s_hi); auto-selected when omitted")
@click.option("--tol-integrator", type=float, default=None)
@click.option("--tol-root", type=float, default=None)
@click.option("--tol-fit", type=float, default=None, help="allowed |a0/L - 1|")
@click.option("--tol-rung", type=float, default=None, help="rung detection band")
@format_option
@out_option
@config_option
def expand(n, p, alpha, r_max, window, tol_integrator, tol_root, tol_fit,
           tol_rung, fmt, out, config):
    """Fit the asymptotic expansion of the solved profile and check it."""
    cfg = _load_config(config)
    alpha = _resolve(cfg, "alpha", alpha)
    r_max = _resolve(cfg, "r_max", r_max)
    tol_fit = _resolve(cfg, "tol_fit", tol_fit)
    tol_rung = _resolve(cfg, "tol_rung", tol_rung)
    controls = _controls(
        _resolve(cfg, "tol_integrator", tol_integrator),
        _resolve(cfg, "tol_root", tol_root),
    )
    try:
        params = ProblemParams(n, p)
        ladder = compute_ladder(n)
        regime = detect_regime(params, ladder, rung_tol=tol_rung)
        sol = shoot(params, alpha=alpha, r_max=r_max, controls=controls)
        spec = sol.spectrum
        fit = fit_expansion(sol, spec, regime, window or None)
        drift = window_shift_stability(sol, spec, regime, window or None)
        rep = representation_check(sol, spec)
        yid = y_integral_identity_check(sol, spec)
    except _INPUT_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except BiharmError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    lam3 = spec.lambdas[2]
    a0 = fit.coefficients["a0"]
    invariants = {
        "a0_matches_L": abs(a0.value - spec.L) <= tol_fit * spec.L,
        "remainder_slope_ok": fit.residual_slope
        <= fit.theoretical_slope + 0.15 * abs(lam3),
        "window_shift_stable": max(drift.values()) <= 3.0,
        "regime_ordering_chain": regime_ordering_ok(spec, regime),
        "representation_ok": rep <= 1e-3,
        "integral_identity_ok": yid <= 1e-3,
    }
    payload = {
        "n": n,
        "p": p,
        "regime": fit.regime.kind,
        "k": fit.regime.k,
        "window": list(fit.window),
        "coefficients": {
            name: {"value": est.value, "stderr": est.stderr, "resolved": est.resolved}
            for name, est in fit.coefficients.items()
        },
        "residual_slope": fit.residual_slope,
        "theoretical_slope": fit.theoretical_slope,
        "L": spec.L,
        "representation_deviation": rep,
        "integral_identity_deviation": yid,
        "window_shift_drift_se": {k_: v for k_, v in drift.items()},
        "invariants": invariants,
    }
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("coefficient,value,stderr,resolved\n")
        for name, est in fit.coefficients.items():
            buf.write(f"{name},{_fmt(est.value)},{_fmt(est.stderr)},{est.resolved}\n")
        _emit(buf.getvalue(), out)
    else:
        _report(payload, "json", out)
    if not all(invariants.values()):
        click.echo("expansion invariants FAILED: "
                   + ", ".join(k for k, v in invariants.items() if not v), err=True)
        sys.exit(1)


@main.command()
@click.option("--scope", type=click.Choice(["algebra", "shooting", "default", "full"]),
              default="default", show_default=True)
@format_option
@out_option
def verify(scope, fmt, out):
    """Run the module verification suites; nonzero exit on any failure."""
    results = run_checks(scope)
    for r in results:
        click.echo(f"{r.name}: {r.seconds:.2f}s", err=True)
    if fmt == "json":
        payload = _as_json([
            {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results
        ])
    else:
        buf = io.StringIO()
        buf.write("name,passed,detail\n")
        for r in results:
            detail = r.detail.replace(",", ";")
            buf.write(f"{r.name},{r.passed},{detail}\n")
        payload = buf.getvalue()
    _emit(payload, out)
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'} {r.name}", err=True)
    if not all(r.passed for r in results):
        sys.exit(1)


def _sweep_row(n: int) -> dict:
    try:
        lad = compute_ladder(n)
    except NoPcValue:
        return {"n": n, "p_c": None, "N": 0, "rungs": [], "parity_boundary": None}
    parity = None
    if n % 2 == 1:
        parity = parity_boundary_check(n).factored_value
    return {
        "n": n,
        "p_c": lad.p_c,
        "N": lad.N,
        "rungs": list(lad.rungs),
        "parity_boundary": parity,
    }


@main.command()
@click.option("--n-min", type=int, default=13, show_default=True)
@click.option("--n-max", type=int, default=60, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True,
              help="parallel workers for the per-dimension tasks")
@format_option
@out_option
def sweep(n_min, n_max, jobs, fmt, out):
    """Tabulate p_c, rungs, N, and the parity boundary over a dimension range."""
    if not (13 <= n_min <= n_max <= 200):
        click.echo("error: need 13 <= n-min <= n-max <= 200", err=True)
        sys.exit(2)
    ns = list(range(n_min, n_max + 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, ns))
    else:
        rows = [_sweep_row(n) for n in ns]

    n_col = max((len(r["rungs"]) for r in rows), default=0)
    if fmt == "json":
        payload = _as_json(rows)
    else:
        buf = io.StringIO()
        header = ["n", "p_c", "N", "parity_boundary"] + [f"p_{k}" for k in range(1, n_col + 1)]
        buf.write(",".join(header) + "\n")
        for r in rows:
            cells = [
                str(r["n"]),
                _fmt(r["p_c"]) if r["p_c"] is not None else "",
                str(r["N"]),
                _fmt(r["parity_boundary"]) if r["parity_boundary"] is not None else "",
            ]
            cells += [_fmt(x) for x in r["rungs"]]
            cells += [""] * (n_col - len(r["rungs"]))
            buf.write(",".join(cells) + "\n")
        payload = buf.getvalue()
    _emit(payload, out)

    counts = [r["N"] for r in rows]
    if any(b < a for a, b in zip(counts, counts[1:])):
        click.echo("rung count is not monotone in n; structural bug", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
