"""Command-line front door: wires the modules into reproducible runs.

Structured results are JSON, sampled curves are CSV; file artifacts embed
the full run configuration and a SHA-256 content hash so a result can
always be traced to the exact invocation that produced it.  All numerics
are printed with 15 significant digits.  Logging verbosity follows the
CRESTWAVE_LOG environment variable (error, warn, info, debug).

Exit status: 0 on success, 1 on a computation or validation failure
(non-convergence, a failed invariant, unusable input data), 2 on a usage
error (unknown flag, malformed or missing file).
"""

import argparse
import dataclasses
import datetime
import hashlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from . import diagnostics, halfstrip, reduction, spectrum, transforms
from .asymptotics import a1_from_lambda, eta_series, eta_x_series, \
    eta_xx_series, make_coefficients, verify_stokes_corner
from .reduction import verify_u_star
from .vorticity import VorticityModel, constant_model

LOG = logging.getLogger("crestwave")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}

#: Allowed parameter keys per command; RunConfig rejects anything else.
_COMMAND_PARAMS = {
    "eigen": {"count"},
    "lambda": {"nodes"},
    "coeffs": {"omega1"},
    "expand": {"omega1", "x_max", "samples"},
    "solve": {"omega1", "omega_coeffs", "q0", "Q", "nq", "nz", "sponge",
              "tol", "max_iter", "initial"},
    "residual": {"in_path"},
    "fit": {"in_path", "quantity", "window"},
    "validate": {"skip_solver"},
}


class UsageError(Exception):
    """Invalid invocation: maps to exit status 2."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """A validated run request: command, its parameters, optional output.

    Unknown parameter keys are rejected at construction so a config that
    exists is also one `run` knows how to execute.
    """

    command: str
    parameters: dict
    output_path: str = None
    deterministic: bool = False

    def __post_init__(self):
        if self.command not in _COMMAND_PARAMS:
            raise UsageError(f"unknown command {self.command!r}")
        extra = set(self.parameters) - _COMMAND_PARAMS[self.command]
        if extra:
            raise UsageError(
                f"unknown parameters for {self.command}: {sorted(extra)}")

    def as_dict(self):
        """The run identity embedded in artifacts: command and parameters.

        The output path is deliberately excluded — it says where an
        artifact went, not what it is, and including it would make
        otherwise identical runs produce different bytes.
        """
        return {"command": self.command,
                "parameters": dict(self.parameters)}


def _setup_logging():
    raw = os.environ.get("CRESTWAVE_LOG", "warn").strip().lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level,
        format="%(levelname)s %(name)s: %(message)s")
    if raw not in _LOG_LEVELS and raw:
        LOG.warning("unknown CRESTWAVE_LOG value %r; using 'warn'", raw)


def _sig15(obj):
    """Round every float in a JSON-ready structure to 15 significant digits.

    The rounded value's shortest repr is what json emits, so artifacts are
    byte-stable across runs and never carry digits beyond the guaranteed
    precision.
    """
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return obj
        return float(f"{obj:.15g}")
    if isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, dict):
        return {k: _sig15(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sig15(v) for v in obj]
    if isinstance(obj, np.floating):
        return _sig15(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _sig15(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_text(obj):
    return json.dumps(_sig15(obj), sort_keys=True, indent=2) + "\n"


def _artifact_json(config, result, flat=False):
    """Result plus embedded config and content hash, as canonical JSON text.

    flat=True merges the result's keys into the top level (the field-file
    schema requires grid/psi_bar/zeta/residual there); otherwise the result
    sits under "result".  The hash covers config and result only, so a
    timestamped artifact still certifies the same content; the timestamp is
    dropped entirely under --deterministic.
    """
    body = dict(result) if flat else {"result": result}
    payload = {"config": config.as_dict(), **body}
    digest = hashlib.sha256(_json_text(payload).encode()).hexdigest()
    payload["sha256"] = digest
    if not config.deterministic:
        payload["generated"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
    return _json_text(payload)


def _write_or_print(text, out_path):
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
        LOG.info("wrote %s (%d bytes)", out_path, len(text))
    else:
        sys.stdout.write(text)


def _read_field(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return halfstrip.StripField.from_json(text)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path} is not a valid field file: {exc}") from exc


# ---------------------------------------------------------------------------
# Commands


def _cmd_eigen(p):
    count = int(p.get("count", 3))
    if count < 1:
        raise UsageError("--count must be at least 1")
    out = []
    for j in range(1, count + 1):
        pair = spectrum.solve_eigenpair(j)
        out.append({"j": j, "tau": pair.tau, "mu": pair.mu})
    return out


def _cmd_lambda(p):
    nodes = int(p.get("nodes", 64))
    res = reduction.compute_lambda(1.0, nodes=nodes)
    return {"lambda": res.lam,
            "a1": a1_from_lambda(res.lam),
            "tau1": spectrum.solve_eigenpair(1).tau,
            "residual": res.residual_norm}


def _cmd_coeffs(p):
    if "omega1" not in p:
        raise UsageError("coeffs requires --omega1")
    omega1 = float(p["omega1"])
    lam = reduction.compute_lambda(1.0).lam
    tau1 = spectrum.solve_eigenpair(1).tau
    c = make_coefficients(omega1, lam, tau1)
    return json.loads(c.to_json())


def _cmd_expand(p):
    for key in ("omega1", "x_max"):
        if key not in p:
            raise UsageError(f"expand requires --{key.replace('_', '-')}")
    omega1 = float(p["omega1"])
    x_max = float(p["x_max"])
    samples = int(p.get("samples", 64))
    if not 0.0 < x_max:
        raise UsageError("--x-max must be positive")
    if samples < 2:
        raise UsageError("--samples must be at least 2")
    lam = reduction.compute_lambda(1.0).lam
    tau1 = spectrum.solve_eigenpair(1).tau
    c = make_coefficients(omega1, lam, tau1)
    x = np.linspace(x_max / samples, x_max, samples)
    rows = np.column_stack([
        x, eta_x_series(x, c), eta_xx_series(x, c),
        eta_series(x, c, halfstrip.DEFAULT_FRAME.r)])
    return rows


def _cmd_solve(p):
    if "omega1" not in p and "omega_coeffs" not in p:
        raise UsageError("solve requires --omega1 (or --omega-coeffs)")
    if p.get("omega_coeffs"):
        try:
            with open(p["omega_coeffs"]) as f:
                model = VorticityModel.from_json(f.read())
        except OSError as exc:
            raise UsageError(
                f"cannot read {p['omega_coeffs']}: {exc.strerror}") from exc
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise UsageError(
                f"{p['omega_coeffs']} is not a vorticity model: "
                f"{exc}") from exc
    else:
        model = constant_model(float(p["omega1"]))
    try:
        grid = halfstrip.StripGrid(
            q0=float(p.get("q0", 2.0)), Q=float(p.get("Q", 14.0)),
            nq=int(p.get("nq", 480)), nz=int(p.get("nz", 64)))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sponge = p.get("sponge", "auto")
    if sponge != "auto":
        sponge = float(sponge)
    LOG.info("solving %s on [%g, %g] %dx%d", model, grid.q0, grid.Q,
             grid.nq, grid.nz)
    field = halfstrip.newton_solve(
        grid, model, sponge=sponge, tol=float(p.get("tol", 1e-10)),
        max_iter=int(p.get("max_iter", 50)),
        initial=p.get("initial", "closure"))
    LOG.info("converged: metric %.3e after %d iterations", field.residual,
             len(field.history["residual"]))
    return json.loads(field.to_json())


def _cmd_residual(p):
    field = _read_field(p["in_path"])
    return halfstrip.assemble_residual(field).norms()


def _cmd_fit(p):
    field = _read_field(p["in_path"])
    quantity = p.get("quantity", "xi")
    q = field.grid.q
    if quantity == "xi":
        samples = list(zip(q, field.xi))
    elif quantity == "eta_x":
        zq = field.zeta_q()
        vals = [transforms.eta_x_from_zeta(zv, zqv) + 1.0 / math.sqrt(3.0)
                for zv, zqv in zip(field.zeta, zq)]
        samples = list(zip(q, vals))
    elif quantity == "residual":
        qs, prof = halfstrip.assemble_residual(field).interior_profile()
        keep = np.isfinite(prof) & (prof > 0)
        samples = list(zip(qs[keep], prof[keep]))
    else:
        raise UsageError(
            f"unknown quantity {quantity!r}: choose xi, eta_x or residual")
    window = p.get("window")
    fit = diagnostics.fit_decay(samples, window=window)
    return {"quantity": quantity, "rate": fit.rate,
            "amplitude": fit.amplitude, "rms_residual": fit.rms_residual,
            "window": list(fit.window)}


def _check(results, name, ok, detail):
    results.append((name, bool(ok), detail))
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)


def _cmd_validate(p):
    """Run the invariant suite; every check is self-contained and green on
    a healthy build.  Reference-value comparisons against previously
    reported constants live in the test suite, not here: this command
    answers "is this installation computing what it claims to compute",
    not "does the computation agree with the literature"."""
    results = []
    half_pi = 0.5 * math.pi
    sqrt3 = math.sqrt(3.0)

    pairs = [spectrum.solve_eigenpair(j) for j in range(4)]
    worst = max(abs(pr.dphi(half_pi) - pr.phi(half_pi) / sqrt3)
                for pr in pairs)
    _check(results, "eigenfunction surface condition", worst < 1e-12,
           f"max Robin defect {worst:.2e} over indices 0..3")

    taus = [pr.tau for pr in pairs[1:]]
    _check(results, "eigenvalue interlacing",
           all(2 * j - 1 < t < 2 * j for j, t in enumerate(taus, 1)),
           "tau = " + ", ".join(f"{t:.4f}" for t in taus))

    nodes, weights = np.polynomial.legendre.leggauss(256)
    z = 0.25 * math.pi * (nodes + 1.0)
    w = 0.25 * math.pi * weights
    worst = 0.0
    for i, a in enumerate(pairs[1:]):
        for b in pairs[1 + i + 1:]:
            fa = np.array([a.phi(zv) for zv in z])
            fb = np.array([b.phi(zv) for zv in z])
            na = math.sqrt(float(np.sum(w * fa * fa)))
            nb = math.sqrt(float(np.sum(w * fb * fb)))
            worst = max(worst, abs(float(np.sum(w * fa * fb))) / (na * nb))
    _check(results, "eigenfunction orthogonality", worst < 1e-10,
           f"max normalized inner product {worst:.2e}")

    frame = halfstrip.DEFAULT_FRAME
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(200):
        t = rng.uniform(2.0, 9.0)
        theta = rng.uniform(-math.pi / 2 - 0.4, -math.pi / 2 + 0.4)
        x, y = transforms.log_unmap(t, theta, frame)
        t2, th2 = transforms.log_map(x, y, frame)
        worst = max(worst, abs(t2 - t), abs(th2 - theta))
    _check(results, "transform round trip", worst < 1e-12,
           f"max log-map defect {worst:.2e}")

    corner = max(verify_stokes_corner(101).values())
    _check(results, "corner-flow closed form", corner < 1e-12,
           f"limit-system defect {corner:.2e} on 101x101")
    rep = verify_u_star(101)
    forced = max(v for k, v in rep.items() if k != "forcing_scale")
    _check(results, "forced-correction closed form", forced < 1e-12,
           f"forced-system defect {forced:.2e} on 101x101")

    res_c = reduction.compute_lambda(1.0, method="chebyshev")
    res_f = reduction.compute_lambda(1.0, method="fd4", nodes=512)
    _check(results, "reduced-problem backward error",
           res_c.residual_norm < 1e-10, f"{res_c.residual_norm:.2e}")
    _check(results, "reduced-problem cross method",
           abs(res_c.lam - res_f.lam) < 1e-9,
           f"|chebyshev - fd4| = {abs(res_c.lam - res_f.lam):.2e}")
    lam_sc = [reduction.compute_lambda(w).lam for w in (-1.0, 0.5, 2.0)]
    _check(results, "coefficient vorticity-independence",
           max(abs(v - res_c.lam) for v in lam_sc) < 1e-10,
           f"spread {max(abs(v - res_c.lam) for v in lam_sc):.2e}")

    rate_d, rms_d = _composite_rate("default")
    rate_c, rms_c = _composite_rate("cubic-radial")
    ok_d = abs(rate_d - 2.5) <= 0.05 and rms_d <= 0.1
    ok_c = not (abs(rate_c - 2.5) <= 0.05 and rms_c <= 0.1)
    _check(results, "composite residual rate", ok_d,
           f"rate={rate_d:.4f} rms={rms_d:.3f}")
    _check(results, "composite negative control", ok_c,
           f"rate={rate_c:.4f} rms={rms_c:.3f} (must fail the rate check)")

    if not p.get("skip_solver"):
        grid = halfstrip.StripGrid(q0=4.0, Q=9.0, nq=101, nz=64)
        model = constant_model(0.5)
        try:
            field = halfstrip.newton_solve(grid, model)
        except halfstrip.NonConvergenceError as exc:
            _check(results, "solver convergence", False, str(exc))
        else:
            _check(results, "solver convergence", True,
                   f"metric {field.residual:.2e} in "
                   f"{len(field.history['residual'])} iterations")
            report = halfstrip.assemble_residual(field)
            cols = np.arange(1, grid.nq - 1)
            free = cols[grid.q[cols] <= grid.Q - halfstrip.DEFAULT_SPONGE]
            bern = np.abs(report.bernoulli[free])
            bound = 1e-9 * np.exp(-3.0 * grid.q[free])
            _check(results, "surface-condition defect",
                   bool(np.all(bern < bound)),
                   f"max defect/bound {float((bern / bound).max()):.2e}")
            tail = diagnostics.fit_tail_coefficient(
                grid.q[free], field.xi[free], 0.5,
                window=(4.2, grid.q[free].max() - 0.1))
            lam_dev = abs(tail.coefficient / res_c.lam - 1.0)
            _check(results, "solver second coefficient", lam_dev < 0.10,
                   f"deviation {100 * lam_dev:.2f}% from the pipeline value")
            cleaned = tail.clean(grid.q[free], field.xi[free], 0.5)
            fit = diagnostics.fit_decay(
                list(zip(grid.q[free], cleaned)),
                window=(4.2, grid.q[free].max() - 0.1))
            _check(results, "surface-angle decay rate",
                   abs(fit.rate - 0.5) < 0.02, f"rate {fit.rate:.4f}")
            _check(results, "surface-angle amplitude",
                   abs(fit.amplitude / (0.5 / 3.0) - 1.0) < 0.05,
                   f"deviation {100 * abs(fit.amplitude / (0.5 / 3) - 1):.2f}%")
            c1, c2, ratio = diagnostics.holder_scan(field)
            _check(results, "vertical-velocity band", 0 < c1 and ratio < 10,
                   f"[{c1:.4f}, {c2:.4f}] ratio {ratio:.4f}")

    failed = [name for name, ok, _ in results if not ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return {"passed": len(results) - len(failed), "failed": failed}


def _composite_rate(variant):
    """Richardson-extrapolated interior-residual decay rate for the smooth
    composite ansatz (h^2 error removed by halving both spacings)."""
    model = constant_model(0.5)

    def profile(nq, nz):
        grid = halfstrip.StripGrid(q0=4.5, Q=12.5, nq=nq, nz=nz)
        rep = halfstrip.assemble_residual(
            halfstrip.composite_field(grid, model, variant=variant))
        return grid.q, np.nanmax(np.abs(rep.interior), axis=1)

    q1, r1 = profile(801, 129)
    q2, r2 = profile(1601, 257)
    rich = (4.0 * r2[::2] - r1) / 3.0
    mask = (q1 >= 5.0) & (q1 <= 12.0) & (np.abs(rich) > 0)
    fit = diagnostics.fit_decay(
        list(zip(q1[mask], np.abs(rich[mask]))), window=(5.0, 12.0))
    return fit.rate, fit.rms_residual


# ---------------------------------------------------------------------------
# Front end


def run(config):
    """Execute a validated RunConfig; returns the process exit status."""
    p = config.parameters
    if config.command == "eigen":
        result = _cmd_eigen(p)
        text = (_artifact_json(config, result) if config.output_path
                else _json_text(result))
        _write_or_print(text, config.output_path)
    elif config.command == "lambda":
        result = _cmd_lambda(p)
        text = (_artifact_json(config, result, flat=True)
                if config.output_path else _json_text(result))
        _write_or_print(text, config.output_path)
    elif config.command == "coeffs":
        result = _cmd_coeffs(p)
        text = (_artifact_json(config, result, flat=True)
                if config.output_path else _json_text(result))
        _write_or_print(text, config.output_path)
    elif config.command == "expand":
        rows = _cmd_expand(p)
        lines = ["x,eta_x,eta_xx,eta"]
        lines += [",".join(f"{v:.15g}" for v in row) for row in rows]
        data = "\n".join(lines) + "\n"
        digest = hashlib.sha256(data.encode()).hexdigest()
        header = (f"# config: {json.dumps(config.as_dict(), sort_keys=True)}\n"
                  f"# sha256: {digest}\n")
        _write_or_print(header + data, config.output_path)
    elif config.command == "solve":
        if not config.output_path:
            raise UsageError("solve requires --out FILE")
        try:
            result = _cmd_solve(p)
        except halfstrip.NonConvergenceError as exc:
            print(f"solve failed: {exc}", file=sys.stderr)
            return 1
        _write_or_print(_artifact_json(config, result, flat=True),
                        config.output_path)
    elif config.command == "residual":
        result = _cmd_residual(p)
        text = (_artifact_json(config, result, flat=True)
                if config.output_path else _json_text(result))
        _write_or_print(text, config.output_path)
    elif config.command == "fit":
        try:
            result = _cmd_fit(p)
        except ValueError as exc:
            print(f"fit failed: {exc}", file=sys.stderr)
            return 1
        text = (_artifact_json(config, result, flat=True)
                if config.output_path else _json_text(result))
        _write_or_print(text, config.output_path)
    elif config.command == "validate":
        result = _cmd_validate(p)
        if config.output_path:
            _write_or_print(_artifact_json(config, result, flat=True),
                            config.output_path)
        if result["failed"]:
            return 1
    return 0


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--deterministic", action="store_true",
        help="omit the timestamp so identical configs give identical bytes")
    common.add_argument(
        "--out", metavar="FILE", default=None,
        help="write the artifact to FILE instead of stdout")

    ap = argparse.ArgumentParser(
        prog="crestwave",
        description="Local asymptotics of extreme water waves with "
                    "vorticity: eigenvalues, expansion coefficients, and a "
                    "nonlinear half-strip solver for cross-validation.")
    ap.add_argument("--version", action="version",
                    version=f"crestwave {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("eigen", parents=[common],
                        help="Sturm-Liouville eigenvalues tau_j with "
                             "coefficients mu_j, as a JSON array")
    sp.add_argument("--count", type=int, default=3, metavar="N",
                    help="number of eigenpairs j = 1..N (default 3)")

    sp = sub.add_parser("lambda", parents=[common],
                        help="second-order surface coefficient pipeline: "
                             "JSON with lambda, a1, tau1, residual")
    sp.add_argument("--nodes", type=int, default=64, metavar="N",
                    help="collocation nodes for the reduced problem "
                         "(default 64)")

    sp = sub.add_parser("coeffs", parents=[common],
                        help="all expansion coefficients for a given "
                             "surface vorticity omega(1)")
    sp.add_argument("--omega1", type=float, required=True, metavar="V",
                    help="vorticity at the surface streamline")

    sp = sub.add_parser("expand", parents=[common],
                        help="sampled surface expansion as CSV "
                             "(x, eta_x, eta_xx, eta)")
    sp.add_argument("--omega1", type=float, required=True, metavar="V")
    sp.add_argument("--x-max", type=float, required=True, metavar="X",
                    help="largest sampled distance from the crest")
    sp.add_argument("--samples", type=int, default=64, metavar="N",
                    help="number of samples (default 64)")

    sp = sub.add_parser("solve", parents=[common],
                        help="solve the nonlinear half-strip problem and "
                             "write a field file")
    sp.add_argument("--omega1", type=float, default=None, metavar="V",
                    help="constant vorticity value")
    sp.add_argument("--omega-coeffs", metavar="FILE", default=None,
                    help="JSON file with a polynomial vorticity model "
                         "(overrides --omega1)")
    sp.add_argument("--q0", type=float, default=2.0, metavar="A",
                    help="near-end truncation (default 2)")
    sp.add_argument("--Q", type=float, default=14.0, metavar="B",
                    help="far-end truncation (default 14)")
    sp.add_argument("--nq", type=int, default=480, metavar="N",
                    help="nodes in q (default 480)")
    sp.add_argument("--nz", type=int, default=64, metavar="M",
                    help="nodes in z (default 64)")
    sp.add_argument("--sponge", default="auto", metavar="S",
                    help="width of the far-end angle-pinning zone in "
                         "q-units, or 'auto' (default)")
    sp.add_argument("--tol", type=float, default=1e-10, metavar="T",
                    help="convergence tolerance on the weighted metric")
    sp.add_argument("--max-iter", type=int, default=50, metavar="K")
    sp.add_argument("--initial", choices=["closure", "corner"],
                    default="closure",
                    help="initial iterate (default: closure ansatz)")

    sp = sub.add_parser("residual", parents=[common],
                        help="defect norms of a stored field under the "
                             "discrete equations")
    sp.add_argument("--in", dest="in_path", required=True, metavar="FILE",
                    help="field file produced by solve")

    sp = sub.add_parser("fit", parents=[common],
                        help="log-linear decay fit of a stored field's "
                             "surface angle, slope deviation, or residual")
    sp.add_argument("--in", dest="in_path", required=True, metavar="FILE")
    sp.add_argument("--quantity", choices=["xi", "eta_x", "residual"],
                    default="xi",
                    help="what to fit against q (default xi)")
    sp.add_argument("--window", type=float, nargs=2, default=None,
                    metavar=("LO", "HI"),
                    help="fit window in q (default: middle third)")

    sp = sub.add_parser("validate", parents=[common],
                        help="run the invariant suite; exit 1 on any "
                             "failure")
    sp.add_argument("--skip-solver", action="store_true",
                    help="skip the nonlinear-solve checks (a few seconds)")
    return ap


def _config_from_args(args):
    drop = {"command", "out", "deterministic"}
    params = {k: v for k, v in vars(args).items()
              if k not in drop and v is not None}
    return RunConfig(command=args.command, parameters=params,
                     output_path=args.out, deterministic=args.deterministic)


def main(argv=None):
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        return run(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, halfstrip.NonConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
