"""Command-line front end.

    singflow COMMAND --config FILE [--jobs N] [--out DIR] [--verbose]

Exit codes: 0 completed (and passed, where a verdict applies), 1 completed
with a failing or inconclusive verdict, 2 usage or configuration error,
3 numerical error. Nothing is written unless the command completes.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .blowup import make_chart, verify_extension_limit
from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError
from .field import classify_singularity, find_singularities
from .flow import flow, trajectory, write_trajectory_csv
from .hyperbolicity.checks import check_2domination, check_domination, check_e_contraction, \
    check_sectional_expansion, check_tangent_e_contraction
from .hyperbolicity.lyapunov import lyapunov_exponents
from .hyperbolicity.pliss import pliss_report
from .hyperbolicity.sampling import sample_attractor
from .hyperbolicity.splitting import estimate_splitting
from .hyperbolicity.verdict import singular_hyperbolicity_report
from .poincare import linear_poincare
from .serialize import dumps, write_atomic

log = logging.getLogger("singflow")

COMMANDS = ("classify", "orbit", "poincare", "blowup-verify", "domination", "contraction", "sectional",
            "pliss", "lyapunov", "verdict")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _singularities(rc: RunConfig):
    roots = find_singularities(rc.field, rc.field.box)
    return [classify_singularity(rc.field, r) for r in roots]


def _samples(rc: RunConfig):
    explicit = rc.section("analysis").get("samples")
    if explicit:
        return [np.array(p) for p in explicit]
    a = rc.analysis
    return sample_attractor(rc.field, a.seed, a.transient, a.n_samples, a.spacing, a.integrator,
                            history=a.history, future=a.future, frame_eps=a.frame_eps)


def _splitting(rc: RunConfig):
    infos = _singularities(rc)
    samples = _samples(rc)
    eps = rc.analysis.eps_for(rc.field.box.diagonal)
    pts = np.array([getattr(s, "x", s) for s in samples])
    centers = [i.location for i in infos if np.min(np.linalg.norm(pts - i.location, axis=1)) < eps]
    return estimate_splitting(rc.field, samples, cfg=rc.analysis, exclude_centers=centers, eps=eps)


def _report(rep, details: bool):
    return rep.to_dict(with_details=details)


def cmd_classify(rc, details):
    infos = _singularities(rc)
    body = {"singularities": [i.to_dict() for i in infos], "count": len(infos)}
    return body, EXIT_OK, {}


def cmd_orbit(rc, details):
    sec = rc.section("orbit")
    x0 = sec.get("x0", rc.analysis.seed)
    traj = trajectory(rc.field, x0, sec["duration"], sec["dt"], rc.integrator, with_jacobian=sec["jacobian"])
    body = {"points": len(traj), "csv": "orbit.csv", "final": traj.points[-1]}
    return body, EXIT_OK, {"orbit.csv": traj}


def cmd_poincare(rc, details):
    sec = rc.section("cocycle")
    x = np.asarray(sec.get("x0", rc.analysis.seed), dtype=float)
    rows = []
    for k in range(sec["steps"]):
        coc = linear_poincare(rc.field, x, sec["dt"], rc.poincare)
        rows.append({"t": k * sec["dt"], "point": x, "speed": coc.source.speed,
                     "frame": coc.source.basis.T, "psi": coc.mat, "psi_star": coc.rescale().mat})
        x = coc.target.base
    return {"dt": sec["dt"], "steps": rows}, EXIT_OK, {}


def _blowup_direction(info, spec: str):
    named = {"strong_stable": 0, "stable": 0, "weak_stable": 1, "unstable": 2}
    if spec in named:
        return info.eigenvector(named[spec])
    try:
        v = np.array([float(t) for t in spec.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"[blowup] direction {spec!r} is neither a name nor 3 numbers") from None
    if v.shape != (3,) or not np.linalg.norm(v) > 0:
        raise ConfigError("[blowup] direction must be a nonzero 3-vector")
    return v / np.linalg.norm(v)


def _limit_ok(rep, tol: float) -> bool:
    """Converging at rate >= 0.9 to within ``tol``, or already exact to ``tol`` at every radius."""
    if rep.failures:
        return False
    if max(rep.errors) < tol and max(rep.speed_ratio_errors) < tol:
        return True
    return (rep.monotone and rep.extrapolated_error is not None and rep.extrapolated_error < tol
            and rep.speed_ratio_slope is not None and rep.speed_ratio_slope >= 0.9)


def cmd_blowup(rc, details):
    sec = rc.section("blowup")
    infos = _singularities(rc)
    if not infos:
        raise ConfigError("no singularity in the box")
    k = sec["singularity"]
    if k < 0:
        k = next((i for i, inf in enumerate(infos) if inf.lorenz_like_forward), 0)
    if k >= len(infos):
        raise ConfigError(f"singularity index {k} out of range ({len(infos)} found)")
    try:
        u = _blowup_direction(infos[k], sec["direction"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    # the verification chart is independent of the analysis exclusion radius
    chart = make_chart(rc.field, infos[k], sec.get("chart_eps"))
    reps = [verify_extension_limit(chart, u, t, sec["radii"], rc.poincare) for t in sec["t"]]
    ok = all(_limit_ok(r, sec["limit_tol"]) for r in reps)
    body = {"singularity": infos[k].to_dict(), "index": k, "chart_eps": chart.eps,
            "reports": [r.to_dict() for r in reps], "passed": ok}
    return body, EXIT_OK if ok else EXIT_FAIL, {}


def cmd_domination(rc, details):
    split = _splitting(rc)
    rep = check_domination(split, rc.field, rescaled=rc.section("analysis").get("rescaled", True), cfg=rc.analysis)
    rep.sub["two_domination"] = check_2domination(split, rc.field, cfg=rc.analysis)
    return _report(rep, details), EXIT_OK if rep.passed else EXIT_FAIL, {}


def cmd_contraction(rc, details):
    split = _splitting(rc)
    rep = check_e_contraction(split, rc.field, rescaled=rc.section("analysis").get("rescaled", True),
                              cfg=rc.analysis)
    rep.sub["tangent_e_contraction"] = check_tangent_e_contraction(split, rc.field, cfg=rc.analysis)
    return _report(rep, details), EXIT_OK if rep.passed else EXIT_FAIL, {}


def cmd_sectional(rc, details):
    rep = check_sectional_expansion(rc.field, _splitting(rc), cfg=rc.analysis)
    return _report(rep, details), EXIT_OK if rep.passed else EXIT_FAIL, {}


def cmd_pliss(rc, details):
    sec = rc.section("pliss")
    rep = pliss_report(_splitting(rc), rc.field, sec["tau0"], sec["gamma"], sec.get("blocks"), rc.analysis)
    return _report(rep, details), EXIT_OK if rep.passed else EXIT_FAIL, {}


def cmd_lyapunov(rc, details):
    sec = rc.section("lyapunov")
    x0 = sec.get("x0")
    if x0 is None:
        x0 = flow(rc.field, rc.analysis.seed, rc.analysis.transient, rc.integrator)
    res = lyapunov_exponents(rc.field, x0, sec["T_total"], sec["renorm_dt"], rc.integrator, rc.analysis.frame_eps)
    return res.to_dict(), EXIT_OK, {}


def cmd_verdict(rc, details):
    samples = rc.section("analysis").get("samples")
    rep = singular_hyperbolicity_report(rc.field, rc.field.box, rc.analysis,
                                        samples=[np.array(p) for p in samples] if samples else None)
    return _report(rep, details), EXIT_OK if rep.passed else EXIT_FAIL, {}


HANDLERS = {
    "classify": cmd_classify, "orbit": cmd_orbit, "poincare": cmd_poincare, "blowup-verify": cmd_blowup,
    "domination": cmd_domination, "contraction": cmd_contraction, "sectional": cmd_sectional,
    "pliss": cmd_pliss, "lyapunov": cmd_lyapunov, "verdict": cmd_verdict,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="singflow", description="Flow constructions and hyperbolicity diagnostics "
                                "for three-dimensional vector fields.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH", help="INI run configuration")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker threads for per-sample checks")
    p.add_argument("--out", metavar="DIR", help="output directory (default: [output] dir, else .)")
    p.add_argument("--verbose", action="store_true", help="progress logging on stderr")
    return p


def _write_outputs(out_dir: str, command: str, body, extra: dict, rc: RunConfig) -> list:
    os.makedirs(out_dir, exist_ok=True)
    doc = {"command": command, "version": __version__, "config": rc.resolved(), "result": body}
    written = []
    for name, traj in extra.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-", suffix=".part")
        os.close(fd)
        try:
            write_trajectory_csv(tmp, traj, cumulative_jacobian=rc.section("orbit").get("jacobian", False))
            os.replace(tmp, os.path.join(out_dir, name))
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        written.append(name)
    name = command.replace("-", "_") + ".json"
    write_atomic(os.path.join(out_dir, name), dumps(doc))
    written.append(name)
    return written


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("singflow: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        rc = load_config(args.config, jobs=args.jobs)
        out_dir = args.out or rc.section("output").get("dir", ".")
        log.info("running %s on %s", args.command, rc.source)
        body, code, extra = HANDLERS[args.command](rc, rc.section("output").get("details", False))
        written = _write_outputs(out_dir, args.command, body, extra, rc)
    except ConfigError as exc:
        print(f"singflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"singflow: numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"singflow: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("wrote %s to %s", ", ".join(written), out_dir)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
