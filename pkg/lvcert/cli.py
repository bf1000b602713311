"""Command implementations behind ``lvcert <command>``.

Each command takes the parsed :class:`RunConfig` and :class:`CliOptions`,
writes its files into the output directory and returns an exit code.
Errors propagate to :mod:`lvcert.main`, which maps them through
:data:`lvcert.errors.EXIT_CODES`.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .config import LogisticSection
from .constants import DEFAULT_FORMATS
from .dde import HistoryFunction, estimate_period, integrate
from .degree import certify
from .errors import Aperiodic, LevelOutOfRange
from .field import radial_profile
from .log import get_logger
from .model import LogisticSystem, LVSystem, check_hypotheses
from .orbitfinder import CollocationProblem, NewtonOptions, sweep, verify_orbit
from .spectrum import amplitude_solve, catalog, critical_delays, select_window
from .utils_io import ensure_writable, write_kv, write_rows, write_text

logger = get_logger(__name__)

CATALOG_HEADER = ["branch", "k", "n", "lambda", "period", "beta_level", "amplitude"]


@dataclass
class CliOptions:
    out: str = None
    force: bool = False
    plot: bool = False
    j: int = None
    logistic: LogisticSection = None
    perturbation: float = 0.01
    echo: object = print


def _wants(config, opts, name):
    """True when the extension of *name* is among the configured output formats."""
    formats = config.output.formats if config is not None else DEFAULT_FORMATS
    kind = os.path.splitext(name)[1].lstrip(".")
    if kind == "png":
        return opts.plot or kind in formats
    return kind in formats


def _out(config, opts, name):
    """Checked output path for *name*, or ``None`` when its format is switched off."""
    if not _wants(config, opts, name):
        logger.debug("skipping %s: format not selected", name)
        return None
    folder = opts.out or (config.output.directory if config is not None else "out")
    return ensure_writable(os.path.join(folder, name), opts.force)


def _system(config):
    return LVSystem.from_config(config.system)


def _candidates_with_amplitudes(system, win, geometry):
    profile = radial_profile(geometry.alpha0, geometry.radius_r, geometry.radius_R)
    out = []
    for cand in catalog(system, win):
        try:
            out.append(cand.with_amplitude(amplitude_solve(cand, profile)))
        except LevelOutOfRange as exc:
            logger.warning("candidate %s: %s", cand.key, exc)
            out.append(cand)
    return out


# ----------------------------
# check
# ----------------------------
def cmd_check(config, opts):
    s = config.system
    A = [[s.a11, s.a12], [s.a21, s.a22]]
    report = check_hypotheses(A, [s.r1, s.r2], s.tau if s.tau > 0 else None)
    path = _out(config, opts, "hypotheses.txt")
    if path:
        write_text(path, report.lines())
    for line in report.lines():
        opts.echo(line)
    return 0 if report.passed else 1


# ----------------------------
# spectrum
# ----------------------------
def cmd_spectrum(config, opts):
    system = _system(config)
    win = select_window(system, opts.j)
    cands = _candidates_with_amplitudes(system, win, config.geometry)
    rows = [(c.branch, c.k, c.n, c.lam, c.period, c.beta_level, c.amplitude) for c in cands]
    path = _out(config, opts, "catalog.csv")
    if path:
        write_rows(path, CATALOG_HEADER, rows)
    opts.echo(
        f"n1={win.n1} n2={win.n2} j={win.j} lambda=({win.lambda_lo:.12g}, {win.lambda_hi:.12g}) "
        f"k0={win.k0} candidates={len(cands)}"
    )
    for mu_i in win.mu:
        delays = critical_delays(mu_i, max(win.n2, 1))
        logger.info("branch mu=%.12g critical delays %s", mu_i, ", ".join(f"{d:.6g}" for d in delays))
    return 0


# ----------------------------
# simulate
# ----------------------------
def _logistic_run(config, opts):
    section = opts.logistic or (config.logistic if config is not None else None) or LogisticSection()
    system = LogisticSystem(section.alpha, section.tau)
    history = HistoryFunction.constant([section.u0])
    return system, history


def cmd_simulate(config, opts):
    solver = config.solver if config is not None else None
    if opts.logistic is not None or config is None:
        system, history = _logistic_run(config, opts)
    else:
        system = _system(config)
        history = HistoryFunction.constant(system.b * (1.0 + opts.perturbation * np.array([1.0, -0.5])))
    t_end = solver.t_end if solver is not None else 300.0
    h = solver.rk4_step if solver is not None else None
    traj = integrate(system, history, t_end, h=h, frame="original_u")
    path = _out(config, opts, "trajectory.csv")
    if path:
        traj.write_csv(path)
    path = _out(config, opts, "trajectory.png")
    if path:
        from .utils_plot import save_trajectory_png

        save_trajectory_png(traj, path)

    skip = solver.transient(system.tau) if solver is not None else 50.0 * system.tau
    try:
        period, confidence = estimate_period(traj, min(skip, 0.5 * t_end))
    except Aperiodic as exc:
        period, confidence = math.nan, max(exc.confidence, 0.0)
    if math.isfinite(period):
        opts.echo(f"period={period:.17g} confidence={confidence:.17g}")
    else:
        opts.echo(f"period=nan confidence={confidence:g}")
    return 0


# ----------------------------
# find
# ----------------------------
def cmd_find(config, opts):
    system = _system(config)
    win = select_window(system, opts.j)
    cands = _candidates_with_amplitudes(system, win, config.geometry)
    solver = config.solver
    prob = CollocationProblem(system=system, K=solver.K, M=solver.grid)
    newton = NewtonOptions(tol=solver.newton_tol, max_iters=solver.max_iters)
    found = sweep(prob, win, cands, newton, jobs=solver.jobs, restarts=solver.restarts, seed=solver.seed)
    if not found:
        opts.echo("no orbit converged")
        return 4

    verified = [(sol, verify_orbit(sol, system, win, solver.rk4_step)) for sol in found]
    best = next(((s, r) for s, r in verified if r.passed), None)
    sol, report = best or verified[0]
    path = _out(config, opts, "orbit.csv")
    if path:
        sol.write_csv(path, solver.grid)
    lines = [
        f"orbits found: {len(found)}",
        f"lambda={sol.lam:.17g} period={sol.period:.17g} residual={sol.residual:.3e} iterations={sol.newton_iters}",
    ] + report.lines()
    path = _out(config, opts, "verification.txt")
    if path:
        write_text(path, lines)
    path = _out(config, opts, "orbit.png")
    if path:
        from .utils_plot import save_orbit_png

        save_orbit_png(sol, path)
    for line in lines:
        opts.echo(line)
    return 0 if best is not None else 4


# ----------------------------
# certify
# ----------------------------
def cmd_certify(config, opts):
    system = _system(config)
    cert = certify(system, config=config, j=opts.j, jobs=config.solver.jobs)
    path = _out(config, opts, "certificate.txt")
    if path:
        write_text(path, cert.to_text())
    path = _out(config, opts, "certificate.kv")
    if path:
        write_kv(path, cert.to_kv())
    opts.echo(cert.verdict)
    return 0 if cert.nontrivial else 5


COMMANDS = {
    "check": cmd_check,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "find": cmd_find,
    "certify": cmd_certify,
}
