"""Monge-Ampere solvers: damped-Newton continuity path and parabolic flow.

Both solvers produce the unique normalized pair ``(phi, b)`` with

    log det(g + ddbar phi) - log det(g) = F + b,      sup phi = 0,

and both keep every accepted iterate inside the positivity cone
``min eig(g + ddbar phi) >= floor``.

The continuity path marches ``t`` from 0 to 1 through the family with data
``t F``; at each checkpoint a damped Newton iteration solves the bordered
system

    L psi - db = -r,       <psi, w> = 0,

where ``L`` is the tilted-metric linearization and ``w`` the Gauduchon
weight of the background; the weight makes the bordered operator
nonsingular because constants span both kernels.  The flow solver
integrates ``dphi/dt = log-density - F`` minus its weighted mean (the mean
accumulates into ``b``) with an explicit stabilized Runge-Kutta-Chebyshev
scheme whose step obeys a parabolic CFL bound; a classical RK4 integrator
with ``dt = factor * h^2`` is available for cross-checking.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .calculus import Geometry
from .errors import (FlowNoConvergence, NotPositive, PathStalled)
from .gauduchon import gauduchon_factor
from .grid import ScalarField
from .operators import (background_positivity_floor, canonical_op,
                        linearized_apply, ma_log_density, tilted_metric)
from .stencilops import FlatSymbolPreconditioner, LatticeProjection, gmres_solve
from .verify import estimate_monitors

__all__ = ["SolveOptions", "SolveReport", "residual", "solve_continuity", "solve_flow"]


@dataclass
class SolveOptions:
    """Tolerances and controls shared by both solvers."""

    path: str = "continuity"
    t_step_init: float = 1.0
    t_step_min: float = 1.0 / 64.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 30
    damping_min: float = 1.0 / 256.0
    positivity_floor: float = 0.05
    flow_dt_factor: float = 0.2
    flow_stop_tol: float = 1e-7
    flow_max_steps: int = 100000
    flow_integrator: str = "chebyshev"
    flow_stages: int = 24
    # inexact-Newton linear tolerance: outer iterations absorb the slack
    krylov_tol: float = 1e-6
    krylov_max_iter: int = 6000
    monitor_stride: int = 5
    use_flat_preconditioner: bool = True

    def __post_init__(self):
        if self.path not in ("continuity", "flow"):
            raise ValueError(f"unknown path {self.path!r}")
        if self.flow_integrator not in ("chebyshev", "rkc", "rk4"):
            raise ValueError(f"unknown flow integrator {self.flow_integrator!r}")
        if not 0.0 < self.positivity_floor < 1.0:
            raise ValueError("positivity_floor must lie in (0, 1)")
        for name in ("t_step_init", "t_step_min", "newton_tol", "damping_min",
                     "flow_dt_factor", "flow_stop_tol", "krylov_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveReport:
    """Solution pair with the convergence record of the run."""

    phi: ScalarField
    b: float
    residual_history: list = field(default_factory=list)
    positivity_margin_history: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    iterations: int = 0
    wall_time: float = 0.0
    method: str = ""
    # sup-norm of the raw final residual including the sawtooth-lattice
    # spectral tail the discrete Hessian cannot act on (diagnostic)
    unprojected_residual: float = 0.0

    def summary(self) -> dict:
        return {
            "b": self.b,
            "sup_phi": float(np.max(self.phi.values)),
            "inf_phi": float(np.min(self.phi.values)),
            "final_residual": self.residual_history[-1][1] if self.residual_history else None,
            "min_positivity_margin": min(self.positivity_margin_history)
            if self.positivity_margin_history else None,
            "iterations": self.iterations,
            "method": self.method,
        }


def residual(geom: Geometry, phi: ScalarField, b: float, F: ScalarField) -> ScalarField:
    """Pointwise ``log-density(phi) - F - b`` (raises if positivity fails)."""
    geom.check_field(F)
    logdet, _ = ma_log_density(geom, phi)
    return ScalarField(geom.grid, logdet.values - F.values - b)


class _Weight:
    """Gauduchon weight of the background, computed on first use.

    Trivial right-hand sides converge before any linear algebra happens, so
    the (comparatively expensive) conformal-factor solve is deferred until a
    weighted mean or a gauge constraint actually needs it.
    """

    def __init__(self, geom: Geometry):
        self.geom = geom
        self._density = None

    @property
    def density(self) -> np.ndarray:
        if self._density is None:
            factor = gauduchon_factor(self.geom)
            self._density = np.ascontiguousarray(
                np.broadcast_to(factor.weight_density, self.geom.grid.shape))
        return self._density

    def mean(self, values: np.ndarray) -> float:
        w = self.density
        return float(np.sum(values * w) / np.sum(w))


def _sup_normalize(phi_values: np.ndarray) -> np.ndarray:
    return phi_values - np.max(phi_values)


def _estimate_spectral_bound(geom: Geometry) -> float:
    """Largest canonical-Laplacian eigenvalue magnitude (cached power iteration)."""
    got = geom._cache.get("lap_spectral_bound")
    if got is not None:
        return got
    op = canonical_op(geom)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(geom.grid.shape)
    lam = 1.0
    for _ in range(12):
        v = v / np.linalg.norm(v)
        w = op.apply_real(v)
        lam = float(np.linalg.norm(w))
        v = w
    geom._cache["lap_spectral_bound"] = lam
    return lam


class _NewtonFailure(Exception):
    pass


def _newton_solve(geom, F_values, t, phi, b, opts, weight, floor, report, project):
    """Damped Newton at fixed ``t``; mutates nothing, returns (phi, b, tilted).

    Convergence is measured on the lattice-projected residual: the sawtooth
    lattice modes are invisible to the discrete complex Hessian (they are
    gauge), so only the projected part of the equation is solvable.  The
    unprojected leftover is the spectral tail of the data and is reported
    separately by the caller.
    """
    grid = geom.grid
    precond = FlatSymbolPreconditioner(grid, scale=0.5, const_mode=1.0) \
        if opts.use_flat_preconditioner else None
    npoints = grid.num_points

    logdet, tilted = ma_log_density(geom, phi)
    r = project.apply(logdet.values - t * F_values) - b
    sup_r = float(np.max(np.abs(r)))

    for iteration in range(opts.newton_max_iter):
        report.residual_history.append((t, sup_r))
        report.positivity_margin_history.append(tilted.min_eigenvalue)
        if sup_r <= opts.newton_tol:
            return phi, b, tilted
        if tilted.min_eigenvalue < floor:
            raise _NewtonFailure("iterate left the positivity cone")

        wdens = weight.density
        wsum = float(np.sum(wdens))

        def matvec(x):
            psi = x[:-1].reshape(grid.shape)
            db = x[-1]
            top = project.apply(
                linearized_apply(geom, tilted, ScalarField(grid, psi)).values) - db
            bottom = float(np.sum(psi * wdens)) / wsum
            return np.concatenate([top.ravel(), [bottom]])

        def msolve(x):
            rho = x[:-1].reshape(grid.shape)
            s = x[-1]
            db = -float(np.mean(rho))
            import scipy.fft
            spec = scipy.fft.rfftn(rho + db)
            spec /= precond._sym
            spec[(0,) * grid.dim] = s * npoints
            psi = scipy.fft.irfftn(spec, s=grid.shape)
            return np.concatenate([psi.ravel(), [db]])

        rhs = np.concatenate([(-r).ravel(), [0.0]])
        sol = gmres_solve(matvec, rhs, rtol=opts.krylov_tol,
                          maxiter=opts.krylov_max_iter,
                          M_solve=msolve if precond is not None else None,
                          restart=60, context="bordered Newton solve")
        psi = sol[:-1].reshape(grid.shape)
        db = float(sol[-1])

        alpha = 1.0
        while True:
            phi_try = ScalarField(grid, phi.values + alpha * psi)
            try:
                logdet_try, tilted_try = ma_log_density(geom, phi_try)
            except NotPositive:
                tilted_try = None
            if tilted_try is not None and tilted_try.min_eigenvalue >= floor:
                r_try = project.apply(logdet_try.values - t * F_values) - (b + alpha * db)
                sup_try = float(np.max(np.abs(r_try)))
                if sup_try < sup_r or sup_try <= opts.newton_tol:
                    phi, b = phi_try, b + alpha * db
                    r, sup_r, tilted = r_try, sup_try, tilted_try
                    break
            alpha *= 0.5
            if alpha < opts.damping_min:
                raise _NewtonFailure("damping underflow")
    raise _NewtonFailure("newton iteration limit reached")


def solve_continuity(geom: Geometry, F: ScalarField, opts: SolveOptions | None = None,
                     initial_guess: ScalarField | None = None,
                     initial_b: float = 0.0) -> SolveReport:
    """Continuity-method solve of the Monge-Ampere equation.

    Marches ``t`` from 0 to 1 adaptively (the step halves on Newton failure
    and ``PathStalled`` is raised below ``t_step_min``); ``(phi, b) = (0, 0)``
    solves ``t = 0`` exactly.  A warm start jumps straight to ``t = 1``,
    which doubles as the uniqueness/reproducibility probe: distinct
    admissible starts must land on the same normalized solution.
    """
    opts = opts or SolveOptions()
    geom.check_field(F)
    grid = geom.grid
    start = time.perf_counter()
    report = SolveReport(phi=grid.zeros(), b=0.0, method="continuity")
    weight = _Weight(geom)
    floor = opts.positivity_floor * background_positivity_floor(geom)
    project = LatticeProjection(grid)

    if initial_guess is not None:
        geom.check_field(initial_guess)
        phi = ScalarField(grid, project.apply(initial_guess.values))
        b = float(initial_b)
        t = 1.0
        step = opts.t_step_init
    else:
        phi, b = grid.zeros(), 0.0
        t = 0.0
        step = min(opts.t_step_init, 1.0)

    F_values = F.values
    while True:
        t_next = 1.0 if initial_guess is not None else min(1.0, t + step)
        try:
            phi_new, b_new, tilted = _newton_solve(
                geom, F_values, t_next, phi, b, opts, weight, floor, report, project)
        except _NewtonFailure as exc:
            step *= 0.5
            if step < opts.t_step_min:
                raise PathStalled(
                    f"continuity step underflow at t={t:.4f}: {exc}") from exc
            continue
        phi, b = phi_new, b_new
        t = t_next
        report.monitors.append({"t": t, **estimate_monitors(geom, phi).as_dict()})
        if t >= 1.0:
            break

    phi = ScalarField(grid, _sup_normalize(phi.values))
    report.phi = phi
    report.b = b
    final = residual(geom, phi, b, F)
    report.residual_history.append((1.0, float(np.max(np.abs(project.apply(final.values))))))
    report.unprojected_residual = final.sup_norm()
    report.iterations = len(report.residual_history)
    report.wall_time = time.perf_counter() - start
    return report


# -- flow ---------------------------------------------------------------------------


def _chebyshev_stage_coeffs(s: int, damping: float = 2.0 / 13.0):
    """Coefficients of the s-stage second-order Chebyshev scheme."""
    w0 = 1.0 + damping / s**2
    T = np.empty(s + 1)
    Tp = np.empty(s + 1)
    Tpp = np.empty(s + 1)
    T[0], Tp[0], Tpp[0] = 1.0, 0.0, 0.0
    T[1], Tp[1], Tpp[1] = w0, 1.0, 0.0
    for j in range(2, s + 1):
        T[j] = 2.0 * w0 * T[j - 1] - T[j - 2]
        Tp[j] = 2.0 * T[j - 1] + 2.0 * w0 * Tp[j - 1] - Tp[j - 2]
        Tpp[j] = 4.0 * Tp[j - 1] + 2.0 * w0 * Tpp[j - 1] - Tpp[j - 2]
    w1 = Tp[s] / Tpp[s]
    b = np.empty(s + 1)
    for j in range(2, s + 1):
        b[j] = Tpp[j] / Tp[j] ** 2
    b[0] = b[1] = b[2]
    beta = (1.0 + w0) / w1  # real-axis stability interval
    return w0, w1, b, T, beta


def _rkc2_step(rhs, y: np.ndarray, dt: float, s: int):
    """One s-stage RKC2 super-step; ``rhs`` maps arrays to arrays."""
    w0, w1, b, T, _ = _chebyshev_stage_coeffs(s)
    mu1t = b[1] * w1
    f0 = rhs(y)
    y_jm2 = y
    y_jm1 = y + mu1t * dt * f0
    for j in range(2, s + 1):
        mu = 2.0 * b[j] * w0 / b[j - 1]
        nu = -b[j] / b[j - 2]
        mut = 2.0 * b[j] * w1 / b[j - 1]
        a_jm1 = 1.0 - b[j - 1] * T[j - 1]
        gt = -a_jm1 * mut
        f = rhs(y_jm1)
        y_j = (1.0 - mu - nu) * y + mu * y_jm1 + nu * y_jm2 \
            + mut * dt * f + gt * dt * f0
        y_jm2, y_jm1 = y_jm1, y_j
    return y_jm1


def solve_flow(geom: Geometry, F: ScalarField, opts: SolveOptions | None = None) -> SolveReport:
    """Parabolic Monge-Ampere flow to stationarity.

    ``dphi/dt = log-density(phi) - F - <log-density(phi) - F>_w``; the
    subtracted weighted mean is the running estimate of ``b`` and the gauge
    ``<phi, w> = 0`` is preserved.  Stops when ``sup |dphi/dt|`` drops below
    ``flow_stop_tol``; the stationary point solves the same discrete
    equation as the continuity method.
    """
    opts = opts or SolveOptions()
    geom.check_field(F)
    grid = geom.grid
    start = time.perf_counter()
    report = SolveReport(phi=grid.zeros(), b=0.0, method="flow")
    weight = _Weight(geom)
    floor = opts.positivity_floor * background_positivity_floor(geom)
    project = LatticeProjection(grid)

    F_values = F.values
    phi = np.zeros(grid.shape)

    def log_density_minus_F(values: np.ndarray):
        logdet, tilted = ma_log_density(geom, ScalarField(grid, values))
        if tilted.min_eigenvalue < floor:
            raise NotPositive(tilted.argmin_point, tilted.min_eigenvalue,
                              "flow left the positivity margin")
        return logdet.values - F_values, tilted

    G0, tilted = log_density_minus_F(phi)
    spread = float(np.max(G0) - np.min(G0))
    if spread < opts.flow_stop_tol:
        # already stationary: any positive weight gives the same mean up to
        # the spread, so the Gauduchon solve is skipped
        b = float(np.mean(G0))
        report.phi = ScalarField(grid, _sup_normalize(phi))
        report.b = b
        report.residual_history.append((0.0, spread))
        report.positivity_margin_history.append(tilted.min_eigenvalue)
        report.monitors.append({"time": 0.0,
                                **estimate_monitors(geom, report.phi).as_dict()})
        report.wall_time = time.perf_counter() - start
        return report

    lam0 = _estimate_spectral_bound(geom)
    time_now = 0.0
    G_curr, tilted = G0, tilted
    dt_min = opts.flow_dt_factor * grid.h**2 * 2.0**-12
    steps = 0
    rejected = 0

    def rhs(values: np.ndarray) -> np.ndarray:
        G, _ = log_density_minus_F(values)
        return G - weight.mean(G)

    # Chebyshev (heavy-ball) relaxation state; see _flow_step_chebyshev.
    cheb = {"d": None, "rho": None, "lam_min": None, "lam_max": None,
            "best_rate": np.inf, "stall": 0}

    while steps < opts.flow_max_steps:
        b_now = weight.mean(G_curr)
        rate = float(np.max(np.abs(project.apply(G_curr) - b_now)))
        report.residual_history.append((time_now, rate))
        report.positivity_margin_history.append(tilted.min_eigenvalue)
        if steps % max(1, opts.monitor_stride) == 0:
            report.monitors.append({"time": time_now,
                                    **estimate_monitors(geom, ScalarField(grid, phi)).as_dict()})
        if rate < opts.flow_stop_tol:
            break

        lam = lam0 * max(1.0, 1.2 / tilted.min_eigenvalue)
        if opts.flow_integrator == "chebyshev":
            if cheb["lam_max"] is None:
                cheb["lam_max"] = lam * (2.0 ** rejected)
                cheb["lam_min"] = 0.35 * (2.0 * np.pi / grid.box_length) ** 2 \
                    * min(1.0, tilted.min_eigenvalue)
            if rate > 2.0 * cheb["best_rate"]:
                cheb["stall"] += 1
                if cheb["stall"] > 8:
                    # spectrum escaped the interval: widen and restart momentum
                    cheb["lam_min"] *= 0.5
                    cheb["lam_max"] *= 1.5
                    cheb["d"] = None
                    cheb["stall"] = 0
            cheb["best_rate"] = min(cheb["best_rate"], rate)
            theta = 0.5 * (cheb["lam_max"] + cheb["lam_min"])
            delta = 0.5 * (cheb["lam_max"] - cheb["lam_min"])
            sigma = theta / delta
            try:
                r = G_curr - b_now
                if cheb["d"] is None:
                    d = r / theta
                    cheb["rho"] = 1.0 / sigma
                else:
                    rho = 1.0 / (2.0 * sigma - cheb["rho"])
                    d = rho * cheb["rho"] * cheb["d"] + (2.0 * rho / delta) * r
                    cheb["rho"] = rho
                phi_new = project.apply(phi + d)
                G_new, tilted_new = log_density_minus_F(phi_new)
                cheb["d"] = d
            except NotPositive:
                rejected += 1
                if rejected > 12:
                    raise
                cheb["d"] = None
                cheb["lam_max"] = lam * (2.0 ** rejected)
                continue
            phi, G_curr, tilted = phi_new, G_new, tilted_new
            time_now += 1.0 / theta  # pseudo-time of the underlying Richardson step
            steps += 1
            continue

        if opts.flow_integrator == "rkc":
            # Put the slowest mode near the interior damping optimum of the
            # stability polynomial (z ~ -2); the stage count then follows
            # from the real stability interval beta(s) ~ 0.65 s^2.
            lam_slow = 0.5 * (2.0 * np.pi / grid.box_length) ** 2 \
                * min(1.0, tilted.min_eigenvalue)
            headroom = max(tilted.min_eigenvalue - floor, 0.05)
            dt_stable = min(2.0 / lam_slow, 0.5 * headroom / max(rate, 1e-14))
            s_needed = int(np.ceil(np.sqrt(dt_stable * lam / 0.60))) + 1
            s = int(np.clip(s_needed, 3, max(3, int(opts.flow_stages))))
            beta = _chebyshev_stage_coeffs(s)[4]
            dt_stable = min(dt_stable, 0.9 * beta / lam)
        else:
            s = None
            dt_stable = opts.flow_dt_factor * grid.h**2
        dt = dt_stable / (2 ** rejected)
        if dt < dt_min:
            raise NotPositive((0,) * grid.dim, tilted.min_eigenvalue,
                              "flow time step underflow while restoring positivity")
        try:
            if opts.flow_integrator == "rkc":
                phi_new = _rkc2_step(rhs, phi, dt, s)
            else:
                k1 = rhs(phi)
                k2 = rhs(phi + 0.5 * dt * k1)
                k3 = rhs(phi + 0.5 * dt * k2)
                k4 = rhs(phi + dt * k3)
                phi_new = phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            # lattice gauge: the sawtooth modes feel no restoring force,
            # so their (tiny, nonlinear-tail) sources are projected away
            phi_new = project.apply(phi_new)
            G_new, tilted_new = log_density_minus_F(phi_new)
        except NotPositive:
            rejected += 1
            continue
        rejected = max(0, rejected - 1)
        phi, G_curr, tilted = phi_new, G_new, tilted_new
        time_now += dt
        steps += 1
    else:
        raise FlowNoConvergence(
            f"flow did not reach stationarity within {opts.flow_max_steps} steps")

    b = weight.mean(G_curr)
    report.phi = ScalarField(grid, _sup_normalize(phi))
    report.b = b
    final_rate = float(np.max(np.abs(project.apply(G_curr) - b)))
    report.residual_history.append((time_now, final_rate))
    report.unprojected_residual = float(np.max(np.abs(G_curr - b)))
    report.monitors.append({"time": time_now,
                            **estimate_monitors(geom, report.phi).as_dict()})
    report.iterations = steps
    report.wall_time = time.perf_counter() - start
    return report
