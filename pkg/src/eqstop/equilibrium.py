"""Numerical verification of the equilibrium system for mixed strategies.

A candidate strategy (lambda, C) with value pieces phi, psi is checked
against the pointwise system

    (I)    J - f - g(h)                          >= 0      on C
    (II)   A_X f + g'(h) A_X h                   <= 0      on int(C^c)
    (III)  f - phi + g'(psi)(h - psi)             = 0      on {x in C : lambda > 0}
    (IV)   f - phi + g'(psi)(h - psi)            <= 0      on {x in C : lambda = 0}
    (V)    one-sided generator inequality        <= 0      on the boundary of C,

with smooth fit J'(x) = f'(x) + g'(h(x)) h'(x) as the prerequisite for (V).
Closed-form inputs are tested at absolute tolerance 1e-9; Monte Carlo inputs
at three standard errors.  Deviation-gain ladders corroborate verdicts by
estimating the first-order gain of spliced deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _sampling
from .diffusion import DiffusionModel, PathConfig, sample_symmetric_exit_batch
from .errors import DomainError, MissingDerivativeError
from .payoff import Problem, estimate_values
from .strategy import ContinuationSet, MixedStrategy, PointClass, classify_point

__all__ = [
    "ValueFunctions",
    "PointCheck",
    "ConditionVerdict",
    "EquilibriumReport",
    "check_condition_I",
    "check_condition_II",
    "check_condition_III_IV",
    "check_smooth_fit",
    "check_condition_V_sufficient",
    "run_full_report",
    "deviation_gain",
    "deviation_gain_limit",
    "local_time_limit_check",
    "mc_value_functions",
]

CLOSED_FORM_TOL = 1e-9
MC_SIGMAS = 3.0
FD_STEP = 1e-4

LEFT = -1
RIGHT = +1


def _fd_d1(f: Callable, x: float, side: int, step: float = FD_STEP) -> float:
    """One-sided 4-point first derivative, O(step^3)."""
    h = side * step
    return (
        -11.0 * f(x) / 6.0 + 3.0 * f(x + h) - 1.5 * f(x + 2 * h) + f(x + 3 * h) / 3.0
    ) / h


def _fd_d2(f: Callable, x: float, side: int, step: float = FD_STEP) -> float:
    """One-sided 4-point second derivative, O(step^2)."""
    h = side * step
    return (2.0 * f(x) - 5.0 * f(x + h) + 4.0 * f(x + 2 * h) - f(x + 3 * h)) / (h * h)


@dataclass(frozen=True)
class ValueFunctions:
    """phi and psi of a strategy with one-sided derivative access.

    Derivative callables take (x, side) with side -1/+1 for the left/right
    limit; when absent they fall back to one-sided finite differences with
    step 1e-4.  Monte Carlo grids attach per-point standard errors through
    phi_se / psi_se.
    """

    phi: Callable
    psi: Callable
    phi_d1: Optional[Callable] = None
    psi_d1: Optional[Callable] = None
    phi_d2: Optional[Callable] = None
    psi_d2: Optional[Callable] = None
    phi_se: Optional[Callable] = None
    psi_se: Optional[Callable] = None
    mode: str = "closed-form"

    def d1(self, which: str, x: float, side: int) -> float:
        fn = self.phi_d1 if which == "phi" else self.psi_d1
        if fn is not None:
            return float(fn(x, side))
        return _fd_d1(self.phi if which == "phi" else self.psi, x, side)

    def d2(self, which: str, x: float, side: int) -> float:
        fn = self.phi_d2 if which == "phi" else self.psi_d2
        if fn is not None:
            return float(fn(x, side))
        return _fd_d2(self.phi if which == "phi" else self.psi, x, side)

    def j(self, x: float, problem: Problem) -> float:
        return float(self.phi(x)) + float(problem.g.value(self.psi(x)))

    def se(self, x: float):
        if self.phi_se is None:
            return 0.0, 0.0
        return float(self.phi_se(x)), float(self.psi_se(x))


@dataclass(frozen=True)
class PointCheck:
    x: float
    residual: float
    tol: float
    passed: bool
    uncertain: bool = False


@dataclass
class ConditionVerdict:
    condition: str
    points: list
    overall: str = "pass"  # pass / fail / inconclusive (vacuous = pass, no points)

    @classmethod
    def gather(cls, condition: str, points) -> "ConditionVerdict":
        points = list(points)
        if any((not p.passed) and not p.uncertain for p in points):
            overall = "fail"
        elif any(p.uncertain for p in points):
            overall = "inconclusive"
        else:
            overall = "pass"
        return cls(condition, points, overall)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "overall": self.overall,
            "points": [
                {"x": p.x, "residual": p.residual, "tol": p.tol, "pass": bool(p.passed)}
                for p in self.points
            ],
        }


def _point(x, residual, tol, se, orientation) -> PointCheck:
    """orientation 'le' (residual <= tol), 'ge' (>= -tol) or 'eq' (|residual| <= tol)."""
    if orientation == "le":
        margin = residual
    elif orientation == "ge":
        margin = -residual
    else:
        margin = abs(residual)
    passed = margin <= tol
    uncertain = (not passed) and (margin - 2.0 * se <= tol)
    return PointCheck(float(x), float(residual), float(tol), bool(passed), bool(uncertain))


def _tol(se_pair) -> float:
    se = math.hypot(se_pair[0], se_pair[1])
    return CLOSED_FORM_TOL if se == 0.0 else MC_SIGMAS * se


def check_condition_I(problem: Problem, vf: ValueFunctions, grid) -> ConditionVerdict:
    """J - f - g(h) >= 0 on the continuation set."""
    pts = []
    for x in np.atleast_1d(grid):
        r = vf.j(x, problem) - float(problem.stop_value(x))
        se_phi, se_psi = vf.se(x)
        gp = abs(float(problem.g.d1(vf.psi(x))))
        se = math.hypot(se_phi, gp * se_psi)
        pts.append(_point(x, r, _tol((se, 0.0)), se, "ge"))
    return ConditionVerdict.gather("I", pts)


def check_condition_II(problem: Problem, model: DiffusionModel, grid) -> ConditionVerdict:
    """A_X f + g'(h) A_X h <= 0 on the interior of the stopping region."""
    f, g, h = problem.f, problem.g, problem.h
    if f.d2 is None or h.d2 is None:
        raise MissingDerivativeError("condition II needs f'' and h''")
    pts = []
    for x in np.atleast_1d(grid):
        mu = float(model.drift(x))
        half_s2 = 0.5 * float(model.vol2(x))
        axf = mu * float(f.d1(x)) + half_s2 * float(f.d2(x))
        axh = mu * float(h.d1(x)) + half_s2 * float(h.d2(x))
        r = axf + float(g.d1(h.value(x))) * axh
        pts.append(_point(x, r, CLOSED_FORM_TOL, 0.0, "le"))
    return ConditionVerdict.gather("II", pts)


def check_condition_III_IV(
    problem: Problem, strategy: MixedStrategy, vf: ValueFunctions, grid
) -> ConditionVerdict:
    """First-order intensity condition on C: = 0 where lambda > 0, <= 0 where lambda = 0."""
    pts_eq, pts_le = [], []
    for x in np.atleast_1d(grid):
        phi, psi = float(vf.phi(x)), float(vf.psi(x))
        r = (
            float(problem.f.value(x))
            - phi
            + float(problem.g.d1(psi)) * (float(problem.h.value(x)) - psi)
        )
        se_phi, se_psi = vf.se(x)
        se = math.hypot(se_phi, abs(float(problem.g.d1(psi))) * se_psi)
        tol = _tol((se, 0.0))
        if strategy.lam(x) > 0.0:
            pts_eq.append(_point(x, r, tol, se, "eq"))
        else:
            pts_le.append(_point(x, r, tol, se, "le"))
    return (
        ConditionVerdict.gather("III", pts_eq),
        ConditionVerdict.gather("IV", pts_le),
    )


def _smooth_fit_residual(problem: Problem, vf: ValueFunctions, x: float, side_c: int) -> float:
    jp = vf.d1("phi", x, side_c) + float(problem.g.d1(vf.psi(x))) * vf.d1("psi", x, side_c)
    target = float(problem.f.d1(x)) + float(problem.g.d1(problem.h.value(x))) * float(
        problem.h.d1(x)
    )
    return jp - target


def check_smooth_fit(
    problem: Problem, vf: ValueFunctions, x: float, side_c: int
) -> ConditionVerdict:
    """J'(x, from inside C) = f'(x) + g'(h(x)) h'(x) at a boundary point."""
    r = _smooth_fit_residual(problem, vf, x, side_c)
    se_phi, se_psi = vf.se(x)
    se = (se_phi + se_psi) / FD_STEP if se_phi or se_psi else 0.0
    return ConditionVerdict.gather("smooth_fit", [_point(x, r, _tol((se, 0.0)), se, "eq")])


def check_condition_V_sufficient(
    problem: Problem,
    model: DiffusionModel,
    vf: ValueFunctions,
    x: float,
    side_c: int,
    smooth_fit_ok: Optional[bool] = None,
) -> ConditionVerdict:
    """Second-order boundary condition equivalent to (V) under smooth fit.

    A_X phi(x+) + g'(psi) A_X psi(x+) + A_X phi(x-) + g'(psi) A_X psi(x-)
      + g''(psi) ((psi'(x+) - psi'(x-))/2)^2 sigma^2(x) <= 0.
    """
    if smooth_fit_ok is None:
        smooth_fit_ok = check_smooth_fit(problem, vf, x, side_c).overall == "pass"
    if not smooth_fit_ok:
        pt = PointCheck(float(x), math.nan, CLOSED_FORM_TOL, False, True)
        return ConditionVerdict("V", [pt], "inconclusive")
    mu = float(model.drift(x))
    half_s2 = 0.5 * float(model.vol2(x))
    gp = float(problem.g.d1(vf.psi(x)))
    total = 0.0
    for side in (RIGHT, LEFT):
        ax_phi = mu * vf.d1("phi", x, side) + half_s2 * vf.d2("phi", x, side)
        ax_psi = mu * vf.d1("psi", x, side) + half_s2 * vf.d2("psi", x, side)
        total += ax_phi + gp * ax_psi
    jump = 0.5 * (vf.d1("psi", x, RIGHT) - vf.d1("psi", x, LEFT))
    total += float(problem.g.d2(vf.psi(x))) * jump * jump * float(model.vol2(x))
    return ConditionVerdict.gather("V", [_point(x, total, CLOSED_FORM_TOL, 0.0, "le")])


@dataclass
class EquilibriumReport:
    verdicts: dict
    grid: np.ndarray
    counts: dict
    overall: str

    def to_dict(self) -> dict:
        return {
            "verdicts": [v.to_dict() for v in self.verdicts.values()],
            "summary": self.overall,
            "grid_points": len(self.grid),
            "dispatch_counts": self.counts,
        }


def run_full_report(
    problem: Problem,
    model: DiffusionModel,
    strategy: MixedStrategy,
    vf: Optional[ValueFunctions],
    grid,
) -> EquilibriumReport:
    """Dispatch every grid point to its condition and assemble verdicts.

    Boundary conditions (smooth fit and (V)) are evaluated at the exact
    finite endpoints of C interior to the state interval, regardless of
    whether the grid contains them.
    """
    grid = np.sort(np.atleast_1d(np.asarray(grid, dtype=float)))
    c = strategy.continuation
    in_c, int_comp, boundary = [], [], []
    for x in grid:
        cls = classify_point(c, x, model.state_interval)
        if cls is PointClass.IN_C:
            in_c.append(x)
        elif cls is PointClass.INT_COMPLEMENT:
            int_comp.append(x)
        else:
            boundary.append(x)

    needs_vf = bool(in_c) or bool(c.boundary(model.state_interval))
    if needs_vf and vf is None:
        raise DomainError("value functions are required when C is nonempty")

    verdicts = {}
    verdicts["I"] = check_condition_I(problem, vf, in_c) if in_c else ConditionVerdict("I", [])
    verdicts["II"] = (
        check_condition_II(problem, model, int_comp) if int_comp else ConditionVerdict("II", [])
    )
    if in_c:
        v3, v4 = check_condition_III_IV(problem, strategy, vf, in_c)
    else:
        v3, v4 = ConditionVerdict("III", []), ConditionVerdict("IV", [])
    verdicts["III"], verdicts["IV"] = v3, v4

    sf_pts, v_verdicts = [], []
    for b in c.boundary(model.state_interval):
        inside, _, _ = _sampling.containing_interval(c.intervals, b - 1e-9)
        side_c = LEFT if inside[0] else RIGHT
        sf = check_smooth_fit(problem, vf, b, side_c)
        sf_pts.extend(sf.points)
        v_verdicts.append(
            check_condition_V_sufficient(
                problem, model, vf, b, side_c, smooth_fit_ok=sf.overall == "pass"
            )
        )
    verdicts["smooth_fit"] = ConditionVerdict.gather("smooth_fit", sf_pts) if sf_pts else ConditionVerdict("smooth_fit", [])
    verdicts["V"] = (
        ConditionVerdict.gather("V", [p for v in v_verdicts for p in v.points])
        if v_verdicts
        else ConditionVerdict("V", [])
    )
    if any(v.overall == "inconclusive" for v in v_verdicts):
        verdicts["V"].overall = "inconclusive"

    counts = {
        "in_C": len(in_c),
        "int_complement": len(int_comp),
        "boundary": len(boundary),
    }
    states = [v.overall for v in verdicts.values()]
    overall = "fail" if "fail" in states else ("inconclusive" if "inconclusive" in states else "pass")
    return EquilibriumReport(verdicts, grid, counts, overall)


# ---------------------------- deviation gains ----------------------------- #


def _intersect(intervals, lo, hi):
    out = []
    for l, r in intervals:
        a, b = max(l, lo), min(r, hi)
        if a < b:
            out.append((a, b))
    return out


@dataclass(frozen=True)
class GainEstimate:
    h: float
    estimate: float
    std_error: float


def deviation_gain(
    problem: Problem,
    model: DiffusionModel,
    strategy: MixedStrategy,
    eta,
    d_set: ContinuationSet,
    x: float,
    h_values,
    config: PathConfig,
    n_paths: int = 20_000,
    j_baseline: Optional[float] = None,
    threads: int = 1,
):
    """Estimate (J_strategy(x) - J_spliced(x)) / E_x tau_h over an h ladder.

    The spliced rule follows the deviation (eta, D) until the first exit
    from (x-h, x+h), then restarts the original strategy; paths share
    counter streams across the two phases and with the tau_h normalizer.
    j_baseline should be the closed-form J of the strategy when available,
    otherwise it is estimated on the same paths.
    """
    eta_const = float(eta) if not callable(eta) else None
    if eta_const is not None and eta_const < 0.0:
        raise DomainError("deviation intensity must be nonnegative")

    if j_baseline is None:
        base = estimate_values(problem, model, strategy, x, config, n_paths, threads=threads)
        j_baseline = base.j

    results = []
    paths = np.arange(n_paths, dtype=np.uint64)
    for h in h_values:
        window = _intersect(d_set.intervals, x - h, x + h)
        if eta_const is not None:
            lam_kind = _sampling.LAM_CONST if eta_const > 0 else _sampling.LAM_ZERO
            lam_args = dict(lam_fn=None)
            lam_c = eta_const
        else:
            lam_kind, lam_c = _sampling.LAM_FUNC, 0.0
            lam_args = dict(lam_fn=eta)
        st1, t1, k1, kend = _sampling.run_batch(
            model, window, lam_kind, lam_c, x, config.horizon, config.seed,
            config.dt, paths, antithetic=config.antithetic, threads=threads, **lam_args,
        )

        # Paths that reached x +/- h strictly inside D continue with the
        # strategy; exit states snap exactly to the barrier values, so exact
        # float comparison is reliable here.
        at_edge = (k1 == _sampling.KIND_EXIT) & ((st1 == x + h) | (st1 == x - h))
        inside_d, _, _ = _sampling.containing_interval(d_set.intervals, st1)
        cont = at_edge & inside_d

        final_state = st1.copy()
        final_kind = k1.copy()
        if cont.any():
            lam_kind2, lam_c2, lam_fn2 = _sampling.lam_spec(strategy)
            st2, t2, k2, _ = _sampling.run_batch(
                model,
                strategy.continuation.intervals,
                lam_kind2,
                lam_c2,
                st1[cont],
                config.horizon - t1[cont],
                config.seed,
                config.dt,
                paths[cont],
                antithetic=config.antithetic,
                k0=kend[cont],
                lam_fn=lam_fn2,
                threads=threads,
            )
            final_state[cont] = st2
            final_kind[cont] = k2

        censored = final_kind == _sampling.KIND_CENSORED
        if censored.any() and model.limit_state is not None:
            final_state = final_state.copy()
            final_state[censored] = model.limit_state

        f_vals = np.asarray(problem.f.value(final_state), dtype=float)
        h_vals = np.asarray(problem.h.value(final_state), dtype=float)
        phi_m = float(np.mean(f_vals))
        psi_m = float(np.mean(h_vals))
        gp = float(problem.g.d1(psi_m))
        n = n_paths
        var_j = (
            np.var(f_vals, ddof=1) / n
            + gp**2 * np.var(h_vals, ddof=1) / n
            + 2.0 * gp * np.cov(f_vals, h_vals, ddof=1)[0, 1] / n
        )
        j_spliced = phi_m + float(problem.g.value(psi_m))

        _, tau = sample_symmetric_exit_batch(model, x, h, config, n_paths, threads=threads)
        tau_mean = float(np.mean(tau))
        results.append(
            GainEstimate(float(h), (j_baseline - j_spliced) / tau_mean,
                         math.sqrt(max(var_j, 0.0)) / tau_mean)
        )
    return results


def deviation_gain_limit(
    problem: Problem,
    model: DiffusionModel,
    strategy: MixedStrategy,
    vf: Optional[ValueFunctions],
    eta,
    d_set: ContinuationSet,
    x: float,
) -> float:
    """Closed-form first-order gain limit of a deviation at x.

    Inside C cap D the limit is (lambda - eta)(f - phi + g'(psi)(h - psi));
    on int(C^c) cap D it is -A_X f - g'(h) A_X h; outside D the numerator is
    the constant J - f - g(h), so the normalized limit is 0 when that
    constant vanishes and +/- infinity otherwise.
    """
    eta_x = float(eta(x)) if callable(eta) else float(eta)
    inside_d, _, _ = _sampling.containing_interval(d_set.intervals, x)
    if not inside_d[0]:
        if not strategy.continuation.contains(x):
            return 0.0
        const = vf.j(x, problem) - float(problem.stop_value(x))
        if abs(const) <= CLOSED_FORM_TOL:
            return 0.0
        return math.inf if const > 0 else -math.inf
    if strategy.continuation.contains(x):
        phi, psi = float(vf.phi(x)), float(vf.psi(x))
        braces = (
            float(problem.f.value(x))
            - phi
            + float(problem.g.d1(psi)) * (float(problem.h.value(x)) - psi)
        )
        return (strategy.lam(x) - eta_x) * braces
    mu = float(model.drift(x))
    half_s2 = 0.5 * float(model.vol2(x))
    axf = mu * float(problem.f.d1(x)) + half_s2 * float(problem.f.d2(x))
    axh = mu * float(problem.h.d1(x)) + half_s2 * float(problem.h.d2(x))
    return -axf - float(problem.g.d1(problem.h.value(x))) * axh


def local_time_limit_check(
    model: DiffusionModel,
    k: Callable,
    x: float,
    h_values,
    config: PathConfig,
    n_paths: int = 100_000,
    d1_plus: Optional[float] = None,
    d1_minus: Optional[float] = None,
    threads: int = 1,
):
    """Ladder estimates of (E_x k(X_{tau_h}) - k(x))^2 / E_x tau_h.

    The limit is ((k'(x+) - k'(x-))/2)^2 sigma^2(x); one-sided slopes fall
    back to finite differences.  Returns (estimates, target).
    """
    if d1_plus is None:
        d1_plus = _fd_d1(k, x, RIGHT)
    if d1_minus is None:
        d1_minus = _fd_d1(k, x, LEFT)
    target = ((d1_plus - d1_minus) / 2.0) ** 2 * float(model.vol2(x))
    out = []
    for h in h_values:
        states, taus = sample_symmetric_exit_batch(model, x, h, config, n_paths, threads=threads)
        kv = np.asarray(k(states), dtype=float)
        km = float(np.mean(kv))
        tm = float(np.mean(taus))
        delta = km - float(k(x))
        est = delta * delta / tm
        se_k = float(np.std(kv, ddof=1)) / math.sqrt(n_paths)
        se_t = float(np.std(taus, ddof=1)) / math.sqrt(n_paths)
        se = math.hypot(2.0 * abs(delta) * se_k / tm, est * se_t / tm)
        out.append(GainEstimate(float(h), est, se))
    return out, target


def mc_value_functions(
    problem: Problem,
    model: DiffusionModel,
    strategy: MixedStrategy,
    xs,
    config: PathConfig,
    n_paths: int = 20_000,
    threads: int = 1,
) -> ValueFunctions:
    """Estimate phi and psi on a grid; evaluation interpolates linearly.

    Points share counter streams (common random numbers) so finite
    differences of neighboring grid values stay usable.
    """
    xs = np.sort(np.atleast_1d(np.asarray(xs, dtype=float)))
    phi_v, psi_v, phi_e, psi_e = [], [], [], []
    for x in xs:
        vt = estimate_values(problem, model, strategy, x, config, n_paths, threads=threads)
        phi_v.append(vt.phi.estimate)
        psi_v.append(vt.psi.estimate)
        phi_e.append(vt.phi.std_error)
        psi_e.append(vt.psi.std_error)
    phi_v, psi_v = np.array(phi_v), np.array(psi_v)
    phi_e, psi_e = np.array(phi_e), np.array(psi_e)
    return ValueFunctions(
        phi=lambda x: float(np.interp(x, xs, phi_v)),
        psi=lambda x: float(np.interp(x, xs, psi_v)),
        phi_se=lambda x: float(np.interp(x, xs, phi_e)),
        psi_se=lambda x: float(np.interp(x, xs, psi_e)),
        mode="mc-grid",
    )
