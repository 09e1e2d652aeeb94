"""Closed-form equilibrium constructions for the two GBM problem families,
the equilibrium-intensity ODE machinery, and the two-equilibria example.

Variance problem (f = x^2, g = -x^2, h = x), GBM with 2 mu + sigma2 < 0:
constant intensity lambda = sqrt(-mu^2 (2 mu + sigma2) / sigma2) on C = E
with value J(x) = x^2 / (sqrt(-(2 mu + sigma2)/sigma2) + 1)^2.

Mean-variance problem (f = -gamma x^2, g = x + gamma x^2, h = x), GBM:
four regimes in mu.  For mu in (0, sigma2/4] the equilibrium is the pure
threshold rule at b = xi / (gamma (1 - xi)), xi = 2 mu / sigma2, with
J(x) = x above b and x^(1-xi)(b^xi - gamma b^(1+xi)) + gamma b^(2xi) x^(2-2xi)
below.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .diffusion import DiffusionModel, SmoothFn
from .equilibrium import ValueFunctions
from .errors import DomainError, ParameterConditionError, SingularityError
from .payoff import (
    Problem,
    make_mean_variance_problem,
    make_two_equilibria_problem,
    make_variance_problem,
)
from .strategy import ContinuationSet, MixedStrategy

__all__ = [
    "VarianceSolution",
    "MeanVarianceRegime",
    "MeanVarianceSolution",
    "solve_variance_gbm",
    "solve_mean_variance_gbm",
    "variance_value_functions",
    "threshold_value_functions",
    "wiener_window_value_functions",
    "gbm_window_value_functions",
    "gbm_constant_intensity_value_functions",
    "intensity_from_psi",
    "integrate_psi_ode",
    "PsiODEResult",
    "TwoEquilibriaExample",
    "two_equilibria_example",
]


@dataclass(frozen=True)
class VarianceSolution:
    """Constant-intensity equilibrium of the variance problem on C = E."""

    mu: float
    sigma2: float
    lambda_: float
    j_coefficient: float
    psi_slope: float
    phi_coefficient: float

    def value(self, x):
        return self.j_coefficient * np.asarray(x, dtype=float) ** 2

    def psi(self, x):
        return self.psi_slope * np.asarray(x, dtype=float)

    def phi(self, x):
        return self.phi_coefficient * np.asarray(x, dtype=float) ** 2

    def strategy(self) -> MixedStrategy:
        return MixedStrategy.constant(self.lambda_, ContinuationSet.whole((0.0, math.inf)))

    def model(self) -> DiffusionModel:
        return DiffusionModel.gbm(self.mu, self.sigma2)

    def value_functions(self) -> ValueFunctions:
        return variance_value_functions(self.phi_coefficient, self.psi_slope)


def solve_variance_gbm(mu: float, sigma2: float) -> VarianceSolution:
    """Equilibrium intensity and value for the variance problem under GBM.

    Requires sigma2 > 0 and 2 mu + sigma2 < 0 (otherwise the variance of X_t
    diverges as t grows and no such equilibrium exists).
    """
    if sigma2 <= 0.0:
        raise ParameterConditionError("sigma2 must be positive")
    if 2.0 * mu + sigma2 >= 0.0:
        raise ParameterConditionError(
            f"need 2*mu + sigma2 < 0, got {2.0 * mu + sigma2:g}"
        )
    lam = math.sqrt(-(mu**2) * (2.0 * mu + sigma2) / sigma2)
    j_coef = 1.0 / (math.sqrt(-(2.0 * mu + sigma2) / sigma2) + 1.0) ** 2
    return VarianceSolution(
        mu=mu,
        sigma2=sigma2,
        lambda_=lam,
        j_coefficient=j_coef,
        psi_slope=lam / (lam - mu),
        phi_coefficient=lam / (lam - 2.0 * mu - sigma2),
    )


def variance_value_functions(phi_coef: float, psi_slope: float) -> ValueFunctions:
    return ValueFunctions(
        phi=lambda x: phi_coef * x * x,
        psi=lambda x: psi_slope * x,
        phi_d1=lambda x, side: 2.0 * phi_coef * x,
        psi_d1=lambda x, side: psi_slope,
        phi_d2=lambda x, side: 2.0 * phi_coef,
        psi_d2=lambda x, side: 0.0,
    )


class MeanVarianceRegime(enum.Enum):
    STOP_IMMEDIATELY = "stop_immediately"
    THRESHOLD = "threshold"
    NO_EQUILIBRIUM = "no_equilibrium"
    VALUE_UNBOUNDED = "value_unbounded"


@dataclass(frozen=True)
class MeanVarianceSolution:
    regime: MeanVarianceRegime
    mu: float
    sigma2: float
    gamma: float
    xi: float
    b: Optional[float] = None
    coef_lin: Optional[float] = None  # b^xi - gamma b^(1+xi), weight of x^(1-xi)
    coef_quad: Optional[float] = None  # gamma b^(2 xi), weight of x^(2-2xi)

    def value(self, x: float) -> float:
        """Equilibrium value J(x); identity branch for x >= b and for the
        stop-immediately regime (f + g o h = x)."""
        if self.regime is MeanVarianceRegime.STOP_IMMEDIATELY:
            return float(x)
        if self.regime is not MeanVarianceRegime.THRESHOLD:
            raise ParameterConditionError(f"no equilibrium value in regime {self.regime}")
        if x >= self.b:
            return float(x)
        return self.coef_lin * x ** (1.0 - self.xi) + self.coef_quad * x ** (2.0 - 2.0 * self.xi)

    def psi(self, x: float) -> float:
        if self.regime is not MeanVarianceRegime.THRESHOLD:
            raise ParameterConditionError("psi defined only in the threshold regime")
        return float(x) if x >= self.b else self.b**self.xi * x ** (1.0 - self.xi)

    def second_moment(self, x: float) -> float:
        """E_x X^2 at the threshold stop."""
        if self.regime is not MeanVarianceRegime.THRESHOLD:
            raise ParameterConditionError("defined only in the threshold regime")
        return float(x * x) if x >= self.b else self.b ** (1.0 + self.xi) * x ** (1.0 - self.xi)

    def strategy(self) -> MixedStrategy:
        if self.regime is MeanVarianceRegime.STOP_IMMEDIATELY:
            return MixedStrategy.pure(ContinuationSet.empty())
        if self.regime is MeanVarianceRegime.THRESHOLD:
            return MixedStrategy.pure(ContinuationSet([(0.0, self.b)]))
        raise ParameterConditionError(f"no equilibrium strategy in regime {self.regime}")

    def model(self) -> DiffusionModel:
        return DiffusionModel.gbm(self.mu, self.sigma2)

    def value_functions(self) -> Optional[ValueFunctions]:
        if self.regime is MeanVarianceRegime.THRESHOLD:
            return threshold_value_functions(self.mu, self.sigma2, self.gamma, self.b)
        if self.regime is MeanVarianceRegime.STOP_IMMEDIATELY:
            return None
        raise ParameterConditionError(f"no value functions in regime {self.regime}")


def solve_mean_variance_gbm(mu: float, sigma2: float, gamma: float) -> MeanVarianceSolution:
    """Classify the mean-variance problem and return the equilibrium if any.

    mu <= 0: stop immediately.  0 < mu <= sigma2/4: threshold rule at
    b = xi/(gamma(1-xi)).  sigma2/4 < mu < sigma2/2: no equilibrium exists.
    mu >= sigma2/2: the threshold value J(b) = b is unbounded in b.
    """
    if sigma2 <= 0.0:
        raise ParameterConditionError("sigma2 must be positive")
    if gamma <= 0.0:
        raise ParameterConditionError("gamma must be positive")
    xi = 2.0 * mu / sigma2
    if mu <= 0.0:
        return MeanVarianceSolution(MeanVarianceRegime.STOP_IMMEDIATELY, mu, sigma2, gamma, xi)
    if mu <= 0.25 * sigma2:
        b = xi / (gamma * (1.0 - xi))
        return MeanVarianceSolution(
            MeanVarianceRegime.THRESHOLD,
            mu,
            sigma2,
            gamma,
            xi,
            b=b,
            coef_lin=b**xi - gamma * b ** (1.0 + xi),
            coef_quad=gamma * b ** (2.0 * xi),
        )
    if mu < 0.5 * sigma2:
        return MeanVarianceSolution(MeanVarianceRegime.NO_EQUILIBRIUM, mu, sigma2, gamma, xi)
    return MeanVarianceSolution(MeanVarianceRegime.VALUE_UNBOUNDED, mu, sigma2, gamma, xi)


def threshold_value_functions(mu: float, sigma2: float, gamma: float, b: float) -> ValueFunctions:
    """Exact phi, psi for the pure threshold rule at b (any b), x-side pieces.

    phi(x) = -gamma E_x X^2 = -gamma b^(1+xi) x^(1-xi) inside, -gamma x^2
    outside; psi(x) = b^xi x^(1-xi) inside, x outside.
    """
    xi = 2.0 * mu / sigma2
    if not 0.0 < xi < 1.0:
        raise DomainError("threshold value functions need xi in (0, 1)")
    cb1, cb = b ** (1.0 + xi), b**xi

    def inside(x, side):
        return x < b or (x == b and side < 0)

    def phi(x):
        return -gamma * cb1 * x ** (1.0 - xi) if x < b else -gamma * x * x

    def psi(x):
        return cb * x ** (1.0 - xi) if x < b else float(x)

    def phi_d1(x, side):
        if inside(x, side):
            return -gamma * (1.0 - xi) * cb1 * x ** (-xi)
        return -2.0 * gamma * x

    def psi_d1(x, side):
        return (1.0 - xi) * cb * x ** (-xi) if inside(x, side) else 1.0

    def phi_d2(x, side):
        if inside(x, side):
            return gamma * xi * (1.0 - xi) * cb1 * x ** (-xi - 1.0)
        return -2.0 * gamma

    def psi_d2(x, side):
        return -xi * (1.0 - xi) * cb * x ** (-xi - 1.0) if inside(x, side) else 0.0

    return ValueFunctions(phi, psi, phi_d1, psi_d1, phi_d2, psi_d2)


def wiener_window_value_functions(problem: Problem, lo: float, hi: float) -> ValueFunctions:
    """Exact phi, psi for a pure window rule (lo, hi) under a Wiener state.

    Harmonic functions of Brownian motion are affine, so inside the window
    phi interpolates f between the endpoints (and psi interpolates h).
    """
    if not lo < hi:
        raise DomainError("need lo < hi")
    f, h = problem.f, problem.h
    slope_f = (float(f.value(hi)) - float(f.value(lo))) / (hi - lo)
    slope_h = (float(h.value(hi)) - float(h.value(lo))) / (hi - lo)

    def inside(x, side):
        return lo < x < hi or (x == lo and side > 0) or (x == hi and side < 0)

    return ValueFunctions(
        phi=lambda x: float(f.value(lo)) + slope_f * (x - lo) if lo < x < hi else float(f.value(x)),
        psi=lambda x: float(h.value(lo)) + slope_h * (x - lo) if lo < x < hi else float(h.value(x)),
        phi_d1=lambda x, side: slope_f if inside(x, side) else float(f.d1(x)),
        psi_d1=lambda x, side: slope_h if inside(x, side) else float(h.d1(x)),
        phi_d2=lambda x, side: 0.0 if inside(x, side) else float(f.d2(x)),
        psi_d2=lambda x, side: 0.0 if inside(x, side) else float(h.d2(x)),
    )


def gbm_window_value_functions(
    problem: Problem, mu: float, sigma2: float, lo: float, hi: float
) -> ValueFunctions:
    """Exact phi, psi for a pure window rule (lo, hi) under GBM.

    Uses the scale function s(x) = x^(1-xi), xi = 2 mu / sigma2 != 1.  With
    lo = 0 the lower edge is the unattainable boundary: non-hitting paths
    converge to 0 and contribute the payoff limits at 0+ (requires xi < 1).
    """
    xi = 2.0 * mu / sigma2
    if xi == 1.0:
        raise DomainError("xi = 1 (log scale) is out of scope")
    if lo < 0.0 or not lo < hi or not math.isfinite(hi):
        raise DomainError("need 0 <= lo < hi < inf")
    if lo == 0.0 and xi >= 1.0:
        raise DomainError("lo = 0 needs xi < 1 so non-hitting paths converge to 0")
    f, h = problem.f, problem.h
    p = 1.0 - xi
    s_lo = lo**p if lo > 0.0 else 0.0
    span = hi**p - s_lo
    cf = (float(f.value(hi)) - float(f.value(lo))) / span
    ch = (float(h.value(hi)) - float(h.value(lo))) / span
    f_lo, h_lo = float(f.value(lo)), float(h.value(lo))

    def inside(x, side):
        return lo < x < hi or (x == lo and side > 0) or (x == hi and side < 0)

    return ValueFunctions(
        phi=lambda x: f_lo + cf * (x**p - s_lo) if lo < x < hi else float(f.value(x)),
        psi=lambda x: h_lo + ch * (x**p - s_lo) if lo < x < hi else float(h.value(x)),
        phi_d1=lambda x, side: cf * p * x ** (-xi) if inside(x, side) else float(f.d1(x)),
        psi_d1=lambda x, side: ch * p * x ** (-xi) if inside(x, side) else float(h.d1(x)),
        phi_d2=lambda x, side: -cf * p * xi * x ** (-xi - 1.0) if inside(x, side) else float(f.d2(x)),
        psi_d2=lambda x, side: -ch * p * xi * x ** (-xi - 1.0) if inside(x, side) else float(h.d2(x)),
    )


def gbm_constant_intensity_value_functions(
    problem_name: str, mu: float, sigma2: float, lam: float, gamma: float = 1.0
) -> ValueFunctions:
    """Exact phi, psi for a constant intensity on all of (0, inf) under GBM.

    Covers the two named problem families (h = x and f proportional to
    x^2): phi = c_f lam/(lam - 2mu - sigma2) x^2, psi = lam/(lam - mu) x.
    """
    from .payoff import closed_form_values_constant_lambda_gbm

    m1 = closed_form_values_constant_lambda_gbm(mu, sigma2, lam, 1, 1.0)
    m2 = closed_form_values_constant_lambda_gbm(mu, sigma2, lam, 2, 1.0)
    if problem_name == "variance":
        f_coef = 1.0
    elif problem_name == "mean-variance":
        f_coef = -gamma
    else:
        raise DomainError(f"no constant-intensity closed form for problem {problem_name!r}")
    return variance_value_functions(f_coef * m2, m1)


# ------------------------- intensity ODE machinery ------------------------- #


def _ode_numerator(problem: Problem, model: DiffusionModel, x, psi, dpsi) -> float:
    """mu {f' + h' g'(psi)} + (sigma^2/2) {f'' + d} with

    d = g'''(psi) psi'^2 (h - psi) + 2 g''(psi) psi' (h' - psi') + g'(psi) h''.
    """
    f, g, h = problem.f, problem.g, problem.h
    gp, gpp, gppp = g.d1(psi), g.d2(psi), g.d3(psi)
    hv, hp, hpp = h.value(x), h.d1(x), h.d2(x)
    d = gppp * dpsi * dpsi * (hv - psi) + 2.0 * gpp * dpsi * (hp - dpsi) + gp * hpp
    mu = float(model.drift(x))
    return mu * (f.d1(x) + hp * gp) + 0.5 * float(model.vol2(x)) * (f.d2(x) + d)


def intensity_from_psi(
    problem: Problem, model: DiffusionModel, x: float, psi: float, dpsi: float, d2psi: float
) -> float:
    """Equilibrium intensity implied by psi at a point:

    lambda(x) (h - psi)^2 g''(psi) = mu {f' + h' g'(psi)} + (sigma^2/2){f'' + d}.

    The caller must check the returned value is nonnegative before treating
    it as admissible.  d2psi participates through the equivalent generator
    identity and is accepted for interface symmetry.
    """
    hv = problem.h.value(x)
    gpp = problem.g.d2(psi)
    denom = (hv - psi) ** 2 * gpp
    if denom == 0.0 or not np.isfinite(denom):
        raise SingularityError(f"(h-psi)^2 g''(psi) = {denom} at x={x}")
    return float(_ode_numerator(problem, model, x, psi, dpsi) / denom)


@dataclass(frozen=True)
class PsiODEResult:
    xs: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    residual: np.ndarray
    halted: bool
    halt_x: Optional[float] = None


def integrate_psi_ode(
    problem: Problem,
    model: DiffusionModel,
    x0: float,
    psi0: float,
    dpsi0: float,
    x_lo: float,
    x_hi: float,
    step: Optional[float] = None,
) -> PsiODEResult:
    """Integrate the equilibrium psi ODE as a (psi, psi') system with RK4.

        -(mu psi' + (sigma^2/2) psi'')(h - psi) g''(psi) = numerator(x, psi, psi')

    solved for psi'' and integrated both ways from the anchor x0 in [x_lo,
    x_hi] at a fixed step (default 1e-4 of the domain length).  Integration
    halts where (h - psi) g''(psi) crosses zero; the partial result carries
    the halt location.  The residual of the implicit form is reported per
    grid point with psi'' recomputed by central finite differences of the
    integrated psi' (an independent route, so it is not trivially zero).
    """
    if not (x_lo <= x0 <= x_hi and x_lo < x_hi):
        raise DomainError("need x_lo <= x0 <= x_hi")
    if step is None:
        step = 1e-4 * (x_hi - x_lo)

    def d2(x, psi, dpsi):
        hv = problem.h.value(x)
        gpp = problem.g.d2(psi)
        denom = (hv - psi) * gpp
        if abs(denom) < 1e-13 * max(1.0, abs(gpp)):
            raise SingularityError(f"(h - psi) g''(psi) vanished at x={x:.6g}")
        num = _ode_numerator(problem, model, x, psi, dpsi)
        s2 = float(model.vol2(x))
        return (-num / denom - float(model.drift(x)) * dpsi) * 2.0 / s2

    def rk4(x, y0, y1, hstep):
        k1 = (y1, d2(x, y0, y1))
        k2 = (y1 + 0.5 * hstep * k1[1], d2(x + 0.5 * hstep, y0 + 0.5 * hstep * k1[0], y1 + 0.5 * hstep * k1[1]))
        k3 = (y1 + 0.5 * hstep * k2[1], d2(x + 0.5 * hstep, y0 + 0.5 * hstep * k2[0], y1 + 0.5 * hstep * k2[1]))
        k4 = (y1 + hstep * k3[1], d2(x + hstep, y0 + hstep * k3[0], y1 + hstep * k3[1]))
        return (
            y0 + hstep * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0,
            y1 + hstep * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0,
        )

    def sweep(direction):
        xs, ps, dps = [], [], []
        x, y0, y1 = x0, psi0, dpsi0
        target = x_hi if direction > 0 else x_lo
        halted_at = None
        while (target - x) * direction > 1e-12 * (x_hi - x_lo):
            hstep = direction * min(step, abs(target - x))
            try:
                y0, y1 = rk4(x, y0, y1, hstep)
            except SingularityError:
                halted_at = x
                break
            x = x + hstep
            xs.append(x)
            ps.append(y0)
            dps.append(y1)
        return xs, ps, dps, halted_at

    try:
        d2(x0, psi0, dpsi0)
    except SingularityError:
        raise

    up = sweep(+1)
    down = sweep(-1)
    xs = np.array(list(reversed(down[0])) + [x0] + up[0])
    psi = np.array(list(reversed(down[1])) + [psi0] + up[1])
    dpsi = np.array(list(reversed(down[2])) + [dpsi0] + up[2])
    halted = up[3] is not None or down[3] is not None
    halt_x = up[3] if up[3] is not None else down[3]

    # Residual of the implicit ODE with psi'' from finite differences.
    residual = np.full(xs.shape, np.nan)
    if xs.size >= 3:
        d2_fd = np.gradient(dpsi, xs, edge_order=2)
        for i, x in enumerate(xs):
            hv = problem.h.value(x)
            gpp = problem.g.d2(psi[i])
            lhs = -(float(model.drift(x)) * dpsi[i] + 0.5 * float(model.vol2(x)) * d2_fd[i]) * (
                hv - psi[i]
            ) * gpp
            residual[i] = lhs - _ode_numerator(problem, model, x, psi[i], dpsi[i])
    return PsiODEResult(xs, psi, dpsi, residual, halted, halt_x)


# --------------------------- two-equilibria example ------------------------ #


@dataclass(frozen=True)
class TwoEquilibriaExample:
    """Wiener-state example admitting two distinct equilibrium values.

    Stopping everywhere is an equilibrium with value f + g o h; so is the
    pure window rule C = (-1, 1), whose value on C is the constant 2/9
    (phi = -2/9, psi = 1 there).
    """

    problem: Problem
    model: DiffusionModel
    stop_everywhere: MixedStrategy
    window: MixedStrategy
    phi_const: float = -2.0 / 9.0
    psi_const: float = 1.0
    j_const: float = 2.0 / 9.0

    def stop_everywhere_value(self, x):
        return self.problem.stop_value(x)

    def window_value_functions(self) -> ValueFunctions:
        # f and h agree at the two window endpoints, so the affine harmonic
        # pieces collapse to the constants phi = -2/9 and psi = 1 on C.
        return wiener_window_value_functions(self.problem, -1.0, 1.0)


def two_equilibria_example() -> TwoEquilibriaExample:
    problem = make_two_equilibria_problem()
    return TwoEquilibriaExample(
        problem=problem,
        model=DiffusionModel.wiener(),
        stop_everywhere=MixedStrategy.pure(ContinuationSet.empty()),
        window=MixedStrategy.pure(ContinuationSet([(-1.0, 1.0)])),
    )
