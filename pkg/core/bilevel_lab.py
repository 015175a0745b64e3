from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy.special import expit

from core.errors import ConvergenceError

DEFAULT_BRACKET: Tuple[float, float] = (-50.0, 50.0)
INNER_TOL = 1e-10
MAX_INNER_ITER = 200
KINK_CELLS = 2

Scalar = Callable[[float], float]


@dataclass(frozen=True)
class ScalarFunction:
    value: Scalar
    d1: Scalar
    d2: Scalar

    def __add__(self, other: "ScalarFunction") -> "ScalarFunction":
        return ScalarFunction(
            value=lambda w: self.value(w) + other.value(w),
            d1=lambda w: self.d1(w) + other.d1(w),
            d2=lambda w: self.d2(w) + other.d2(w),
        )


ZERO = ScalarFunction(value=lambda w: 0.0, d1=lambda w: 0.0, d2=lambda w: 0.0)


def quadratic(a: float, center: float) -> ScalarFunction:
    return ScalarFunction(
        value=lambda w: a * (w - center) ** 2,
        d1=lambda w: 2.0 * a * (w - center),
        d2=lambda w: 2.0 * a,
    )


def quartic(a: float, center: float) -> ScalarFunction:
    return ScalarFunction(
        value=lambda w: a * (w - center) ** 4,
        d1=lambda w: 4.0 * a * (w - center) ** 3,
        d2=lambda w: 12.0 * a * (w - center) ** 2,
    )


def exp_sum(scale: float, shift: float = 0.0, left: float = 1.0, right: float = 1.0) -> ScalarFunction:
    """scale * (right * e^(w - shift) + left * e^-(w - shift)); scale=1/5 gives (e^w + e^-w)/5."""
    return ScalarFunction(
        value=lambda w: scale * (right * math.exp(w - shift) + left * math.exp(shift - w)),
        d1=lambda w: scale * (right * math.exp(w - shift) - left * math.exp(shift - w)),
        d2=lambda w: scale * (right * math.exp(w - shift) + left * math.exp(shift - w)),
    )


def log_sum_exp(shift: float) -> ScalarFunction:
    """log(e^(w - shift) + e^-(w - shift))"""
    return ScalarFunction(
        value=lambda w: float(np.logaddexp(w - shift, shift - w)),
        d1=lambda w: math.tanh(w - shift),
        d2=lambda w: 1.0 - math.tanh(w - shift) ** 2,
    )


def softplus(shift: float, sign: float = 1.0) -> ScalarFunction:
    """log(1 + e^(sign * (w - shift)))"""

    def d2(w: float) -> float:
        s = float(expit(sign * (w - shift)))
        return s * (1.0 - s)

    return ScalarFunction(
        value=lambda w: float(np.logaddexp(0.0, sign * (w - shift))),
        d1=lambda w: sign * float(expit(sign * (w - shift))),
        d2=d2,
    )


@dataclass(frozen=True)
class InnerProblem1D:
    """argmin_w lam * f1(w) + (c1 - lam) * g1(w) + h(w) for lam in [0, c1]."""

    name: str
    f1: ScalarFunction
    g1: ScalarFunction
    h: ScalarFunction = ZERO
    c1: float = 1.0

    def stationarity(self, w: float, lam: float) -> float:
        return lam * self.f1.d1(w) + (self.c1 - lam) * self.g1.d1(w) + self.h.d1(w)

    def curvature(self, w: float, lam: float) -> float:
        return lam * self.f1.d2(w) + (self.c1 - lam) * self.g1.d2(w) + self.h.d2(w)

    def outer_value(self, w: float) -> float:
        return abs(self.f1.value(w) - self.g1.value(w))


def counterexample() -> InnerProblem1D:
    return InnerProblem1D(
        name="contraexemplo",
        f1=exp_sum(scale=1.0 / 5.0),
        g1=quadratic(1.0, 1.0),
        c1=1.0,
    )


def counterexample_endpoints() -> Tuple[float, float]:
    """Closed-form F(0) = (e + 1/e) / 5 and F(1) = |0.4 - 1|."""
    return (math.e + 1.0 / math.e) / 5.0, 0.6


def default_fixtures() -> List[InnerProblem1D]:
    return [
        counterexample(),
        InnerProblem1D("quadraticas", quadratic(1.0, -1.0), quadratic(1.0, 2.0)),
        InnerProblem1D("quadraticas_curvaturas", quadratic(3.0, 0.5), quadratic(0.5, -1.5)),
        InnerProblem1D("quadraticas_com_h", quadratic(1.0, 1.0), quadratic(2.0, -1.0), h=quadratic(0.5, 0.0), c1=0.5),
        InnerProblem1D("cosh_deslocado", exp_sum(scale=0.5, shift=1.0), quadratic(1.0, -1.0)),
        InnerProblem1D("logsumexp", log_sum_exp(1.0), quadratic(0.5, -2.0)),
        InnerProblem1D("logsumexp_com_h", log_sum_exp(-1.0), log_sum_exp(2.0), h=quadratic(0.25, 0.0)),
        InnerProblem1D("softplus_com_h", softplus(0.0, 1.0), softplus(2.0, -1.0), h=quadratic(0.1, 0.0)),
        InnerProblem1D("quartica", quartic(0.1, 1.0) + quadratic(1.0, 1.0), quadratic(1.0, -1.0)),
        InnerProblem1D("c1_dois", quadratic(1.0, 3.0), exp_sum(scale=0.25), c1=2.0),
        InnerProblem1D("exponencial", exp_sum(scale=1.0, left=2.0), quadratic(1.0, 2.0)),
    ]


def inner_solve(
    p: InnerProblem1D,
    lam: float,
    bracket: Tuple[float, float] = DEFAULT_BRACKET,
    tol: float = INNER_TOL,
    max_iter: int = MAX_INNER_ITER,
    w0: float | None = None,
) -> float:
    """Safeguarded Newton on the stationarity equation, bisecting whenever the
    Newton step leaves the current bracket or the curvature is not positive."""
    lo, hi = bracket
    if p.stationarity(lo, lam) > 0 or p.stationarity(hi, lam) < 0:
        raise ConvergenceError(
            f"Intervalo {bracket} não contém o minimizador de '{p.name}' em lambda={lam}",
            residual=None,
        )

    w = min(max(0.0 if w0 is None else w0, lo), hi)
    residual = p.stationarity(w, lam)
    for _ in range(max_iter):
        if abs(residual) <= tol:
            return w
        if residual > 0:
            hi = w
        else:
            lo = w

        slope = p.curvature(w, lam)
        candidate = w - residual / slope if slope > 0 else math.nan
        if lo < candidate < hi:
            w = candidate
        else:
            w = 0.5 * (lo + hi)
            if w in (lo, hi):
                break
        residual = p.stationarity(w, lam)

    if abs(residual) <= tol:
        return w
    raise ConvergenceError(
        f"Solver interno não convergiu para '{p.name}' em lambda={lam}: resíduo {residual:.3e}",
        residual=abs(residual),
    )


def outer_components(p: InnerProblem1D, tol: float = INNER_TOL) -> Callable[[float], Tuple[float, float]]:
    """lam -> (f1(w_lam), g1(w_lam)), warm-starting from the previous solution."""
    last = {"w": None}

    def evaluate(lam: float) -> Tuple[float, float]:
        w = inner_solve(p, lam, tol=tol, w0=last["w"])
        last["w"] = w
        return p.f1.value(w), p.g1.value(w)

    return evaluate


@dataclass(frozen=True, eq=False)
class OuterSurface:
    lambdas: np.ndarray
    ws: np.ndarray
    values: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    tol: float
    c1: float

    @property
    def resolution(self) -> float:
        return float(self.lambdas[1] - self.lambdas[0]) if self.lambdas.size > 1 else 0.0

    @property
    def argmin(self) -> float:
        return float(self.lambdas[int(np.argmin(self.values))])

    @property
    def kink_band(self) -> float:
        return KINK_CELLS * self.resolution


def sweep_surface(
    p: InnerProblem1D,
    grid_size: int,
    tol: float = INNER_TOL,
    bracket: Tuple[float, float] = DEFAULT_BRACKET,
) -> OuterSurface:
    if grid_size < 3:
        raise ValueError(f"grid_size deve ser >= 3: {grid_size}")

    lambdas = np.linspace(0.0, p.c1, grid_size)
    ws = np.empty(grid_size)
    w = None
    for i, lam in enumerate(lambdas):
        w = inner_solve(p, float(lam), bracket=bracket, tol=tol, w0=w)
        ws[i] = w

    f_values = np.array([p.f1.value(w) for w in ws])
    g_values = np.array([p.g1.value(w) for w in ws])
    return OuterSurface(
        lambdas=lambdas,
        ws=ws,
        values=np.abs(f_values - g_values),
        f_values=f_values,
        g_values=g_values,
        tol=tol,
        c1=p.c1,
    )


def surface_from_values(lambdas, values) -> OuterSurface:
    lambdas = np.asarray(lambdas, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    nan = np.full_like(values, np.nan)
    return OuterSurface(
        lambdas=lambdas,
        ws=nan,
        values=values,
        f_values=nan,
        g_values=nan,
        tol=0.0,
        c1=float(lambdas[-1]),
    )


@dataclass(frozen=True)
class Verdict:
    check: str
    holds: bool | None
    status: str
    location: float | None = None
    detail: str = ""

    def __post_init__(self):
        # numpy scalars would leak into reports and break json.dumps
        if self.holds is not None:
            object.__setattr__(self, "holds", bool(self.holds))
        if self.location is not None:
            object.__setattr__(self, "location", float(self.location))

    @property
    def conclusive(self) -> bool:
        return self.holds is not None

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def check_quasiconvex(s: OuterSurface, tol: float = 1e-9) -> Verdict:
    """Successive differences must go down, then up, once."""
    rising = False
    for i, step in enumerate(np.diff(s.values)):
        if not rising and step > tol:
            rising = True
        elif rising and step < -tol:
            location = float(s.lambdas[i + 1])
            return Verdict(
                "quasiconvexidade",
                False,
                "violada",
                location=location,
                detail=f"F volta a decrescer em lambda={location:.6g} após ter crescido",
            )
    return Verdict("quasiconvexidade", True, "quase-convexa")


def check_nonconvex(s: OuterSurface, margin: float = 1e-6) -> Verdict:
    """Search triples (i - k, i, i + k), k = 1, 2, 4, ..., for a point above its chord."""
    n = s.values.size
    k = 1
    while 2 * k < n:
        left, mid, right = slice(0, n - 2 * k), slice(k, n - k), slice(2 * k, n)
        lam_a, lam_b, lam_c = s.lambdas[left], s.lambdas[mid], s.lambdas[right]
        weight = (lam_b - lam_a) / (lam_c - lam_a)
        chord = (1.0 - weight) * s.values[left] + weight * s.values[right]
        excess = s.values[mid] - chord
        worst = int(np.argmax(excess))
        if excess[worst] >= margin:
            location = float(lam_b[worst])
            return Verdict(
                "nao_convexidade",
                True,
                "nao-convexa",
                location=location,
                detail=(
                    f"F({location:.6g}) excede a corda entre {lam_a[worst]:.6g} e {lam_c[worst]:.6g} "
                    f"por {excess[worst]:.3e}"
                ),
            )
        k *= 2
    return Verdict("nao_convexidade", False, "sem-violacao")


def check_sign_identity(
    p: InnerProblem1D,
    lam: float,
    h_fd: float = 1e-4,
    kink: float | None = None,
    kink_band: float = 0.0,
    noise_floor: float = 1e-6,
    tol: float = 1e-12,
) -> Verdict:
    """sign(dF/dlam) against sign(g1(w_lam) - f1(w_lam)) by central differences."""
    if kink is not None and abs(lam - kink) <= kink_band + h_fd:
        return Verdict("identidade_de_sinal", None, "inconclusivo", location=lam, detail="faixa do vértice")
    if lam - h_fd < 0.0 or lam + h_fd > p.c1:
        return Verdict("identidade_de_sinal", None, "inconclusivo", location=lam, detail="fora de [0, c1]")

    w = inner_solve(p, lam, tol=tol)
    w_plus = inner_solve(p, lam + h_fd, tol=tol, w0=w)
    w_minus = inner_solve(p, lam - h_fd, tol=tol, w0=w)
    derivative = (p.outer_value(w_plus) - p.outer_value(w_minus)) / (2.0 * h_fd)
    if abs(derivative) < noise_floor:
        return Verdict(
            "identidade_de_sinal", None, "inconclusivo", location=lam, detail=f"|F'|={abs(derivative):.2e}"
        )

    expected = np.sign(p.g1.value(w) - p.f1.value(w))
    holds = bool(np.sign(derivative) == expected)
    return Verdict(
        "identidade_de_sinal",
        holds,
        "concorda" if holds else "discorda",
        location=lam,
        detail=f"F'={derivative:.6g}, g1-f1={p.g1.value(w) - p.f1.value(w):.6g}",
    )


def check_convergence_bound(trajectory, lam_star: float, alpha: float, slack: float = 0.0) -> Verdict:
    """|lam_t - lam*| <= max{|lam_0 - lam*| - t alpha, alpha}, widened by the
    uncertainty ``slack`` on lam*."""
    trajectory = np.asarray(trajectory, dtype=np.float64)
    steps = np.arange(trajectory.size)
    envelope = np.maximum(abs(trajectory[0] - lam_star) + slack - steps * alpha, alpha) + slack
    errors = np.abs(trajectory - lam_star)
    violations = np.flatnonzero(errors > envelope + 1e-12)
    if violations.size:
        t = int(violations[0])
        return Verdict(
            "envelope_de_convergencia",
            False,
            "violado",
            location=float(trajectory[t]),
            detail=f"t={t}: |erro|={errors[t]:.6g} > envelope {envelope[t]:.6g}",
        )
    return Verdict(
        "envelope_de_convergencia",
        True,
        "respeitado",
        detail=f"erro final {errors[-1]:.6g}",
    )


def check_monotone_components(s: OuterSurface, tol: float = 1e-8) -> Verdict:
    """f1(w_lam) nonincreasing and g1(w_lam) nondecreasing along the grid."""
    f_up = np.flatnonzero(np.diff(s.f_values) > tol)
    g_down = np.flatnonzero(np.diff(s.g_values) < -tol)
    if f_up.size or g_down.size:
        first = min(np.concatenate([f_up, g_down]))
        return Verdict(
            "monotonicidade",
            False,
            "violada",
            location=float(s.lambdas[first + 1]),
            detail=f"f1 cresce em {f_up.size} passos, g1 decresce em {g_down.size} passos",
        )
    return Verdict("monotonicidade", True, "monotona")


def lemma_condition_holds(p: InnerProblem1D, s: OuterSurface) -> bool:
    return all(p.curvature(w, lam) > 0 for w, lam in zip(s.ws, s.lambdas))
