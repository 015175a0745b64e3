from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List

import numpy as np

from core.bilevel_lab import (
    InnerProblem1D,
    OuterSurface,
    Verdict,
    check_convergence_bound,
    check_monotone_components,
    check_nonconvex,
    check_quasiconvex,
    check_sign_identity,
    counterexample,
    counterexample_endpoints,
    default_fixtures,
    lemma_condition_holds,
    outer_components,
    surface_from_values,
    sweep_surface,
)
from core.fairbatch import signed_gd_1d
from services.logging_service import get_logger

logger = get_logger("verification")

COUNTEREXAMPLE_GRID = 2001
FIXTURE_GRID = 401
ENDPOINT_TOL = 1e-6
SIGN_SAMPLES = 50
MAX_SIGN_ATTEMPTS = 500
CONVERGENCE_STARTS = 10
CONVERGENCE_ALPHA = 0.01
CONVERGENCE_STEPS = 200


@dataclass(frozen=True)
class VerifyReport:
    checks: List[Verdict]
    endpoints: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.holds is True for v in self.checks)

    @property
    def failures(self) -> List[Verdict]:
        return [v for v in self.checks if v.holds is not True]

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "endpoints": dict(self.endpoints),
            "checks": [v.to_dict() for v in self.checks],
        }

    def render_text(self) -> str:
        lines = ["Verificação da teoria", ""]
        for v in self.checks:
            mark = "OK " if v.holds is True else "FALHA"
            lines.append(f"[{mark}] {v.check}: {v.status}" + (f" ({v.detail})" if v.detail else ""))
        lines.append("")
        for name, value in self.endpoints.items():
            lines.append(f"{name} = {value:.10f}")
        lines.append("")
        lines.append("Resultado: " + ("todas as verificações passaram" if self.passed else f"{len(self.failures)} falha(s)"))
        return "\n".join(lines)


def _named(verdict: Verdict, prefix: str) -> Verdict:
    return replace(verdict, check=f"{prefix}:{verdict.check}")


def _endpoint_check(values: np.ndarray) -> tuple[Verdict, Dict[str, float]]:
    expected_0, expected_1 = counterexample_endpoints()
    f0, f1 = float(values[0]), float(values[-1])
    error = max(abs(f0 - expected_0), abs(f1 - expected_1))
    holds = bool(error <= ENDPOINT_TOL)
    verdict = Verdict(
        "contraexemplo:extremos",
        holds,
        "reproduzidos" if holds else "divergentes",
        detail=f"erro máximo {error:.2e}",
    )
    endpoints = {"F(0)": f0, "F(1)": f1, "F(0) esperado": expected_0, "F(1) esperado": expected_1}
    return verdict, endpoints


def _sign_checks(problem: InnerProblem1D, surface: OuterSurface, rng: np.random.Generator) -> Verdict:
    kink, band = surface.argmin, surface.kink_band

    agreed, attempts = 0, 0
    while agreed < SIGN_SAMPLES and attempts < MAX_SIGN_ATTEMPTS:
        attempts += 1
        verdict = check_sign_identity(problem, float(rng.uniform(0.0, problem.c1)), kink=kink, kink_band=band)
        if verdict.holds is False:
            return _named(verdict, "contraexemplo")
        if verdict.conclusive:
            agreed += 1

    holds = agreed >= SIGN_SAMPLES
    return Verdict(
        "contraexemplo:identidade_de_sinal",
        holds,
        "concorda" if holds else "amostras insuficientes",
        detail=f"{agreed} pontos conclusivos em {attempts} sorteios",
    )


def _convergence_checks(problem: InnerProblem1D, surface: OuterSurface, rng: np.random.Generator) -> Verdict:
    lam_star, cell = surface.argmin, surface.resolution

    worst = 0.0
    for lam0 in rng.uniform(0.0, problem.c1, size=CONVERGENCE_STARTS):
        trajectory = signed_gd_1d(outer_components(problem), float(lam0), CONVERGENCE_ALPHA, CONVERGENCE_STEPS, problem.c1)
        verdict = check_convergence_bound(trajectory, lam_star, CONVERGENCE_ALPHA, slack=cell)
        if not verdict.holds:
            return _named(verdict, "contraexemplo")
        worst = max(worst, float(abs(trajectory[-1] - lam_star)))

    holds = bool(worst <= CONVERGENCE_ALPHA + cell)
    return Verdict(
        "contraexemplo:envelope_de_convergencia",
        holds,
        "respeitado" if holds else "erro terminal excessivo",
        location=lam_star,
        detail=f"{CONVERGENCE_STARTS} inícios, pior erro terminal {worst:.6g}",
    )


def _fixture_checks() -> List[Verdict]:
    checks = []
    for problem in default_fixtures():
        surface = sweep_surface(problem, FIXTURE_GRID)
        holds = lemma_condition_holds(problem, surface)
        checks.append(
            Verdict(
                f"{problem.name}:condicao_do_lema",
                holds,
                "satisfeita" if holds else "curvatura não positiva",
            )
        )
        checks.append(_named(check_quasiconvex(surface), problem.name))
        checks.append(_named(check_monotone_components(surface), problem.name))
    return checks


def w_shaped_surface(grid_size: int = FIXTURE_GRID) -> OuterSurface:
    lambdas = np.linspace(0.0, 1.0, grid_size)
    return surface_from_values(lambdas, np.minimum(np.abs(lambdas - 0.25), np.abs(lambdas - 0.75)))


def run_verify(inject_failure: bool = False, seed: int = 0) -> VerifyReport:
    rng = np.random.default_rng(seed)
    problem = counterexample()
    surface = sweep_surface(problem, COUNTEREXAMPLE_GRID)

    endpoint_verdict, endpoints = _endpoint_check(surface.values)
    checks = [
        _named(check_quasiconvex(surface), "contraexemplo"),
        _named(check_nonconvex(surface), "contraexemplo"),
        endpoint_verdict,
        _sign_checks(problem, surface, rng),
        _convergence_checks(problem, surface, rng),
    ]
    checks.extend(_fixture_checks())
    if inject_failure:
        checks.append(_named(check_quasiconvex(w_shaped_surface()), "injetado_w"))

    for verdict in checks:
        if verdict.holds is True:
            logger.info("Verificação %s: %s", verdict.check, verdict.status)
        else:
            logger.error("Verificação %s falhou: %s %s", verdict.check, verdict.status, verdict.detail)
    return VerifyReport(checks=checks, endpoints=endpoints)
