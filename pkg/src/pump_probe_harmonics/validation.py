"""
Cross-checks between the three independent routes to the density harmonics.

The numeric builder is compared with the term-algebra builder (same M, same
solution) and with the time-domain oracle (same physics). Used by the CLI
``validate`` command and by the acceptance tests.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import settings
from .harmonic_solver import assemble_m, solve, solve_linear_system
from .system import DensityHarmonics, SystemSpec, flatten
from .term_algebra import assemble_m_symbolic
from .time_domain import steady_state_harmonics

logger = logging.getLogger(__name__)

INVARIANT_TOLERANCE = 1e-10
_SIGNIFICANT = 1e-9


@dataclass
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    skipped: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.skipped or self.deviation <= self.tolerance


@dataclass
class ValidationReport:
    order: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


def matrix_deviation(spec: SystemSpec, order: int) -> float:
    """max |M_numeric - M_term_algebra| relative to max |M_numeric|."""
    numeric = assemble_m(spec, order).m
    symbolic = assemble_m_symbolic(spec, order).m
    scale = np.abs(numeric).max()
    difference = np.abs(numeric - symbolic).max()
    return float(difference / scale) if scale > 0 else float(difference)


def solution_deviation(spec: SystemSpec, order: int, condition_threshold: Optional[float] = None) -> float:
    """Largest difference between the A vectors solved from either builder's M."""
    numeric = flatten(solve_linear_system(assemble_m(spec, order), condition_threshold=condition_threshold))
    symbolic = flatten(
        solve_linear_system(assemble_m_symbolic(spec, order), condition_threshold=condition_threshold)
    )
    return float(np.abs(numeric - symbolic).max() / max(np.abs(numeric).max(), 1.0))


def harmonics_deviation(reference: DensityHarmonics, candidate: DensityHarmonics) -> float:
    """Populations compared absolutely, the first harmonics relative to their size."""
    zero = float(np.abs(reference[0] - candidate[0]).max())
    first = np.abs(reference[-1]).max()
    difference = float(np.abs(reference[-1] - candidate[-1]).max())
    return max(zero, difference / first if first > _SIGNIFICANT else difference)


def oracle_deviation(spec: SystemSpec, order: Optional[int] = None, **oracle_options) -> float:
    """Compare the linear solve with the settled time-domain trajectory."""
    order = order or settings.oracle_order
    harmonics = solve(spec, order)
    oracle = steady_state_harmonics(spec, order, **oracle_options)
    return harmonics_deviation(harmonics, oracle)


def validate_spec(
    spec: SystemSpec,
    order: Optional[int] = None,
    *,
    tolerance: Optional[float] = None,
    oracle_order: Optional[int] = None,
    oracle_tolerance: Optional[float] = None,
    skip_oracle: bool = False,
) -> ValidationReport:
    """Run every check on ``spec`` and collect the deviations."""
    order = order or settings.default_orders
    tolerance = tolerance or settings.builder_tolerance
    oracle_tolerance = oracle_tolerance or settings.oracle_tolerance
    report = ValidationReport(order=order)

    harmonics = solve(spec, order)
    report.checks.append(
        CheckResult("residual", harmonics.diagnostics.residual, settings.residual_tolerance)
    )
    report.checks.append(CheckResult("trace", harmonics.trace_error(), INVARIANT_TOLERANCE))
    report.checks.append(CheckResult("hermiticity", harmonics.hermiticity_error(), INVARIANT_TOLERANCE))
    report.checks.append(CheckResult("builder M", matrix_deviation(spec, order), tolerance))
    # Solutions inherit the conditioning of M', so they get a looser bound
    report.checks.append(
        CheckResult("builder solution", solution_deviation(spec, order), INVARIANT_TOLERANCE)
    )

    if skip_oracle:
        report.checks.append(CheckResult("time-domain oracle", 0.0, oracle_tolerance, True, "skipped"))
    elif spec.beat_frequency == 0:
        report.checks.append(
            CheckResult("time-domain oracle", 0.0, oracle_tolerance, True, "no beat period at delta = 0")
        )
    else:
        order_used = oracle_order or settings.oracle_order
        logger.info("integrating to the periodic steady state for the oracle (K=%d)", order_used)
        report.checks.append(
            CheckResult(
                "time-domain oracle", oracle_deviation(spec, order_used), oracle_tolerance,
                note=f"K={order_used}",
            )
        )

    for check in report.failures:
        logger.warning("%s deviation %.3e exceeds %.1e", check.name, check.deviation, check.tolerance)
    return report
