"""Randomized identity suites doubling as a self-test of the entropy kernel.

Four suites: the factorization identity against product references, the
agreement of the relative entropy with its entropy expansion (including
infinite cases), the two scaling identities, and monotonicity under quantum
channels built from random isometries followed by a partial trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import random_isometry_channel
from .entropy import (
    BOTH_INFINITE,
    factorization_residual,
    relative_entropy,
    relative_entropy_via_expansion,
)
from .operators import DensityOperator, PositiveOperator, partial_trace
from .states import random_density, random_faithful_density

FIDEN_ATOL = 1e-8
EXPANSION_ATOL = 1e-8
SCALING_ATOL = 1e-9
DATA_PROCESSING_SLACK = 1e-8


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    failures: list[str] = field(default_factory=list)

    def record(self, ok: bool, detail: str = "") -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.failures) < 5:
                self.failures.append(detail)


@dataclass
class VerifySummary:
    suites: list[SuiteResult]

    @property
    def ok(self) -> bool:
        return all(s.failed == 0 for s in self.suites)

    def lines(self) -> list[str]:
        out = [
            f"{s.name}: {s.passed} passed, {s.failed} failed"
            + (f"  (first: {s.failures[0]})" if s.failures else "")
            for s in self.suites
        ]
        out.append("verify: " + ("all suites passed" if self.ok else "FAILURES PRESENT"))
        return out


def _bipartite_draw(i: int, seed: int, dims: tuple[int, int]):
    rho = random_density(dims, seed=seed + 13 * i)
    omega_a = random_density([dims[0]], seed=seed + 13 * i + 1)
    omega_b = random_density([dims[1]], seed=seed + 13 * i + 2)
    if i % 10 == 7:
        # Exercise the support convention: a rank-deficient reference whose
        # support cannot contain the (full-rank) marginal.
        omega_a = random_density([dims[0]], seed=seed + 13 * i + 3, rank=dims[0] - 1)
    return rho, omega_a, omega_b


def run_identity_suites(seed: int = 0, states: int = 200) -> VerifySummary:
    """Run the four identity suites on ``states`` random bipartite states."""
    fiden = SuiteResult("factorization-identity")
    expansion = SuiteResult("entropy-expansion")
    scaling = SuiteResult("scaling-identities")
    dpi = SuiteResult("data-processing")

    for i in range(states):
        dims = (2, 2) if i % 2 == 0 else (2, 3)
        rho, omega_a, omega_b = _bipartite_draw(i, seed, dims)
        res = factorization_residual(rho, omega_a, omega_b)
        if isinstance(res, str):
            ok = res == BOTH_INFINITE
            fiden.record(ok, f"state {i}: verdict {res}")
        else:
            fiden.record(res <= FIDEN_ATOL, f"state {i}: residual {res:.3e}")

        sigma = random_density(dims, seed=seed + 7000 + 13 * i)
        if i % 10 == 3:
            sigma = random_density(dims, seed=seed + 7000 + 13 * i, rank=rho.dim - 1)
        d_direct = relative_entropy(rho, sigma)
        d_expanded = relative_entropy_via_expansion(rho, sigma)
        if math.isinf(d_direct) or math.isinf(d_expanded):
            expansion.record(
                math.isinf(d_direct) and math.isinf(d_expanded),
                f"state {i}: {d_direct} vs {d_expanded}",
            )
        else:
            expansion.record(
                abs(d_direct - d_expanded) <= EXPANSION_ATOL,
                f"state {i}: |{d_direct:.9f} - {d_expanded:.9f}|",
            )

        tau = random_density(dims, seed=seed + 9000 + 13 * i)
        base = relative_entropy(rho, tau)
        ok = True
        detail = ""
        for c in (0.1, 1.0, 7.0):
            lhs = relative_entropy(
                PositiveOperator(c * rho.matrix), PositiveOperator(c * tau.matrix)
            )
            if abs(lhs - c * base) > SCALING_ATOL:
                ok, detail = False, f"state {i}: homogeneity off by {abs(lhs - c * base):.2e}"
                break
        c = 3.0
        lhs = relative_entropy(rho.positive, PositiveOperator(c * tau.matrix))
        rhs = base - math.log(c) + (c - 1.0)
        if abs(lhs - rhs) > SCALING_ATOL:
            ok, detail = False, f"state {i}: reference-rescaling off by {abs(lhs - rhs):.2e}"
        scaling.record(ok, detail)

    for i in range(states // 4):
        d = 4 if i % 2 == 0 else 6
        rho = random_faithful_density([d], seed=seed + 3 * i, floor=0.1)
        sigma = random_faithful_density([d], seed=seed + 3 * i + 1, floor=0.1)
        channel = random_isometry_channel([d], [d], env_dim=2, seed=seed + 3 * i + 2)
        before = relative_entropy(rho, sigma)
        after = relative_entropy(channel.apply(rho), channel.apply(sigma))
        dpi.record(
            after <= before + DATA_PROCESSING_SLACK,
            f"pair {i}: D rose from {before:.6f} to {after:.6f}",
        )

    return VerifySummary([fiden, expansion, scaling, dpi])
