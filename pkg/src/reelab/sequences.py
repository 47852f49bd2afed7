"""Converging state sequences and empirical continuity diagnostics.

Generators build finite prefixes of converging state sequences whose
construction realizes a sufficient condition for convergence of the
relative-entropy distance to a free set (domination by a fixed state,
mixtures of converging sequences, pushforwards under converging quantum
operations), plus an adversarial family whose distance stays bounded away
from the limit value on the prefix.  The harness measures the distance along
each sequence, evaluates which sufficient clauses fire, and renders
predicted-versus-observed convergence verdicts.

Finite-prefix semantics: limits are untestable, so "observed convergence"
means bracket agreement within a tolerance ``tau`` on the last ``tail``
indices (a sequence verdict is "yes" iff every contiguous tail window passes,
which for per-index flags is the same as all tail indices passing).  Verdicts
degrade to "inconclusive" whenever solver gaps exceed ``tau / 2``; they never
turn uncertainty into a claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import QuantumOperation
from .entropy import mutual_information, relative_entropy, cross_entropy
from .errors import (
    DegenerateOperationError,
    FreeConeViolationError,
    SamplingCapError,
)
from .freesets import (
    ConvexHull,
    FreeSetModel,
    FullySeparable,
    OracleConfig,
    PiSeparable,
    Ppt,
    necessary_membership_check,
    sample_free_state,
)
from .operators import (
    DensityOperator,
    SystemLayout,
    partial_trace,
    tensor,
    trace_norm,
)
from .solver import SolverConfig, SolverResult, free_distance
from .states import dm, ket, maximally_entangled_ket
from .states import random_traceless_hermitian

MONOTONE_SLACK = 1e-12
DOMINATION_EIG_FLOOR = -1e-12
OPERATION_TRACE_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Sequence containers
# ---------------------------------------------------------------------------

@dataclass
class Provenance:
    """Family tag plus the parameters needed to re-validate the construction."""

    family: str
    params: dict = field(default_factory=dict)


def trace_distances(prefix: Sequence[DensityOperator], limit: DensityOperator) -> list[float]:
    return [trace_norm(r.matrix - limit.matrix) for r in prefix]


def compute_burn_in(dists: Sequence[float]) -> int:
    """Smallest 1-based index from which the distances are non-increasing."""
    b = len(dists)
    for i in range(len(dists) - 1, 0, -1):
        if dists[i - 1] >= dists[i] - MONOTONE_SLACK:
            b = i
        else:
            break
    return b


@dataclass
class StateSequence:
    """Finite prefix ``rho_1..rho_N`` of a sequence converging to ``limit``.

    Trace distances to the limit must be non-increasing from index
    ``burn_in`` on; generators compute the smallest valid burn-in.
    """

    prefix: tuple[DensityOperator, ...]
    limit: DensityOperator
    provenance: Provenance
    burn_in: int = 1

    def __post_init__(self):
        self.prefix = tuple(self.prefix)
        if not self.prefix:
            raise ValueError("sequence prefix must be non-empty")
        lay = self.limit.layout.dims
        if any(r.layout.dims != lay for r in self.prefix):
            raise ValueError("all sequence members must share the limit's layout")
        dists = trace_distances(self.prefix, self.limit)
        if not 1 <= self.burn_in <= len(dists):
            raise ValueError("burn_in out of range")
        tailing = dists[self.burn_in - 1 :]
        if any(a < b - MONOTONE_SLACK for a, b in zip(tailing, tailing[1:])):
            raise ValueError(
                "trace distances must be non-increasing beyond the burn-in index"
            )

    def __len__(self):
        return len(self.prefix)

    @property
    def layout(self) -> SystemLayout:
        return self.limit.layout

    def distances(self) -> list[float]:
        return trace_distances(self.prefix, self.limit)


@dataclass
class WitnessSequence:
    """Free-state companions ``omega_1..omega_N, omega_0`` with membership notes."""

    prefix: tuple[DensityOperator, ...]
    limit: DensityOperator
    membership_notes: tuple[str, ...]

    def __post_init__(self):
        self.prefix = tuple(self.prefix)
        self.membership_notes = tuple(self.membership_notes)
        lay = self.limit.layout.dims
        if any(w.layout.dims != lay for w in self.prefix):
            raise ValueError("witness states must share one layout")
        if len(self.membership_notes) != len(self.prefix) + 1:
            raise ValueError("need one membership note per witness state plus the limit")
        if any(not note for note in self.membership_notes):
            raise ValueError("membership notes must be non-empty")

    def __len__(self):
        return len(self.prefix)


def marginal_product_witness(seq: StateSequence, note: str = "product of marginals") -> WitnessSequence:
    """Witnesses ``omega_n = tensor of rho_n's single-factor marginals``."""

    def product_of_marginals(rho: DensityOperator) -> DensityOperator:
        m = rho.layout.m
        out = partial_trace(rho, [1])
        for k in range(2, m + 1):
            out = tensor(out, partial_trace(rho, [k]))
        return out

    states = [product_of_marginals(r) for r in seq.prefix]
    lim = product_of_marginals(seq.limit)
    return WitnessSequence(tuple(states), lim, tuple([note] * (len(states) + 1)))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_constant(rho: DensityOperator, n: int) -> StateSequence:
    """The constant sequence at ``rho`` (every clause trivially applies)."""
    return StateSequence(tuple([rho] * n), rho, Provenance("constant", {}), 1)


def gen_dominated(
    sigma: DensityOperator,
    c: float,
    n: int,
    seed: int = 0,
    delta: float | None = None,
    max_tries: int = 60,
) -> StateSequence:
    """Random perturbations of ``sigma`` dominated by it: ``c rho_n <= sigma``.

    ``rho_n = sigma + Delta_n`` with a random traceless Hermitian ``Delta_n``
    of trace norm ``delta / n``; directions are redrawn (and the scale halved)
    until both positivity and the domination eigencheck
    ``min_eig(sigma - c rho_n) >= -1e-12`` pass.  The limit is ``sigma``
    itself, which the same check covers.  The default ``delta`` makes the
    checks pass by construction.
    """
    if not 0.0 < c <= 1.0:
        raise ValueError("domination constant must lie in (0, 1]")
    if n < 1:
        raise ValueError("need at least one sequence element")
    evals, _ = sigma.eig()
    lam_min = float(evals[0])
    if delta is None:
        if c < 1.0 and lam_min > 0.0:
            delta = 0.9 * min(lam_min, (1.0 - c) * lam_min / c)
        else:
            delta = 0.0
    rng = np.random.default_rng(seed)
    d = sigma.dim
    prefix = []
    for idx in range(1, n + 1):
        scale = delta / idx
        if scale == 0.0:
            prefix.append(sigma)
            continue
        placed = False
        for attempt in range(max_tries):
            if attempt and attempt % 20 == 0:
                scale *= 0.5
            direction = random_traceless_hermitian(d, rng)
            direction *= scale / trace_norm(direction)
            cand = sigma.matrix + direction
            if float(np.min(np.linalg.eigvalsh(cand))) < 0.0:
                continue
            if float(np.min(np.linalg.eigvalsh(sigma.matrix - c * cand))) < DOMINATION_EIG_FLOOR:
                continue
            prefix.append(DensityOperator(cand, sigma.layout))
            placed = True
            break
        if not placed:
            raise SamplingCapError(f"domination rejection loop exceeded {max_tries} tries at n={idx}")
    dists = trace_distances(prefix, sigma)
    prov = Provenance("dominated", {"sigma": sigma, "c": c, "delta": delta, "seed": seed})
    return StateSequence(tuple(prefix), sigma, prov, compute_burn_in(dists))


def gen_mixture(
    seq_a: StateSequence,
    seq_b: StateSequence,
    p: Sequence[float],
    p_limit: float,
) -> StateSequence:
    """Per-index convex mixtures ``p_n a_n + (1 - p_n) b_n`` of two sequences."""
    if len(seq_a) != len(seq_b) or len(p) != len(seq_a):
        raise ValueError("sequences and weight schedule must have equal length")
    if seq_a.layout.dims != seq_b.layout.dims:
        raise ValueError("sequences must share one layout")
    weights = [float(w) for w in p]
    if any(not 0.0 <= w <= 1.0 for w in weights) or not 0.0 <= p_limit <= 1.0:
        raise ValueError("mixture weights must lie in [0, 1]")
    lay = seq_a.layout
    prefix = tuple(
        DensityOperator(w * a.matrix + (1.0 - w) * b.matrix, lay)
        for w, a, b in zip(weights, seq_a.prefix, seq_b.prefix)
    )
    limit = DensityOperator(
        p_limit * seq_a.limit.matrix + (1.0 - p_limit) * seq_b.limit.matrix, lay
    )
    dists = trace_distances(prefix, limit)
    prov = Provenance(
        "mixture", {"a": seq_a, "b": seq_b, "p": tuple(weights), "p_limit": float(p_limit)}
    )
    return StateSequence(prefix, limit, prov, compute_burn_in(dists))


def _derived_output_model(model: FreeSetModel, layout_out: SystemLayout):
    if model is None:
        return None
    if model.layout.dims == layout_out.dims:
        return model
    return None


def gen_pushforward(
    seq: StateSequence,
    ops: Sequence[QuantumOperation],
    limit_op: QuantumOperation,
    model: FreeSetModel | None = None,
    model_out: FreeSetModel | None = None,
    seed: int = 0,
    check_samples: int = 4,
) -> StateSequence:
    """Normalized pushforwards ``Phi_n(rho_n) / Tr Phi_n(rho_n)``.

    Each operation must be completely positive and trace non-increasing
    (validated from its Kraus family) and must not annihilate its input.
    When an input free-set model is given, free-cone preservation is asserted
    by pushing sampled free states through every operation and running the
    necessary membership checks on the normalized outputs.
    """
    if len(ops) != len(seq):
        raise ValueError("need one operation per prefix index")
    all_ops = list(ops) + [limit_op]
    lay_in = seq.layout
    lay_out = limit_op.layout_out
    for op in all_ops:
        if op.layout_in.dims != lay_in.dims:
            raise ValueError("operation input layout does not match the sequence")
        if op.layout_out.dims != lay_out.dims:
            raise ValueError("operations must share one output layout")
    cone_checked = False
    if model is not None:
        out_model = model_out if model_out is not None else _derived_output_model(model, lay_out)
        if out_model is None:
            raise ValueError("an output model is required when the operation changes the layout")
        rng = np.random.default_rng(seed)
        for op in all_ops:
            for _ in range(check_samples):
                omega = sample_free_state(model, rng)
                out = op.apply(omega)
                if out.trace <= OPERATION_TRACE_FLOOR:
                    continue  # the zero operator lies in every cone
                normalized = DensityOperator(out.matrix / out.trace, lay_out)
                ok, detail = necessary_membership_check(normalized, out_model)
                if not ok:
                    raise FreeConeViolationError(
                        f"operation maps a sampled free state outside the free cone: {detail}"
                    )
        cone_checked = True
    cs = []
    prefix = []
    for op, rho in zip(ops, seq.prefix):
        out = op.apply(rho)
        if out.trace <= OPERATION_TRACE_FLOOR:
            raise DegenerateOperationError("operation annihilated a sequence element")
        cs.append(out.trace)
        prefix.append(DensityOperator(out.matrix / out.trace, lay_out))
    out0 = limit_op.apply(seq.limit)
    if out0.trace <= OPERATION_TRACE_FLOOR:
        raise DegenerateOperationError("limit operation annihilated the limit state")
    c0 = out0.trace
    limit = DensityOperator(out0.matrix / c0, lay_out)
    dists = trace_distances(prefix, limit)
    prov = Provenance(
        "pushforward",
        {
            "source": seq,
            "ops": tuple(ops),
            "limit_op": limit_op,
            "c": tuple(cs),
            "c_limit": c0,
            "model": model,
            "model_out": model_out,
            "cone_checked": cone_checked,
        },
    )
    return StateSequence(tuple(prefix), limit, prov, compute_burn_in(dists))


def lsc_gap_weights(dim_schedule: Sequence[int], cap: float = 0.95) -> list[float]:
    """Canonical weight schedule ``min(1 / ln d_n, cap)`` for the gap family."""
    return [min(1.0 / math.log(d), cap) for d in dim_schedule]


def gen_lsc_gap(dim_schedule: Sequence[int], weight_schedule: Sequence[float]) -> StateSequence:
    """Sequence mixing a fixed product state with growing-rank entangled states.

    ``rho_n = (1 - eps_n) |00><00| + eps_n Phi(d_n)`` on a fixed ambient
    bipartite layout, with ``Phi(d)`` the rank-``d`` maximally entangled
    state embedded in the ambient space.  The limit is the product state, so
    the separable distance of the limit is zero while the prefix values can
    stay bounded away from it: the distance functional underestimates along
    such sequences but need not be continuous when every sufficient clause
    fails.  Ambient factor dimensions are capped at 4 to keep the PPT
    certification cheap.
    """
    dims = [int(d) for d in dim_schedule]
    eps = [float(e) for e in weight_schedule]
    if len(dims) != len(eps) or not dims:
        raise ValueError("schedules must be non-empty and of equal length")
    if any(d < 2 for d in dims) or any(a > b for a, b in zip(dims, dims[1:])):
        raise ValueError("dimension schedule must be non-decreasing with entries >= 2")
    if max(dims) > 4:
        raise ValueError("ambient factor dimension is capped at 4")
    if any(not 0.0 <= e <= 1.0 for e in eps) or any(a < b for a, b in zip(eps, eps[1:])):
        raise ValueError("weight schedule must be non-increasing within [0, 1]")
    amb = max(dims)
    lay = SystemLayout([amb, amb])
    base = dm(np.kron(ket(amb, 0), ket(amb, 0)), lay)
    prefix = []
    for d, e in zip(dims, eps):
        phi = maximally_entangled_ket(d, amb)
        ent = np.outer(phi, phi.conj())
        prefix.append(DensityOperator((1.0 - e) * base.matrix + e * ent, lay))
    dists = trace_distances(prefix, base)
    prov = Provenance("lsc_gap", {"dims": tuple(dims), "eps": tuple(eps)})
    return StateSequence(tuple(prefix), base, prov, compute_burn_in(dists))


# ---------------------------------------------------------------------------
# Independent re-validation of generator premises
# ---------------------------------------------------------------------------

def revalidate_sequence(seq: StateSequence) -> None:
    """Re-check the constructed premises recorded in a sequence's provenance.

    Raises ``ValueError`` on any violation.  Run by the harness before
    solving, independently of the generators.
    """
    fam = seq.provenance.family
    params = seq.provenance.params
    if fam == "dominated":
        sigma = params["sigma"]
        c = params["c"]
        for r in list(seq.prefix) + [seq.limit]:
            lam = float(np.min(np.linalg.eigvalsh(sigma.matrix - c * r.matrix)))
            if lam < DOMINATION_EIG_FLOOR:
                raise ValueError(f"domination eigencheck failed (min eigenvalue {lam:.3e})")
    elif fam == "mixture":
        a, b = params["a"], params["b"]
        for w, r, ra, rb in zip(params["p"], seq.prefix, a.prefix, b.prefix):
            mix = w * ra.matrix + (1.0 - w) * rb.matrix
            if float(np.max(np.abs(mix - r.matrix))) > 1e-12:
                raise ValueError("mixture reconstruction mismatch")
        revalidate_sequence(a)
        revalidate_sequence(b)
    elif fam == "pushforward":
        src = params["source"]
        for op in list(params["ops"]) + [params["limit_op"]]:
            acc = sum(k.conj().T @ k for k in op.kraus)
            if float(np.max(np.linalg.eigvalsh(acc)) - 1.0) > 1e-10:
                raise ValueError("operation is not trace non-increasing")
        for op, rho, c_rec, out in zip(params["ops"], src.prefix, params["c"], seq.prefix):
            pushed = op.apply_matrix(rho.matrix)
            c = float(np.trace(pushed).real)
            if c <= OPERATION_TRACE_FLOOR or abs(c - c_rec) > 1e-10:
                raise ValueError("recorded normalization does not match the operation")
            if float(np.max(np.abs(pushed / c - out.matrix))) > 1e-12:
                raise ValueError("pushforward reconstruction mismatch")
        revalidate_sequence(src)
    elif fam == "lsc_gap":
        amb = max(params["dims"])
        base = np.kron(ket(amb, 0), ket(amb, 0))
        base = np.outer(base, base.conj())
        for d, e, r in zip(params["dims"], params["eps"], seq.prefix):
            phi = maximally_entangled_ket(d, amb)
            ent = np.outer(phi, phi.conj())
            if float(np.max(np.abs((1 - e) * base + e * ent - r.matrix))) > 1e-12:
                raise ValueError("gap-family reconstruction mismatch")
    # Constant, marginal and externally supplied sequences carry no premises
    # beyond the structural invariants enforced at construction.


# ---------------------------------------------------------------------------
# Witness-condition tables
# ---------------------------------------------------------------------------

HOLDS = "holds-within-tol"
FAILS = "fails"
INFINITE = "infinite-values-encountered"


@dataclass
class WitnessConditionReport:
    """Tables of ``D(rho_n || omega_n)`` and ``Tr rho_n(-ln omega_n)`` with verdicts."""

    relative_entropy_values: list[float]
    relative_entropy_limit: float
    cross_entropy_values: list[float]
    cross_entropy_limit: float
    relative_entropy_verdict: str
    cross_entropy_verdict: str
    tol: float
    tail: int


def _condition_verdict(values: list[float], limit: float, tol: float, tail: int) -> str:
    tail_vals = values[-tail:]
    if math.isinf(limit) or any(math.isinf(v) for v in tail_vals):
        return INFINITE
    if all(abs(v - limit) <= tol for v in tail_vals):
        return HOLDS
    return FAILS


def check_witness_condition(
    seq: StateSequence, wit: WitnessSequence, tol: float = 5e-3, tail: int = 3
) -> WitnessConditionReport:
    """Evaluate the finite-prefix surrogates of the two witness conditions.

    The relative-entropy condition asks ``D(rho_n || omega_n)`` to settle at
    ``D(rho_0 || omega_0) < +inf`` over the tail; the cross-entropy condition
    asks the same of ``Tr rho_n(-ln omega_n)`` (a stronger requirement, which
    additionally pins the entropies).
    """
    if len(wit) != len(seq):
        raise ValueError("sequence and witnesses must have equal length")
    if wit.limit.layout.dims != seq.layout.dims:
        raise ValueError("sequence and witnesses must share one layout")
    d_vals = [relative_entropy(r, w) for r, w in zip(seq.prefix, wit.prefix)]
    d_lim = relative_entropy(seq.limit, wit.limit)
    x_vals = [cross_entropy(r, w) for r, w in zip(seq.prefix, wit.prefix)]
    x_lim = cross_entropy(seq.limit, wit.limit)
    return WitnessConditionReport(
        d_vals,
        d_lim,
        x_vals,
        x_lim,
        _condition_verdict(d_vals, d_lim, tol, tail),
        _condition_verdict(x_vals, x_lim, tol, tail),
        tol,
        tail,
    )


# ---------------------------------------------------------------------------
# The continuity harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarnessConfig:
    tau: float = 5e-3
    tail: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)
    revalidate: bool = True
    warm_start: bool = True
    compute_mutual_information: bool = True


@dataclass
class SequenceRow:
    n: int  # 0 denotes the limit state
    trace_dist: float
    lower: float
    upper: float
    gap: float
    converged: bool
    mutual_information: float | None = None


@dataclass
class ModelReport:
    label: str
    model: FreeSetModel
    rows: list[SequenceRow]
    limit_row: SequenceRow
    observed: str
    predicted: str
    fired_clauses: list[str]
    agreement: bool
    separation: float
    note: str = ""


@dataclass
class ImplicationCheck:
    premise_label: str
    conclusion_label: str
    premise_observed: str
    conclusion_observed: str
    ok: bool


@dataclass
class ConvergenceReport:
    tau: float
    tail: int
    models: list[ModelReport]
    implications: list[ImplicationCheck]
    annotations: dict = field(default_factory=dict)


def model_label(model: FreeSetModel) -> str:
    if isinstance(model, FullySeparable):
        return "separable"
    if isinstance(model, PiSeparable):
        blocks = "|".join(
            "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in p.blocks) + "}"
            for p in model.partitions
        )
        return f"pi:{blocks}"
    if isinstance(model, Ppt):
        return "ppt:" + ",".join(map(str, model.block))
    if isinstance(model, ConvexHull):
        return f"hull({len(model.states)})"
    return type(model).__name__


def _has_finite_distance(state: DensityOperator, model: FreeSetModel, tol: float = 1e-10) -> bool:
    """Cheap decidable finiteness of the distance (always true off hulls)."""
    if not isinstance(model, ConvexHull):
        return True
    mean = sum(s.matrix for s in model.states) / len(model.states)
    evals, evecs = np.linalg.eigh(mean)
    mask = evals > tol * float(np.max(evals))
    v = evecs[:, ~mask]
    if v.shape[1] == 0:
        return True
    leak = float(np.einsum("ij,jk,ki->", v.conj().T, state.matrix, v).real)
    return leak <= tol


def _mutual_information_values(seq: StateSequence) -> tuple[list[float], float] | None:
    if seq.layout.m < 2:
        return None
    vals = [mutual_information(r) for r in seq.prefix]
    return vals, mutual_information(seq.limit)


def predict_clauses(
    seq: StateSequence,
    model: FreeSetModel,
    tau: float = 5e-3,
    tail: int = 3,
    mi_values: tuple[list[float], float] | None = None,
) -> list[str]:
    """Sufficient clauses that fire for this sequence and model.

    Clause names: ``constant``, ``dominated``, ``mixture``, ``pushforward``,
    ``mutual-information``.  An empty list means the theory makes no
    prediction for the sequence.
    """
    fired: list[str] = []
    dists = seq.distances()
    if all(d <= 1e-14 for d in dists) and _has_finite_distance(seq.limit, model):
        fired.append("constant")
    fam = seq.provenance.family
    params = seq.provenance.params
    if fam == "dominated" and _has_finite_distance(params["sigma"], model):
        fired.append("dominated")
    if fam == "mixture":
        if predict_clauses(params["a"], model, tau, tail) and predict_clauses(
            params["b"], model, tau, tail
        ):
            fired.append("mixture")
    if fam == "pushforward" and params.get("cone_checked"):
        declared = params.get("model")
        if declared is not None and model_label(declared) == model_label(model):
            if predict_clauses(params["source"], declared, tau, tail):
                fired.append("pushforward")
    if isinstance(model, (FullySeparable, PiSeparable, Ppt)):
        mi = mi_values if mi_values is not None else _mutual_information_values(seq)
        if mi is not None:
            vals, lim = mi
            if not math.isinf(lim) and all(abs(v - lim) <= tau for v in vals[-tail:]):
                fired.append("mutual-information")
    return fired


def _observed_verdict(
    rows: list[SequenceRow], limit_row: SequenceRow, tau: float, tail: int
) -> tuple[str, float]:
    tail_rows = rows[-tail:]
    if any(r.gap > tau / 2 for r in tail_rows) or limit_row.gap > tau / 2:
        return "inconclusive", float("nan")
    failing = [r for r in tail_rows if not abs(r.upper - limit_row.upper) <= tau]
    if not failing:
        return "yes", 0.0
    separations = [max(r.lower - limit_row.upper, limit_row.lower - r.upper) for r in failing]
    if min(separations) > 0.0:
        return "no", min(separations)
    return "inconclusive", min(separations)


def _solve_along(
    seq: StateSequence,
    model: FreeSetModel,
    cfg: HarnessConfig,
    mi: tuple[list[float], float] | None,
) -> tuple[list[SequenceRow], SequenceRow]:
    dists = seq.distances()
    rows = []
    warm = None
    for i, rho in enumerate(seq.prefix, start=1):
        res: SolverResult = free_distance(rho, model, cfg.solver, sigma0=warm)
        if cfg.warm_start:
            warm = res.sigma_star
        rows.append(
            SequenceRow(
                i,
                dists[i - 1],
                res.bracket[0],
                res.bracket[1],
                res.fw_gap,
                res.converged,
                None if mi is None else mi[0][i - 1],
            )
        )
    res0 = free_distance(seq.limit, model, cfg.solver, sigma0=warm)
    limit_row = SequenceRow(
        0, 0.0, res0.bracket[0], res0.bracket[1], res0.fw_gap, res0.converged,
        None if mi is None else mi[1],
    )
    return rows, limit_row


def run_continuity_harness(
    seq: StateSequence,
    models: Sequence[FreeSetModel],
    cfg: HarnessConfig = HarnessConfig(),
    predictions: dict | None = None,
) -> ConvergenceReport:
    """Measure the free distance along a sequence and render verdicts.

    For each model the harness solves every prefix index plus the limit,
    evaluates which sufficient clauses fire (``predicted``), renders the
    finite-prefix ``observed`` verdict from the brackets, and flags
    disagreements.  When a fully-separable model appears next to
    pi-separable or PPT models, the set-inclusion implications
    (observed convergence of the smaller-set distance forces convergence of
    the larger-set distance) are checked empirically.

    ``predictions`` may carry caller annotations (label -> expected clause);
    they are recorded in the report, not used for the computation.
    """
    if cfg.revalidate:
        revalidate_sequence(seq)
    mi = _mutual_information_values(seq) if cfg.compute_mutual_information else None
    reports: list[ModelReport] = []
    for model in models:
        label = model_label(model)
        rows, limit_row = _solve_along(seq, model, cfg, mi)
        fired = predict_clauses(seq, model, cfg.tau, cfg.tail, mi_values=mi)
        predicted = "converges" if fired else "no-prediction"
        observed, separation = _observed_verdict(rows, limit_row, cfg.tau, cfg.tail)
        if predicted == "converges":
            agreement = observed in ("yes", "inconclusive")
        else:
            agreement = True
        reports.append(
            ModelReport(
                label, model, rows, limit_row, observed, predicted,
                fired, agreement, separation,
            )
        )
    implications: list[ImplicationCheck] = []
    sep_reports = [r for r in reports if isinstance(r.model, FullySeparable)]
    wider = [r for r in reports if isinstance(r.model, (PiSeparable, Ppt))]
    for sep in sep_reports:
        for wide in wider:
            ok = sep.observed != "yes" or wide.observed == "yes"
            implications.append(
                ImplicationCheck(sep.label, wide.label, sep.observed, wide.observed, ok)
            )
    return ConvergenceReport(
        cfg.tau, cfg.tail, reports, implications, dict(predictions or {})
    )


# ---------------------------------------------------------------------------
# Marginal-versus-joint convergence reports
# ---------------------------------------------------------------------------

@dataclass
class DirectionCheck:
    name: str
    premise: str
    conclusion: str
    ok: bool


@dataclass
class MarginalReport:
    block: tuple[int, ...]
    joint: ModelReport
    block_marginal: ModelReport
    complement_marginal: ModelReport
    mi_values: list[float]
    mi_limit: float
    mi_converges: bool
    forward: DirectionCheck
    backward: DirectionCheck


def _marginal_sequence(seq: StateSequence, keep: tuple[int, ...]) -> StateSequence:
    prefix = tuple(partial_trace(r, keep) for r in seq.prefix)
    limit = partial_trace(seq.limit, keep)
    dists = trace_distances(prefix, limit)
    prov = Provenance("marginal", {"source": seq, "keep": keep})
    return StateSequence(prefix, limit, prov, compute_burn_in(dists))


def marginal_reports(
    seq: StateSequence, block: Sequence[int], cfg: HarnessConfig = HarnessConfig()
) -> MarginalReport:
    """Separable-distance tables for a marginal block, its complement and the joint state.

    Checks both directions relating joint and marginal convergence: joint
    convergence forces convergence of every marginal table; conversely, both
    marginal tables converging together with the total correlation across the
    cut forces joint convergence.
    """
    m = seq.layout.m
    blk = tuple(sorted({int(i) for i in block}))
    if not blk or len(blk) >= m or blk[0] < 1 or blk[-1] > m:
        raise ValueError("block must be a non-trivial proper subset of the factors")
    comp = tuple(i for i in range(1, m + 1) if i not in blk)
    if cfg.revalidate:
        revalidate_sequence(seq)

    def run(s: StateSequence, model: FreeSetModel) -> ModelReport:
        mi = _mutual_information_values(s) if cfg.compute_mutual_information else None
        rows, limit_row = _solve_along(s, model, cfg, mi)
        fired = predict_clauses(s, model, cfg.tau, cfg.tail, mi_values=mi)
        observed, separation = _observed_verdict(rows, limit_row, cfg.tau, cfg.tail)
        predicted = "converges" if fired else "no-prediction"
        agreement = predicted != "converges" or observed in ("yes", "inconclusive")
        return ModelReport(
            model_label(model), model, rows, limit_row, observed, predicted,
            fired, agreement, separation,
        )

    joint = run(seq, FullySeparable(seq.layout))
    seq_b = _marginal_sequence(seq, blk)
    seq_c = _marginal_sequence(seq, comp)
    rep_b = run(seq_b, FullySeparable(seq_b.layout))
    rep_c = run(seq_c, FullySeparable(seq_c.layout))

    # Total correlation across the (block | complement) cut.
    grouped = []
    for r in list(seq.prefix) + [seq.limit]:
        a = partial_trace(r, blk)
        full = r.matrix
        # View the joint state on the coarse (block, complement) layout.
        from .operators import permute_factors

        perm = blk + comp
        mat = permute_factors(full, seq.layout.dims, perm)
        dims2 = (
            int(np.prod([seq.layout.dims[i - 1] for i in blk])),
            int(np.prod([seq.layout.dims[i - 1] for i in comp])),
        )
        grouped.append(DensityOperator(mat, SystemLayout(dims2)))
    mi_vals = [mutual_information(g) for g in grouped[:-1]]
    mi_lim = mutual_information(grouped[-1])
    mi_conv = not math.isinf(mi_lim) and all(
        abs(v - mi_lim) <= cfg.tau for v in mi_vals[-cfg.tail :]
    )

    forward = DirectionCheck(
        "joint-to-marginals",
        f"joint observed {joint.observed}",
        f"block {rep_b.observed}, complement {rep_c.observed}",
        joint.observed != "yes" or (rep_b.observed == "yes" and rep_c.observed == "yes"),
    )
    premise_back = rep_b.observed == "yes" and rep_c.observed == "yes" and mi_conv
    backward = DirectionCheck(
        "marginals-plus-correlation-to-joint",
        f"marginals yes/yes and total correlation settled: {premise_back}",
        f"joint observed {joint.observed}",
        (not premise_back) or joint.observed == "yes",
    )
    return MarginalReport(
        blk, joint, rep_b, rep_c, mi_vals, mi_lim, mi_conv, forward, backward
    )
