"""Convex free-set models and their linear-minimization oracles.

Four families are supported: fully separable states, pi-separable states
(convex hull of products across any partition in a declared partition set),
states with positive partial transpose across a declared factor block, and
finite convex hulls of explicit states.

Each model exposes a linear-minimization oracle (LMO) returning an extreme
point approximately minimizing ``Tr(G sigma)``.  The separable oracles are
heuristic (the exact problem is NP-hard in general) and documented as
lower-confidence; the PPT oracle is a splitting scheme with a rigorous
dual-feasibility certificate, so separable results can be sandwiched
(separable is contained in PPT).  All randomness is explicitly seeded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SamplingCapError
from .operators import (
    DensityOperator,
    HermitianOperator,
    Partition,
    PartitionSet,
    SystemLayout,
    _as_layout,
    as_hermitian,
    finest_partition,
    hs_inner,
    permute_factors,
)
from .states import maximally_mixed, random_density, random_pure_ket

PRODUCT_NORM_ATOL = 1e-12


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullySeparable:
    """Convex hull of products of pure states, one per tensor factor."""

    layout: SystemLayout

    def __init__(self, layout):
        object.__setattr__(self, "layout", _as_layout(layout))


@dataclass(frozen=True)
class PiSeparable:
    """Closed convex hull of pure products across any partition in ``partitions``."""

    layout: SystemLayout
    partitions: PartitionSet

    def __init__(self, layout, partitions):
        lay = _as_layout(layout)
        if isinstance(partitions, PartitionSet):
            pset = partitions
        else:
            pset = PartitionSet([p if isinstance(p, Partition) else Partition(p) for p in partitions])
        pset.validate_for(lay)
        object.__setattr__(self, "layout", lay)
        object.__setattr__(self, "partitions", pset)


@dataclass(frozen=True)
class Ppt:
    """States whose partial transpose over the factor ``block`` is positive."""

    layout: SystemLayout
    block: tuple[int, ...]

    def __init__(self, layout, block):
        lay = _as_layout(layout)
        blk = tuple(sorted({int(i) for i in block}))
        if not blk or len(blk) >= lay.m:
            raise ValueError("PPT needs a non-empty proper subset of factors as the transposed block")
        if blk[0] < 1 or blk[-1] > lay.m:
            raise ValueError(f"block {blk} out of range 1..{lay.m}")
        object.__setattr__(self, "layout", lay)
        object.__setattr__(self, "block", blk)


@dataclass(frozen=True)
class ConvexHull:
    """Convex hull of an explicit finite list of states."""

    states: tuple[DensityOperator, ...]

    def __init__(self, states):
        sts = tuple(states)
        if not sts:
            raise ValueError("hull needs at least one state")
        lay = sts[0].layout
        if any(s.layout.dims != lay.dims for s in sts):
            raise ValueError("hull states must share one layout")
        object.__setattr__(self, "states", sts)

    @property
    def layout(self) -> SystemLayout:
        return self.states[0].layout


FreeSetModel = FullySeparable | PiSeparable | Ppt | ConvexHull


@dataclass(frozen=True)
class OracleConfig:
    """Settings for the separable and PPT linear-minimization oracles."""

    restarts: int = 32
    sweeps: int = 200
    seed: int = 0
    tol: float = 1e-9
    ppt_iterations: int = 2000
    ppt_tol: float = 1e-9

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


# ---------------------------------------------------------------------------
# Layout grouping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupedLayout:
    """Coarse-grained layout of a partition, with the factor permutation recorded.

    ``perm[k]`` is the original (1-based) factor occupying position ``k+1``
    after reordering so every block is contiguous; ``layout`` holds one joined
    dimension per block.
    """

    layout: SystemLayout
    perm: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...]
    fine_dims: tuple[int, ...]

    @property
    def inverse_perm(self) -> tuple[int, ...]:
        inv = [0] * len(self.perm)
        for pos, orig in enumerate(self.perm, start=1):
            inv[orig - 1] = pos
        return tuple(inv)

    @property
    def permuted_fine_dims(self) -> tuple[int, ...]:
        return tuple(self.fine_dims[p - 1] for p in self.perm)

    def to_original(self, mat: np.ndarray) -> np.ndarray:
        """Map a matrix on the permuted fine order back to the original order."""
        return permute_factors(mat, self.permuted_fine_dims, self.inverse_perm)


def group_layout(layout, partition: Partition) -> GroupedLayout:
    """Coarse-grain a layout along a partition (blocks become joined factors)."""
    lay = _as_layout(layout)
    partition.validate_for(lay)
    perm = tuple(i for block in partition.blocks for i in block)
    coarse = SystemLayout(
        [int(np.prod([lay.dims[i - 1] for i in block])) for block in partition.blocks]
    )
    return GroupedLayout(coarse, perm, partition.blocks, lay.dims)


# ---------------------------------------------------------------------------
# Product pure states and the alternating oracle
# ---------------------------------------------------------------------------

@dataclass
class ProductPureState:
    """One unit vector per block of the active grouping."""

    vectors: tuple[np.ndarray, ...]
    layout: SystemLayout

    def __post_init__(self):
        if len(self.vectors) != self.layout.m:
            raise ValueError("need one vector per block")
        for v, d in zip(self.vectors, self.layout.dims):
            if v.shape != (d,):
                raise ValueError("vector length does not match block dimension")
            if abs(np.linalg.norm(v) - 1.0) > PRODUCT_NORM_ATOL:
                raise ValueError("block vectors must be unit norm")

    def to_vector(self) -> np.ndarray:
        vec = np.array([1.0], dtype=complex)
        for v in self.vectors:
            vec = np.kron(vec, v)
        return vec

    def to_matrix(self) -> np.ndarray:
        vec = self.to_vector()
        return np.outer(vec, vec.conj())


_BATCH = 40  # einsum label reserved for the restart axis (factor labels stay below)


def _environments(gt: np.ndarray, vecs: list[np.ndarray], k: int, m: int) -> np.ndarray:
    """Contract all blocks except ``k``: returns (restarts, d_k, d_k)."""
    if m == 1:
        return np.broadcast_to(gt, (vecs[0].shape[0],) + gt.shape)
    operands = [gt, list(range(2 * m))]
    for j in range(m):
        if j == k:
            continue
        operands += [vecs[j].conj(), [_BATCH, j], vecs[j], [_BATCH, m + j]]
    return np.einsum(*operands, [_BATCH, k, m + k])


def _objective(gt: np.ndarray, vecs: list[np.ndarray], m: int) -> np.ndarray:
    operands = [gt, list(range(2 * m))]
    for j in range(m):
        operands += [vecs[j].conj(), [_BATCH, j], vecs[j], [_BATCH, m + j]]
    return np.einsum(*operands, [_BATCH]).real


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    idx = int(np.argmax(mags > 1e-9 * (mags.max() + 1e-300)))
    ph = v[idx] / abs(v[idx]) if abs(v[idx]) > 0 else 1.0
    return v * np.conj(ph)


def closest_product_state(
    G, layout, cfg: OracleConfig = OracleConfig(), *, full: bool = False
):
    """Approximately minimize ``<psi_1 x ... x psi_m| G |psi_1 x ... x psi_m>``.

    Alternating block updates: with all blocks but one fixed, the restricted
    problem is a smallest-eigenvector problem on the contracted operator.
    ``cfg.restarts`` random initializations run in lockstep (vectorized); the
    best candidate is returned, with lexicographically-smallest tie breaking
    among equal values so the result does not depend on evaluation order.

    Returns ``(state, value)``; with ``full=True`` also the per-restart final
    values (in restart order), whose running minimum is non-increasing.
    """
    g = as_hermitian(G)
    lay = _as_layout(layout)
    if g.dim != lay.total_dim:
        raise ValueError("operator does not match the layout")
    dims = lay.dims
    m = lay.m
    rng = np.random.default_rng(cfg.seed)
    r = cfg.restarts
    vecs = []
    for d in dims:
        v = rng.standard_normal((r, d)) + 1j * rng.standard_normal((r, d))
        vecs.append(v / np.linalg.norm(v, axis=1, keepdims=True))
    gt = g.entries.reshape(dims + dims).copy()
    prev = _objective(gt, vecs, m)
    for _ in range(cfg.sweeps):
        for k in range(m):
            env = _environments(gt, vecs, k, m)
            env = (env + env.conj().swapaxes(1, 2)) / 2.0
            w, u = np.linalg.eigh(env)
            vecs[k] = np.ascontiguousarray(u[:, :, 0])
        vals = w[:, 0]
        if np.max(np.abs(vals - prev)) < cfg.tol:
            prev = vals
            break
        prev = vals
    finals = _objective(gt, vecs, m)
    best = float(np.min(finals))
    ties = np.nonzero(finals == best)[0]
    pick = int(ties[0])
    if ties.size > 1:
        def key(i):
            parts = [_canonical_phase(vecs[k][i]) for k in range(m)]
            flat = np.concatenate([np.stack([p.real, p.imag], axis=1).ravel() for p in parts])
            return tuple(flat)
        pick = int(min(ties, key=key))
    chosen = tuple(_canonical_phase(vecs[k][pick]).copy() for k in range(m))
    state = ProductPureState(chosen, lay)
    if full:
        return state, best, finals
    return state, best


# ---------------------------------------------------------------------------
# PPT linear subproblem: operator-splitting with a dual certificate
# ---------------------------------------------------------------------------

def _pt_right(mat: np.ndarray, dl: int, dr: int) -> np.ndarray:
    t = mat.reshape(dl, dr, dl, dr)
    return t.transpose(0, 3, 2, 1).reshape(dl * dr, dl * dr)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    valid = np.nonzero(u + (1.0 - css) / k > 0)[0][-1]
    theta = (1.0 - css[valid]) / (valid + 1.0)
    return np.maximum(v + theta, 0.0)


def _proj_density_matrix(mat: np.ndarray) -> np.ndarray:
    h = (mat + mat.conj().T) / 2.0
    w, u = np.linalg.eigh(h)
    return (u * _project_simplex(w)) @ u.conj().T


def _proj_psd(mat: np.ndarray) -> np.ndarray:
    h = (mat + mat.conj().T) / 2.0
    w, u = np.linalg.eigh(h)
    return (u * np.clip(w, 0.0, None)) @ u.conj().T


def _ppt_linear_minimize(
    g: np.ndarray, dl: int, dr: int, max_iter: int, tol: float, warm=None
):
    """min Tr(g x) over x >= 0, x^(T_right) >= 0, Tr x = 1, by ADMM splitting.

    Returns ``(x, lower, residual, converged, state)``.  The lower bound is
    certified independently of convergence quality: for any PSD dual
    candidate ``Z`` the value ``lambda_min(g - Z^(T_right))`` underestimates
    the minimum.  ``state`` can warm-start the next call on a nearby
    objective.
    """
    d = dl * dr
    if warm is not None:
        z, u, mu = warm
        z = z.copy()
        u = u.copy()
    else:
        x = np.eye(d, dtype=complex) / d
        z = _pt_right(x, dl, dr)
        u = np.zeros((d, d), dtype=complex)
        mu = 1.0
    resid = np.inf
    converged = False
    for it in range(max_iter):
        x = _proj_density_matrix(_pt_right(z - u, dl, dr) - g / mu)
        px = _pt_right(x, dl, dr)
        z_new = _proj_psd(px + u)
        dual_res = mu * float(np.linalg.norm(z_new - z))
        z = z_new
        u = u + px - z
        prim_res = float(np.linalg.norm(px - z))
        resid = max(prim_res, dual_res)
        if resid < tol:
            converged = True
            break
        if it % 20 == 19:
            if prim_res > 10.0 * dual_res:
                mu *= 2.0
                u /= 2.0
            elif dual_res > 10.0 * prim_res:
                mu /= 2.0
                u *= 2.0
    # -mu*u approximates the PSD multiplier of the partial-transpose constraint.
    z_cand = _proj_psd(-mu * u)
    lower = float(np.min(np.linalg.eigvalsh(g - _pt_right(z_cand, dl, dr))))
    lower = max(lower, float(np.min(np.linalg.eigvalsh(g))))
    x = _polish_ppt(x, dl, dr)
    return x, lower, resid, converged, (z, u, mu)


def _polish_ppt(x: np.ndarray, dl: int, dr: int) -> np.ndarray:
    """Blend toward the maximally mixed state until exactly PPT-feasible."""
    x = _proj_density_matrix(x)
    d = dl * dr
    lam = float(np.min(np.linalg.eigvalsh(_pt_right(x, dl, dr))))
    if lam < 0.0:
        a = -lam
        beta = a / (a + 1.0 / d)
        x = (1.0 - beta) * x + beta * np.eye(d) / d
    return x


# ---------------------------------------------------------------------------
# The oracle front end
# ---------------------------------------------------------------------------

@dataclass
class LmoResult:
    """Outcome of one linear minimization over a free set.

    ``value`` is ``Tr(G state)``; ``lower_bound`` is a certified lower bound
    on the true minimum (equal to ``value`` for exact oracles, the trivial
    spectral floor for the heuristic separable oracles, and the dual
    certificate for PPT).  ``flagged`` marks PPT non-convergence, with the
    splitting residual recorded.
    """

    state: DensityOperator
    value: float
    lower_bound: float
    exact: bool
    flagged: bool = False
    residual: float = 0.0
    warm_state: object = None  # opaque splitting state, reusable on nearby objectives


def _grouped_product_lmo(g: HermitianOperator, grouping: GroupedLayout, cfg: OracleConfig):
    gp = permute_factors(g.entries, grouping.fine_dims, grouping.perm)
    state, value = closest_product_state(HermitianOperator(gp), grouping.layout, cfg)
    mat = grouping.to_original(state.to_matrix())
    return state, mat, value


def lmo(G, model: FreeSetModel, cfg: OracleConfig = OracleConfig(), *, warm=None) -> LmoResult:
    """Extreme point of the model's set approximately minimizing ``Tr(G sigma)``.

    ``warm`` may carry the ``warm_state`` of a previous result for the same
    model (used by iterative callers whose objectives change slowly).
    """
    g = as_hermitian(G)
    lay = model.layout
    if g.dim != lay.total_dim:
        raise ValueError("operator does not match the model layout")
    if isinstance(model, ConvexHull):
        vals = [hs_inner(g, s) for s in model.states]
        pick = int(np.argmin(vals))
        return LmoResult(model.states[pick], vals[pick], vals[pick], exact=True)
    if isinstance(model, FullySeparable):
        grouping = group_layout(lay, finest_partition(lay))
        _, mat, value = _grouped_product_lmo(g, grouping, cfg)
        floor = float(np.min(np.linalg.eigvalsh(g.entries)))
        return LmoResult(DensityOperator(mat, lay), value, floor, exact=False)
    if isinstance(model, PiSeparable):
        best = None
        for i, part in enumerate(model.partitions):
            sub = OracleConfig(
                restarts=cfg.restarts,
                sweeps=cfg.sweeps,
                seed=cfg.seed + 7919 * i,
                tol=cfg.tol,
                ppt_iterations=cfg.ppt_iterations,
                ppt_tol=cfg.ppt_tol,
            )
            grouping = group_layout(lay, part)
            _, mat, value = _grouped_product_lmo(g, grouping, sub)
            if best is None or value < best[0]:
                best = (value, mat)
        floor = float(np.min(np.linalg.eigvalsh(g.entries)))
        return LmoResult(DensityOperator(best[1], lay), best[0], floor, exact=False)
    if isinstance(model, Ppt):
        rest = tuple(i for i in range(1, lay.m + 1) if i not in model.block)
        perm = rest + model.block
        grouping = GroupedLayout(
            SystemLayout(
                [
                    int(np.prod([lay.dims[i - 1] for i in rest])),
                    int(np.prod([lay.dims[i - 1] for i in model.block])),
                ]
            ),
            perm,
            (rest, model.block),
            lay.dims,
        )
        gp = permute_factors(g.entries, lay.dims, perm)
        dl, dr = grouping.layout.dims
        x, lower, resid, ok, state = _ppt_linear_minimize(
            gp, dl, dr, cfg.ppt_iterations, cfg.ppt_tol, warm=warm
        )
        mat = grouping.to_original(x)
        value = hs_inner(g, mat)
        return LmoResult(
            DensityOperator(mat, lay), value, lower, exact=False,
            flagged=not ok, residual=resid, warm_state=state,
        )
    raise TypeError(f"unknown free-set model {type(model).__name__}")


# ---------------------------------------------------------------------------
# Sampling and membership checks
# ---------------------------------------------------------------------------

def _permute_vector(vec: np.ndarray, dims: tuple[int, ...], perm: tuple[int, ...]) -> np.ndarray:
    t = vec.reshape(dims)
    return t.transpose([p - 1 for p in perm]).ravel()


def _random_pi_product_vector(model: PiSeparable, rng: np.random.Generator) -> np.ndarray:
    parts = model.partitions.partitions
    part = parts[int(rng.integers(len(parts)))]
    grouping = group_layout(model.layout, part)
    vec = np.array([1.0], dtype=complex)
    for d in grouping.layout.dims:
        vec = np.kron(vec, random_pure_ket(d, rng))
    return _permute_vector(vec, grouping.permuted_fine_dims, grouping.inverse_perm)


def sample_free_state(model: FreeSetModel, seed=0, max_tries: int = 200) -> DensityOperator:
    """A seeded random element of the model's set.

    Separable families mix a random number of random product pure states;
    hulls draw Dirichlet weights over their vertices; the PPT set is
    rejection sampled (proposals shrink toward the maximally mixed state on
    failures; exceeding ``max_tries`` raises :class:`SamplingCapError`).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(model, ConvexHull):
        w = rng.dirichlet(np.ones(len(model.states)))
        mat = sum(wi * s.matrix for wi, s in zip(w, model.states))
        return DensityOperator(mat, model.layout)
    if isinstance(model, (FullySeparable, PiSeparable)):
        lay = model.layout
        n_terms = int(rng.integers(1, lay.total_dim + 2))
        w = rng.dirichlet(np.ones(n_terms))
        mat = np.zeros((lay.total_dim, lay.total_dim), dtype=complex)
        for wi in w:
            if isinstance(model, PiSeparable):
                vec = _random_pi_product_vector(model, rng)
            else:
                vec = np.array([1.0], dtype=complex)
                for d in lay.dims:
                    vec = np.kron(vec, random_pure_ket(d, rng))
            mat += wi * np.outer(vec, vec.conj())
        return DensityOperator(mat, lay)
    if isinstance(model, Ppt):
        lay = model.layout
        mix = maximally_mixed(lay).matrix
        s = 0.7
        for _ in range(max_tries):
            raw = random_density(lay, rng).matrix
            cand = (1.0 - s) * mix + s * raw
            pt = partial_transpose_matrix(cand, lay.dims, model.block)
            if float(np.min(np.linalg.eigvalsh(pt))) >= 1e-12:
                return DensityOperator(cand, lay)
            s *= 0.85
        raise SamplingCapError("PPT rejection sampling exceeded its retry cap")
    raise TypeError(f"unknown free-set model {type(model).__name__}")


def partial_transpose_matrix(mat: np.ndarray, dims, block) -> np.ndarray:
    """Partial transpose on raw matrices (1-based factor indices)."""
    dims = tuple(int(d) for d in dims)
    m = len(dims)
    t = mat.reshape(dims + dims)
    axes = list(range(2 * m))
    for i in block:
        axes[i - 1], axes[m + i - 1] = axes[m + i - 1], axes[i - 1]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


def _common_cuts(model: PiSeparable) -> list[tuple[int, ...]]:
    """Factor subsets that are block unions of every partition in the set."""
    lay = model.layout
    m = lay.m
    cuts = []
    for mask in range(1, 2 ** m - 1):
        s = tuple(i + 1 for i in range(m) if mask & (1 << i))
        ok = True
        for part in model.partitions:
            for b in part.blocks:
                inside = set(b) <= set(s)
                outside = not (set(b) & set(s))
                if not (inside or outside):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            cuts.append(s)
    return cuts


def necessary_membership_check(state: DensityOperator, model: FreeSetModel, tol: float = 1e-9):
    """Cheap necessary conditions for membership in the model's set.

    Separable families are tested by positivity of the partial transpose
    across the applicable cuts (the Peres direction only, so a pass is not a
    separability certificate); hulls by weight recovery over the vertices.
    Returns ``(ok, detail)``.
    """
    if isinstance(model, ConvexHull):
        basis = np.stack([s.matrix.ravel() for s in model.states], axis=1)
        w, *_ = np.linalg.lstsq(basis, state.matrix.ravel(), rcond=None)
        w = w.real
        resid = float(np.linalg.norm(basis @ w - state.matrix.ravel()))
        ok = resid <= 1e-8 and np.all(w >= -1e-8) and abs(w.sum() - 1.0) <= 1e-8
        return ok, f"hull weight recovery residual {resid:.2e}"
    dims = model.layout.dims
    if isinstance(model, FullySeparable):
        cuts = [(i,) for i in range(1, model.layout.m + 1)]
    elif isinstance(model, PiSeparable):
        cuts = _common_cuts(model)
        if not cuts:
            return True, "no common cut across the partition set (vacuous check)"
    elif isinstance(model, Ppt):
        cuts = [model.block]
    else:
        raise TypeError(f"unknown free-set model {type(model).__name__}")
    for cut in cuts:
        pt = partial_transpose_matrix(state.matrix, dims, cut)
        lam = float(np.min(np.linalg.eigvalsh(pt)))
        if lam < -tol:
            return False, f"partial transpose over {cut} has eigenvalue {lam:.2e}"
    return True, f"positive partial transpose across {len(cuts)} cut(s)"
