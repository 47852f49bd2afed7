"""Dense complex-matrix substrate for finite-dimensional quantum systems.

Provides validated operator wrappers (Hermitian / positive / density), layouts
of multipartite tensor factors, partitions of those factors, spectral function
calculus, the divided-difference derivative of the matrix logarithm, and the
tensor / partial-trace / partial-transpose algebra.

Subsystems of an ``m``-partite layout are numbered ``1..m`` throughout the
public API.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import SupportViolationError

# Construction tolerances.  Natural logarithms (nats) are used everywhere.
HERMITICITY_REJECT = 1e-8     # asymmetry beyond this is an input error
PSD_CLIP_RTOL = 1e-10         # eigenvalues in [-rtol*norm, 0) are clipped to 0
UNIT_TRACE_ATOL = 1e-10
SUPPORT_RTOL = 1e-10          # default support cutoff, relative to lambda_max
DEGENERACY_RTOL = 1e-9        # divided-difference kernel switches to the limit


# ---------------------------------------------------------------------------
# Layouts and partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor-factor dimensions ``[d_1, ..., d_m]`` of a multipartite system."""

    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 1:
            raise ValueError("layout needs at least one factor")
        if any(d < 1 for d in dims):
            raise ValueError(f"factor dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def __iter__(self):
        return iter(self.dims)


def _as_layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout(layout)


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of subsystem indices covering ``{1..m}``.

    Blocks are canonicalized: each block sorted ascending, blocks ordered by
    their smallest element.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __init__(self, blocks: Iterable[Iterable[int]]):
        canon = tuple(sorted(tuple(sorted(int(i) for i in b)) for b in blocks))
        if not canon or any(len(b) == 0 for b in canon):
            raise ValueError("partition blocks must be non-empty")
        flat = [i for b in canon for i in b]
        if len(flat) != len(set(flat)):
            raise ValueError(f"partition blocks overlap: {canon}")
        object.__setattr__(self, "blocks", canon)

    def validate_for(self, layout: SystemLayout) -> None:
        covered = sorted(i for b in self.blocks for i in b)
        if covered != list(range(1, layout.m + 1)):
            raise ValueError(
                f"partition {self.blocks} does not cover subsystems 1..{layout.m}"
            )

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class PartitionSet:
    """Non-empty collection of partitions of the same index set."""

    partitions: tuple[Partition, ...]

    def __init__(self, partitions: Iterable[Partition]):
        parts = tuple(partitions)
        if not parts:
            raise ValueError("partition set must be non-empty")
        object.__setattr__(self, "partitions", parts)

    def validate_for(self, layout: SystemLayout) -> None:
        for p in self.partitions:
            p.validate_for(layout)

    def __iter__(self):
        return iter(self.partitions)

    def __len__(self):
        return len(self.partitions)


def finest_partition(layout: SystemLayout) -> Partition:
    """The partition with one block per tensor factor."""
    return Partition([(i,) for i in range(1, layout.m + 1)])


# ---------------------------------------------------------------------------
# Operator wrappers
# ---------------------------------------------------------------------------

def _as_square_complex(entries) -> np.ndarray:
    a = np.array(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix entries must be finite")
    return a


class HermitianOperator:
    """A validated Hermitian matrix.

    Input asymmetry beyond ``1e-8`` (max-norm) is rejected; smaller asymmetry
    is symmetrized away.  Entries are immutable after construction.
    """

    __slots__ = ("entries", "dim")

    def __init__(self, entries):
        a = _as_square_complex(entries)
        asym = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
        if asym > HERMITICITY_REJECT:
            raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
        h = (a + a.conj().T) / 2.0
        h.flags.writeable = False
        self.entries = h
        self.dim = h.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.entries

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.entries)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class PositiveOperator:
    """A positive semidefinite operator with cached spectral data.

    Eigenvalues in ``[-1e-10 * norm, 0)`` are clipped to zero at construction
    (round-off from tensor contractions); anything more negative is rejected.
    """

    __slots__ = ("base", "trace", "_evals", "_evecs")

    def __init__(self, entries):
        base = entries if isinstance(entries, HermitianOperator) else HermitianOperator(entries)
        evals, evecs = np.linalg.eigh(base.entries)
        norm = float(np.max(np.abs(evals))) if evals.size else 0.0
        floor = -PSD_CLIP_RTOL * norm
        if evals.size and float(evals[0]) < floor:
            raise ValueError(
                f"matrix is not positive semidefinite (min eigenvalue {evals[0]:.3e})"
            )
        if evals.size and float(evals[0]) < 0.0:
            evals = np.clip(evals, 0.0, None)
            base = HermitianOperator((evecs * evals) @ evecs.conj().T)
        self.base = base
        self.trace = float(np.trace(base.entries).real)
        self._evals = evals
        self._evals.flags.writeable = False
        self._evecs = evecs
        self._evecs.flags.writeable = False

    @property
    def matrix(self) -> np.ndarray:
        return self.base.entries

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def hermitian(self) -> HermitianOperator:
        return self.base

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return self._evals, self._evecs

    def __repr__(self):
        return f"PositiveOperator(dim={self.dim}, trace={self.trace:.6g})"


class DensityOperator:
    """A unit-trace positive operator on a declared multipartite layout."""

    __slots__ = ("base", "layout")

    def __init__(self, entries, layout):
        base = entries if isinstance(entries, PositiveOperator) else PositiveOperator(entries)
        layout = _as_layout(layout)
        if abs(base.trace - 1.0) > UNIT_TRACE_ATOL:
            raise ValueError(f"state trace {base.trace} deviates from 1 beyond tolerance")
        if layout.total_dim != base.dim:
            raise ValueError(
                f"layout {layout.dims} has total dimension {layout.total_dim}, "
                f"matrix has dimension {base.dim}"
            )
        self.base = base
        self.layout = layout

    @property
    def matrix(self) -> np.ndarray:
        return self.base.matrix

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def positive(self) -> PositiveOperator:
        return self.base

    @property
    def hermitian(self) -> HermitianOperator:
        return self.base.base

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return self.base.eig()

    def __repr__(self):
        return f"DensityOperator(layout={self.layout.dims})"


def as_hermitian(op) -> HermitianOperator:
    """Coerce any operator wrapper (or raw matrix) to a HermitianOperator."""
    if isinstance(op, HermitianOperator):
        return op
    if isinstance(op, PositiveOperator):
        return op.base
    if isinstance(op, DensityOperator):
        return op.hermitian
    return HermitianOperator(op)


def as_positive(op) -> PositiveOperator:
    """Coerce a positive / density wrapper (or raw matrix) to a PositiveOperator."""
    if isinstance(op, PositiveOperator):
        return op
    if isinstance(op, DensityOperator):
        return op.positive
    return PositiveOperator(op)


# ---------------------------------------------------------------------------
# Spectral calculus
# ---------------------------------------------------------------------------

def spectral_apply(op, f: Callable[[float], float]) -> HermitianOperator:
    """Apply a real scalar function to a Hermitian operator through its spectrum.

    Returns ``U f(L) U^dag`` for the eigendecomposition ``U L U^dag``.  The
    caller owns the convention at zero (e.g. ``f(0) = 0`` for entropy-type
    functions and for the logarithm restricted to the support).
    """
    h = as_hermitian(op)
    evals, evecs = h.eig()
    try:
        fvals = np.asarray(f(evals), dtype=float)
        if fvals.shape != evals.shape:
            raise TypeError
    except (TypeError, ValueError):
        fvals = np.array([float(f(float(v))) for v in evals])
    return HermitianOperator((evecs * fvals) @ evecs.conj().T)


def _log_kernel(evals: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Divided-difference kernel of ``ln`` on the masked (support) eigenvalues.

    ``K[i, j] = (ln l_i - ln l_j) / (l_i - l_j)`` with the limit value for
    pairs closer than ``DEGENERACY_RTOL * lambda_max`` (avoids catastrophic
    cancellation); entries involving off-support eigenvalues are zero.
    """
    n = evals.size
    lmax = float(np.max(evals[mask])) if np.any(mask) else 0.0
    kernel = np.zeros((n, n))
    if lmax <= 0.0:
        return kernel
    idx = np.where(mask)[0]
    lam = evals[idx]
    diff = lam[:, None] - lam[None, :]
    degen = np.abs(diff) < DEGENERACY_RTOL * lmax
    safe = np.where(degen, 1.0, diff)
    block = (np.log(lam)[:, None] - np.log(lam)[None, :]) / safe
    mean = (lam[:, None] + lam[None, :]) / 2.0
    block[degen] = 1.0 / mean[degen]
    kernel[np.ix_(idx, idx)] = block
    return kernel


def frechet_log(sigma: PositiveOperator, direction, tol: float = SUPPORT_RTOL) -> HermitianOperator:
    """Directional derivative of the matrix logarithm at ``sigma``.

    In ``sigma``'s eigenbasis the output entries are the direction's entries
    scaled by the divided-difference kernel of ``ln``; the derivative is taken
    on the support of ``sigma``.  The direction must be supported within
    ``supp(sigma)``: any relative weight beyond ``tol`` outside the support
    raises :class:`SupportViolationError`.
    """
    sigma = as_positive(sigma)
    x = as_hermitian(direction)
    if x.dim != sigma.dim:
        raise ValueError("dimension mismatch between sigma and direction")
    evals, evecs = sigma.eig()
    lmax = float(np.max(evals)) if evals.size else 0.0
    mask = evals > tol * lmax
    xt = evecs.conj().T @ x.entries @ evecs
    if not np.all(mask):
        out = ~mask
        leak = max(
            float(np.max(np.abs(xt[out, :]))) if np.any(out) else 0.0,
            float(np.max(np.abs(xt[:, out]))) if np.any(out) else 0.0,
        )
        scale = max(float(np.max(np.abs(xt))), 1e-300)
        if leak > tol * scale:
            raise SupportViolationError(
                f"direction has relative weight {leak / scale:.3e} outside supp(sigma)"
            )
    kernel = _log_kernel(evals, mask)
    return HermitianOperator(evecs @ (kernel * xt) @ evecs.conj().T)


def support_projector(rho: PositiveOperator, tol: float = SUPPORT_RTOL) -> HermitianOperator:
    """Orthogonal projector onto eigenvectors with eigenvalue > ``tol * lambda_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho = as_positive(rho)
    evals, evecs = rho.eig()
    lmax = float(np.max(evals)) if evals.size else 0.0
    mask = evals > tol * lmax
    v = evecs[:, mask]
    return HermitianOperator(v @ v.conj().T)


# ---------------------------------------------------------------------------
# Tensor algebra
# ---------------------------------------------------------------------------

def tensor(a, b):
    """Tensor (Kronecker) product of two operator wrappers.

    Two density operators combine into a density operator with concatenated
    layout; otherwise the strongest common wrapper type is returned.
    """
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(
            np.kron(a.matrix, b.matrix), SystemLayout(a.layout.dims + b.layout.dims)
        )
    if isinstance(a, (DensityOperator, PositiveOperator)) and isinstance(
        b, (DensityOperator, PositiveOperator)
    ):
        return PositiveOperator(np.kron(as_positive(a).matrix, as_positive(b).matrix))
    return HermitianOperator(np.kron(as_hermitian(a).matrix, as_hermitian(b).matrix))


def _check_subsystems(indices, m: int) -> tuple[int, ...]:
    idx = tuple(sorted({int(i) for i in indices}))
    if not idx:
        raise ValueError("subsystem index set must be non-empty")
    if idx[0] < 1 or idx[-1] > m:
        raise ValueError(f"subsystem indices {idx} out of range 1..{m}")
    return idx


def _layout_of(op, layout) -> SystemLayout:
    if layout is not None:
        return _as_layout(layout)
    if isinstance(op, DensityOperator):
        return op.layout
    raise ValueError("a layout is required for non-density operators")


def partial_trace(op, keep, layout=None):
    """Trace out all tensor factors except those in ``keep`` (1-based indices).

    Returns a :class:`DensityOperator` on the kept factors when the input is a
    density operator, otherwise a :class:`PositiveOperator`.
    """
    lay = _layout_of(op, layout)
    keep_idx = _check_subsystems(keep, lay.m)
    dims = lay.dims
    mat = as_positive(op).matrix if isinstance(op, (PositiveOperator, DensityOperator)) else as_hermitian(op).matrix
    t = mat.reshape(dims + dims)
    m = lay.m
    # Repeated einsum labels on bra/ket pairs contract the traced factors.
    bra = list(range(m))
    ket = [i if (i + 1) not in keep_idx else m + i for i in range(m)]
    out = [i for i in bra if (i + 1) in keep_idx] + [m + i for i in range(m) if (i + 1) in keep_idx]
    reduced = np.einsum(t, bra + ket, out)
    dk = int(np.prod([dims[i - 1] for i in keep_idx]))
    reduced = reduced.reshape(dk, dk)
    if isinstance(op, DensityOperator):
        return DensityOperator(reduced, SystemLayout([dims[i - 1] for i in keep_idx]))
    return PositiveOperator(reduced)


def partial_transpose(op, subsystems, layout=None) -> HermitianOperator:
    """Transpose the listed tensor factors (1-based indices).

    Hermiticity and trace are preserved; positivity generally is not, so the
    result is returned as a plain Hermitian operator.
    """
    lay = _layout_of(op, layout)
    idx = _check_subsystems(subsystems, lay.m)
    dims = lay.dims
    m = lay.m
    mat = as_hermitian(op).matrix
    t = mat.reshape(dims + dims)
    axes = list(range(2 * m))
    for i in idx:
        axes[i - 1], axes[m + i - 1] = axes[m + i - 1], axes[i - 1]
    d = lay.total_dim
    return HermitianOperator(t.transpose(axes).reshape(d, d))


def permute_factors(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a matrix: factor ``perm[k]`` becomes factor ``k+1``."""
    dims = tuple(int(d) for d in dims)
    m = len(dims)
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(1, m + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{m}")
    t = mat.reshape(dims + dims)
    axes = [p - 1 for p in perm] + [m + p - 1 for p in perm]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


# ---------------------------------------------------------------------------
# Small numerics shared across modules
# ---------------------------------------------------------------------------

def trace_norm(x) -> float:
    """Trace norm (sum of singular values); eigenvalue-based for Hermitian input."""
    if isinstance(x, (HermitianOperator, PositiveOperator, DensityOperator)):
        return float(np.sum(np.abs(np.linalg.eigvalsh(as_hermitian(x).matrix))))
    x = np.asarray(x)
    asym = float(np.max(np.abs(x - x.conj().T))) if x.size else 0.0
    if asym < 1e-12:
        return float(np.sum(np.abs(np.linalg.eigvalsh((x + x.conj().T) / 2.0))))
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def hs_inner(a, b) -> float:
    """Real Hilbert-Schmidt pairing ``Re Tr(a^dag b)``."""
    am = a.matrix if hasattr(a, "matrix") else np.asarray(a)
    bm = b.matrix if hasattr(b, "matrix") else np.asarray(b)
    return float(np.tensordot(am.conj(), bm, axes=2).real)
