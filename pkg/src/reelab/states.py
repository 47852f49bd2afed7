"""Common states and seeded random generators used by tests, demos and oracles."""

from __future__ import annotations

import numpy as np

from .operators import DensityOperator, SystemLayout, _as_layout


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def dm(vec: np.ndarray, layout) -> DensityOperator:
    """Density operator of a (normalized) pure state vector."""
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return DensityOperator(np.outer(v, v.conj()), layout)


def maximally_entangled_ket(d: int, ambient: int | None = None) -> np.ndarray:
    """Schmidt-rank-``d`` maximally entangled vector, optionally embedded in
    an ``ambient x ambient`` bipartite space (first ``d`` levels of each factor)."""
    amb = d if ambient is None else ambient
    if amb < d:
        raise ValueError("ambient dimension smaller than Schmidt rank")
    v = np.zeros(amb * amb, dtype=complex)
    for i in range(d):
        v[i * amb + i] = 1.0
    return v / np.sqrt(d)


def bell_state(d: int = 2) -> DensityOperator:
    """Maximally entangled state on a ``d x d`` bipartite layout."""
    return dm(maximally_entangled_ket(d), [d, d])


def maximally_mixed(layout) -> DensityOperator:
    lay = _as_layout(layout)
    n = lay.total_dim
    return DensityOperator(np.eye(n) / n, lay)


def random_unitary(d: int, seed=0) -> np.ndarray:
    """Haar-random unitary via QR with the standard phase fix."""
    rng = _rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_pure_ket(d: int, seed=0) -> np.ndarray:
    rng = _rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(layout, seed=0, rank: int | None = None) -> DensityOperator:
    """Hilbert-Schmidt-style random state ``G G^dag / Tr`` with optional rank."""
    lay = _as_layout(layout)
    rng = _rng(seed)
    n = lay.total_dim
    r = n if rank is None else int(rank)
    g = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real, lay)


def random_faithful_density(layout, seed=0, floor: float = 0.2) -> DensityOperator:
    """Random full-rank state bounded away from the boundary.

    A ``floor`` fraction of the maximally mixed state is blended in, keeping
    the smallest eigenvalue at least ``floor / dim``.
    """
    lay = _as_layout(layout)
    raw = random_density(lay, seed)
    n = lay.total_dim
    return DensityOperator((1 - floor) * raw.matrix + floor * np.eye(n) / n, lay)


def random_product_pure(layout, seed=0) -> DensityOperator:
    lay = _as_layout(layout)
    rng = _rng(seed)
    vec = np.array([1.0], dtype=complex)
    for d in lay.dims:
        vec = np.kron(vec, random_pure_ket(d, rng))
    return dm(vec, lay)


def random_traceless_hermitian(d: int, seed=0) -> np.ndarray:
    """GUE-style traceless Hermitian direction (unnormalized)."""
    rng = _rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (g + g.conj().T) / 2.0
    return h - np.trace(h).real / d * np.eye(d)
