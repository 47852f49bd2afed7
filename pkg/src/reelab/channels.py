"""Quantum operations in Kraus form (completely positive, trace non-increasing)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import PositiveOperator, SystemLayout, _as_layout
from .states import random_unitary

TNI_ATOL = 1e-10  # allowed excess of sum K^dag K over the identity


@dataclass(frozen=True)
class QuantumOperation:
    """A quantum operation given by a Kraus family.

    Complete positivity is automatic for any Kraus family; trace
    non-increase (``sum K^dag K <= I`` within ``1e-10``) is validated at
    construction.  Kraus matrices map the input space to the output space.
    """

    kraus: tuple[np.ndarray, ...]
    layout_in: SystemLayout
    layout_out: SystemLayout

    def __init__(self, kraus, layout_in, layout_out=None):
        ks = tuple(np.asarray(k, dtype=complex) for k in kraus)
        if not ks:
            raise ValueError("a quantum operation needs at least one Kraus operator")
        lin = _as_layout(layout_in)
        lout = lin if layout_out is None else _as_layout(layout_out)
        din, dout = lin.total_dim, lout.total_dim
        for k in ks:
            if k.shape != (dout, din):
                raise ValueError(f"Kraus operator shape {k.shape} != ({dout}, {din})")
        acc = sum(k.conj().T @ k for k in ks)
        excess = float(np.max(np.linalg.eigvalsh(acc)) - 1.0)
        if excess > TNI_ATOL:
            raise ValueError(f"operation increases trace (excess {excess:.3e})")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "layout_in", lin)
        object.__setattr__(self, "layout_out", lout)

    @property
    def is_channel(self) -> bool:
        """True when the Kraus family is trace preserving within tolerance."""
        acc = sum(k.conj().T @ k for k in self.kraus)
        return bool(np.max(np.abs(acc - np.eye(self.layout_in.total_dim))) <= 1e-10)

    def apply_matrix(self, mat: np.ndarray) -> np.ndarray:
        return sum(k @ mat @ k.conj().T for k in self.kraus)

    def apply(self, op) -> PositiveOperator:
        """Push a positive (or density) operator through; output is unnormalized."""
        mat = op.matrix if hasattr(op, "matrix") else np.asarray(op, dtype=complex)
        return PositiveOperator(self.apply_matrix(mat))


def identity_operation(layout) -> QuantumOperation:
    lay = _as_layout(layout)
    return QuantumOperation([np.eye(lay.total_dim)], lay)


def unitary_operation(u: np.ndarray, layout) -> QuantumOperation:
    return QuantumOperation([np.asarray(u, dtype=complex)], layout)


def local_unitary_operation(blocks, layout) -> QuantumOperation:
    """Conjugation by a tensor product of per-factor unitaries."""
    lay = _as_layout(layout)
    if len(blocks) != lay.m:
        raise ValueError("need one unitary per tensor factor")
    u = np.array([[1.0]], dtype=complex)
    for b in blocks:
        u = np.kron(u, np.asarray(b, dtype=complex))
    return QuantumOperation([u], lay)


def local_projection_operation(proj: np.ndarray, factor: int, layout) -> QuantumOperation:
    """Single Kraus operator ``P`` acting on one factor, identity elsewhere."""
    lay = _as_layout(layout)
    if not 1 <= factor <= lay.m:
        raise ValueError("factor index out of range")
    k = np.array([[1.0]], dtype=complex)
    for i, d in enumerate(lay.dims, start=1):
        k = np.kron(k, np.asarray(proj, dtype=complex) if i == factor else np.eye(d))
    return QuantumOperation([k], lay)


def random_isometry_channel(layout_in, layout_out, env_dim: int, seed=0) -> QuantumOperation:
    """Channel built from a Haar-random isometry followed by tracing an environment."""
    lin = _as_layout(layout_in)
    lout = _as_layout(layout_out)
    din = lin.total_dim
    dout = lout.total_dim
    big = dout * env_dim
    if big < din:
        raise ValueError("output x environment dimension must cover the input")
    v = random_unitary(big, seed)[:, :din]
    # Tracing the environment of V rho V^dag is the Kraus family of its blocks.
    kraus = [v.reshape(dout, env_dim, din)[:, e, :] for e in range(env_dim)]
    return QuantumOperation(kraus, lin, lout)
