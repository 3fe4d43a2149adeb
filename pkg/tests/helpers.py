"""Shared test utilities: brute-force oracles and random object generators."""

from __future__ import annotations

from math import prod

import numpy as np

from timeflip.channels import KrausChannel
from timeflip.tensor_core import HermitianOperator, SystemLayout

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def flat_index(multi, dims):
    idx = 0
    for k, d in zip(multi, dims):
        idx = idx * d + k
    return idx


def oracle_partial_trace(mat, dims, kept_positions):
    """Brute-force partial trace: explicit sum over the traced basis indices."""
    kept = sorted(kept_positions)
    traced = [k for k in range(len(dims)) if k not in kept]
    out_dims = [dims[k] for k in kept]
    out_n = prod(out_dims) if out_dims else 1
    out = np.zeros((out_n, out_n), dtype=complex)
    for row in np.ndindex(*dims):
        for col in np.ndindex(*dims):
            if any(row[t] != col[t] for t in traced):
                continue
            r = flat_index([row[k] for k in kept], out_dims)
            c = flat_index([col[k] for k in kept], out_dims)
            out[r, c] += mat[flat_index(row, dims), flat_index(col, dims)]
    return out


def oracle_trace_and_replace(mat, dims, replaced_positions):
    """Brute-force trace-and-replace via the partial-trace oracle and a kron."""
    replaced = sorted(replaced_positions)
    kept = [k for k in range(len(dims)) if k not in replaced]
    reduced = oracle_partial_trace(mat, dims, kept)
    scale = prod(dims[k] for k in replaced)
    n = prod(dims)
    out = np.zeros((n, n), dtype=complex)
    red_dims = [dims[k] for k in kept]
    for row in np.ndindex(*dims):
        for col in np.ndindex(*dims):
            if any(row[t] != col[t] for t in replaced):
                continue
            r = flat_index([row[k] for k in kept], red_dims)
            c = flat_index([col[k] for k in kept], red_dims)
            out[flat_index(row, dims), flat_index(col, dims)] = reduced[r, c] / scale
    return out


def random_hermitian(rng, n, scale=1.0):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (g + g.conj().T) / 2


def random_hermitian_operator(rng, layout: SystemLayout, scale=1.0) -> HermitianOperator:
    return HermitianOperator(layout, random_hermitian(rng, layout.total_dim, scale))


def random_psd(rng, n, scale=1.0):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (g @ g.conj().T) / n


def random_unitary(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_bistochastic_channel(rng, n=2, terms=3) -> KrausChannel:
    """A random mixture of unitaries (always bistochastic)."""
    probs = rng.dirichlet(np.ones(terms))
    kraus = [np.sqrt(p) * random_unitary(rng, n) for p in probs]
    return KrausChannel(kraus)


def random_channel(rng, din, dout, kraus_rank=2) -> KrausChannel:
    """A random channel from a Haar-style isometry, sliced into Kraus terms."""
    g = rng.normal(size=(dout * kraus_rank, din)) + 1j * rng.normal(size=(dout * kraus_rank, din))
    q, r = np.linalg.qr(g)
    iso = q[:, :din] * (np.diag(r)[:din] / np.abs(np.diag(r)[:din]))
    kraus = [iso[k * dout:(k + 1) * dout, :] for k in range(kraus_rank)]
    return KrausChannel(kraus)
