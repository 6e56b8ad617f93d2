"""
Discrete operators on the lattice of N-th roots of unity.

A lattice field is stored as an ``(N, d)`` array whose row ``k`` holds the
value at the node ``z_k = exp(2 pi i k / N)``; for spin fields ``d = 3``.
Every operator here is a circulant matrix, so it is applied by transforming
to Fourier space, multiplying by its symbol on the folded frequencies
``k = -n..n`` (``N = 2n + 1``) and transforming back.

Inner products carry the weight ``1/N``:

.. math:: \\langle f, g \\rangle = \\frac{1}{N} \\sum_k \\overline{f_k} \\cdot g_k

The DFT backend is chosen once at import time from the ``CMSPIN_DFT``
environment variable: ``numpy`` (default, pocketfft handles any length) or
``direct`` (dense O(N^2) transform, useful as a cross-check).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "LatticeGeometry",
    "LatticeField",
    "SpinConfiguration",
    "MultiplierOp",
    "HalfwavePower",
    "BesselPower",
    "Laplacian",
    "DiffPlus",
    "DiffMinus",
    "Translate",
    "check_odd",
    "folded_frequencies",
    "spectrum_N",
    "spectrum_folded",
    "spectrum_exact",
    "halfwave_matrix",
    "dft",
    "idft",
    "multiplier_apply",
    "halfwave_N",
    "inner",
    "hamiltonian",
    "discrete_norm",
]

DFT_BACKEND = os.environ.get("CMSPIN_DFT", "numpy").strip().lower()
if DFT_BACKEND not in ("numpy", "direct"):
    raise ImportError(f"CMSPIN_DFT must be 'numpy' or 'direct', got {DFT_BACKEND!r}")

SPHERE_TOL = 1e-12


def check_odd(N) -> int:
    """Validate a lattice size and return it as ``int``."""
    if isinstance(N, (bool, np.bool_)) or int(N) != N:
        raise ValueError(f"N must be an integer, got {N!r}")
    N = int(N)
    if N < 3 or N % 2 == 0:
        raise ValueError(f"N must be odd and >= 3, got {N}")
    return N


@dataclass(frozen=True)
class LatticeGeometry:
    """The N-point circle; ``N`` odd and at least 3."""

    N: int

    def __post_init__(self):
        object.__setattr__(self, "N", check_odd(self.N))

    @property
    def n(self) -> int:
        return (self.N - 1) // 2

    @property
    def h(self) -> float:
        return 2 * np.pi / self.N

    @property
    def nodes(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.N) / self.N

    @property
    def points(self) -> np.ndarray:
        """Nodes as complex roots of unity."""
        return np.exp(1j * self.nodes)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Vector-valued map on the N-point circle.

    Parameters
    ----------
    values : array_like, shape (N, d)
        Value at each node. One-dimensional input is promoted to ``d = 1``.
        Complex values are allowed (Fourier modes); physical spins are real.
    """

    values: np.ndarray
    geometry: LatticeGeometry = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError(f"values must have shape (N, d), got {v.shape}")
        if not np.issubdtype(v.dtype, np.number):
            raise TypeError("values must be numeric")
        if not np.iscomplexobj(v):
            v = v.astype(float)
        object.__setattr__(self, "geometry", LatticeGeometry(v.shape[0]))
        object.__setattr__(self, "values", _frozen(v))

    @property
    def N(self) -> int:
        return self.geometry.N

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.N

    def __eq__(self, other):
        if not isinstance(other, LatticeField):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"{type(self).__name__}(N={self.N}, dim={self.dim})"


class SpinConfiguration(LatticeField):
    """Real 3-vector lattice field with unit length at every node."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_real or self.dim != 3:
            raise ValueError("spin configurations are real with 3 components")
        dev = np.max(np.abs(np.linalg.norm(self.values, axis=1) - 1.0))
        if dev > SPHERE_TOL:
            raise ValueError(f"spins must have unit length (max deviation {dev:.3e})")

    @classmethod
    def normalized(cls, values) -> "SpinConfiguration":
        """Project each node onto the unit sphere."""
        v = np.asarray(values, dtype=float)
        return cls(v / np.linalg.norm(v, axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# spectrum


def folded_frequencies(N: int) -> np.ndarray:
    """Integer frequency of each DFT slot, folded into ``[-n, n]``."""
    N = check_odd(N)
    k = np.arange(N)
    return np.where(k <= N // 2, k, k - N)


def spectrum_N(N: int) -> np.ndarray:
    """Eigenvalues ``mu_k = k (1 - k/N)`` of the lattice half-wave operator.

    Returned in index order ``k = 0..N-1``; the list is symmetric,
    ``mu_k = mu_{N-k}``.
    """
    N = check_odd(N)
    k = np.arange(N, dtype=float)
    return k * (N - k) / N


def spectrum_folded(N: int) -> np.ndarray:
    """Eigenvalues listed for ``k = -n..n`` as ``|k| (1 - |k|/N)``."""
    N = check_odd(N)
    n = N // 2
    k = np.abs(np.arange(-n, n + 1, dtype=float))
    return k * (N - k) / N


def spectrum_exact(N: int) -> list[Fraction]:
    """Eigenvalues in rational arithmetic."""
    N = check_odd(N)
    return [Fraction(k * (N - k), N) for k in range(N)]


def halfwave_matrix(N: int) -> np.ndarray:
    """Dense matrix of the lattice half-wave operator from its pair sum.

    Built entry by entry from ``2/(N |z_k - z_l|^2)``; used as an
    independent check of the Fourier diagonalization.
    """
    N = check_odd(N)
    z = LatticeGeometry(N).points
    d2 = np.abs(z[:, None] - z[None, :]) ** 2
    np.fill_diagonal(d2, np.inf)
    C = -2.0 / (N * d2)
    np.fill_diagonal(C, 0.0)
    np.fill_diagonal(C, -C.sum(axis=1))
    return C


# ---------------------------------------------------------------------------
# DFT


@lru_cache(maxsize=32)
def _dft_matrix(N: int) -> np.ndarray:
    k = np.arange(N)
    m = np.exp(-2j * np.pi * np.outer(k, k) / N)
    m.setflags(write=False)
    return m


def dft(values: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT along axis 0, ``sum_j v_j exp(-2 pi i jk/N)``."""
    if DFT_BACKEND == "direct":
        return _dft_matrix(values.shape[0]) @ values
    return np.fft.fft(values, axis=0)


def idft(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft` (carries the ``1/N``)."""
    if DFT_BACKEND == "direct":
        N = coeffs.shape[0]
        return _dft_matrix(N).conj() @ coeffs / N
    return np.fft.ifft(coeffs, axis=0)


# ---------------------------------------------------------------------------
# Fourier multipliers


class MultiplierOp:
    """A circulant operator described by its symbol on folded frequencies."""

    def symbol(self, k: np.ndarray, N: int) -> np.ndarray:
        raise NotImplementedError


def _mu(k, N):
    a = np.abs(np.asarray(k, dtype=float))
    return a * (N - a) / N


def _sinc(x):
    # unnormalized: sin(x)/x
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class HalfwavePower(MultiplierOp):
    """``|grad|_N^s``; ``s = 0`` is the identity, zero mode included."""

    s: float = 1.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError(f"HalfwavePower needs s >= 0, got {self.s}")

    def symbol(self, k, N):
        if self.s == 0:
            return np.ones(np.shape(k))
        return _mu(k, N) ** self.s


@dataclass(frozen=True)
class BesselPower(MultiplierOp):
    """``<|grad|_N>^s = (1 + |grad|_N^2)^{s/2}``."""

    s: float = 1.0

    def symbol(self, k, N):
        return (1.0 + _mu(k, N) ** 2) ** (self.s / 2)


@dataclass(frozen=True)
class Laplacian(MultiplierOp):
    """Three-point Laplacian ``(f_{k+1} + f_{k-1} - 2 f_k) / h^2``."""

    def symbol(self, k, N):
        k = np.asarray(k, dtype=float)
        h = 2 * np.pi / N
        return -(_sinc(h * k / 2) ** 2) * k**2


@dataclass(frozen=True)
class DiffPlus(MultiplierOp):
    """Forward difference ``(f_{k+1} - f_k) / h``."""

    def symbol(self, k, N):
        k = np.asarray(k, dtype=float)
        h = 2 * np.pi / N
        return 1j * k * np.exp(0.5j * k * h) * _sinc(k * h / 2)


@dataclass(frozen=True)
class DiffMinus(MultiplierOp):
    """``(f_{k-1} - f_k) / h``, the adjoint of :class:`DiffPlus`."""

    def symbol(self, k, N):
        return np.conj(DiffPlus().symbol(k, N))


@dataclass(frozen=True)
class Translate(MultiplierOp):
    """Shift by ``j`` nodes: ``(T^j f)_k = f_{k+j}``."""

    j: int = 1

    def symbol(self, k, N):
        k = np.asarray(k, dtype=float)
        return np.exp(1j * k * self.j * 2 * np.pi / N)


def _values(F) -> np.ndarray:
    if isinstance(F, LatticeField):
        return F.values
    v = np.asarray(F)
    return v[:, None] if v.ndim == 1 else v


def multiplier_apply(F, op: MultiplierOp) -> LatticeField:
    """Apply a Fourier multiplier to a lattice field.

    Real input gives real output; every symbol provided here satisfies
    ``m(-k) = conj(m(k))``.
    """
    v = _values(F)
    N = check_odd(v.shape[0])
    m = op.symbol(folded_frequencies(N), N)
    out = idft(m[:, None] * dft(v))
    if not np.iscomplexobj(v):
        out = out.real
    return LatticeField(out)


def halfwave_N(F) -> LatticeField:
    """The lattice half-wave operator applied through its eigenvalues."""
    return multiplier_apply(F, HalfwavePower(1.0))


# ---------------------------------------------------------------------------
# inner products, energy, norms


def inner(F, G):
    """Weighted pairing ``(1/N) sum_k conj(F_k) . G_k``; real for real fields."""
    f, g = _values(F), _values(G)
    if f.shape != g.shape:
        raise ValueError(f"shape mismatch {f.shape} vs {g.shape}")
    val = np.vdot(f, g) / f.shape[0]
    if not (np.iscomplexobj(f) or np.iscomplexobj(g)):
        return float(val.real)
    return complex(val)


def hamiltonian(S) -> float:
    """Pair-difference energy ``(1/N) sum_{k != l} |S_k - S_l|^2 / |z_k - z_l|^2``.

    Evaluated as ``N <S, |grad|_N S>``, which equals the pair sum after
    symmetrization.
    """
    v = _values(S)
    N = v.shape[0]
    return float(N * np.real(inner(v, halfwave_N(v).values)))


def discrete_norm(F, kind: str = "L2") -> float:
    """Lattice norms.

    Parameters
    ----------
    kind : {"L2", "Hhalf", "H52"}
        ``L2``: ``(1/N sum |F_k|^2)^{1/2}``.
        ``Hhalf``: ``(|F|^2 + <|grad|_N F, F>)^{1/2}``.
        ``H52``: ``(|F|^2 + |D_+^2 |grad|_N^{1/2} F|^2)^{1/2}``.
    """
    v = _values(F)
    l2sq = np.real(inner(v, v))
    if kind == "L2":
        return float(np.sqrt(l2sq))
    if kind == "Hhalf":
        return float(np.sqrt(l2sq + np.real(inner(halfwave_N(v).values, v))))
    if kind == "H52":
        N = check_odd(v.shape[0])
        k = folded_frequencies(N)
        m = DiffPlus().symbol(k, N) ** 2 * HalfwavePower(0.5).symbol(k, N)
        w = idft(m[:, None] * dft(v))
        return float(np.sqrt(l2sq + np.real(inner(w, w))))
    raise ValueError(f"unknown norm kind {kind!r}; expected L2, Hhalf or H52")
