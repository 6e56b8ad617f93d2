"""
Trigonometric polynomials on the circle and their relation to lattice fields.

Coefficients are stored densely over a contiguous index band. A
:class:`CoeffSequence` covers ``kmin..kmax``; a :class:`TrigPoly` is the
symmetric band ``-n..n`` tied to the lattice ``N = 2n + 1``. Values are
vector valued, ``coeffs`` has shape ``(bandwidth, d)``.

The L^2 pairing on the circle is normalized so that ``z^k`` has unit norm,
hence ``||u||^2 = sum_k |u_k|^2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import zeta

from .lattice import (
    LatticeField,
    check_odd,
    dft,
    folded_frequencies,
    idft,
)

__all__ = [
    "CoeffSequence",
    "TrigPoly",
    "DegreeAtMost",
    "Complement",
    "NonnegFreq",
    "NegFreq",
    "TailPlus",
    "TailMinus",
    "ConsistencyError",
    "interpolate_trig",
    "sample",
    "alias_fold",
    "project",
    "convolve",
    "product_formula",
    "tilde_product",
    "sobolev_norm",
    "pairing",
    "dn_symbol",
    "dn_operator",
    "abs_grad",
    "kpv_commutator",
    "piecewise_constant_coefficients",
    "piecewise_constant_distance",
    "InterpErrorRow",
    "InterpErrorReport",
    "interp_error_report",
    "fit_loglog_slope",
    "coeffs_to_csv",
    "coeffs_from_csv",
]

REAL_TOL = 1e-12


class ConsistencyError(AssertionError):
    """Two independent evaluation routes of the same quantity disagree."""


class CoeffSequence:
    """Finitely supported Fourier coefficients ``k -> c_k`` on ``kmin..kmax``."""

    __slots__ = ("coeffs", "kmin")

    def __init__(self, coeffs, kmin: int):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] == 0:
            raise ValueError(f"coeffs must have shape (M, d) with M > 0, got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        self.coeffs = c
        self.kmin = int(kmin)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, mapping: dict, dim: int = 3) -> "CoeffSequence":
        if not mapping:
            return cls(np.zeros((1, dim)), 0)
        ks = sorted(int(k) for k in mapping)
        c = np.zeros((ks[-1] - ks[0] + 1, dim), dtype=complex)
        for k, v in mapping.items():
            c[int(k) - ks[0]] = v
        return cls(c, ks[0])

    @classmethod
    def zeros(cls, kmin: int, kmax: int, dim: int = 3) -> "CoeffSequence":
        return cls(np.zeros((kmax - kmin + 1, dim), dtype=complex), kmin)

    def to_dict(self, drop_zeros: bool = True) -> dict:
        out = {}
        for k, v in zip(self.indices, self.coeffs):
            if drop_zeros and not np.any(v):
                continue
            out[int(k)] = v.copy()
        return out

    # -- shape -------------------------------------------------------------
    @property
    def kmax(self) -> int:
        return self.kmin + self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.kmin, self.kmax + 1)

    @property
    def degree(self) -> int:
        """Largest ``|k|`` carrying a nonzero coefficient (0 if none)."""
        nz = np.flatnonzero(np.any(self.coeffs != 0, axis=1))
        if nz.size == 0:
            return 0
        return int(np.max(np.abs(self.indices[nz])))

    @property
    def real_flag(self) -> bool:
        """``c_{-k} == conj(c_k)`` for every ``k`` (relative 1e-12)."""
        K = max(abs(self.kmin), abs(self.kmax))
        c = self.padded(-K, K).coeffs
        scale = max(1.0, float(np.max(np.abs(c))))
        return bool(np.max(np.abs(c - c[::-1].conj())) <= REAL_TOL * scale)

    def coeff(self, k: int) -> np.ndarray:
        if self.kmin <= k <= self.kmax:
            return self.coeffs[k - self.kmin].copy()
        return np.zeros(self.dim, dtype=complex)

    def padded(self, kmin: int, kmax: int) -> "CoeffSequence":
        """Same sequence on a (larger or smaller) band; dropped entries must be 0."""
        out = np.zeros((kmax - kmin + 1, self.dim), dtype=complex)
        lo, hi = max(kmin, self.kmin), min(kmax, self.kmax)
        if lo <= hi:
            out[lo - kmin : hi - kmin + 1] = self.coeffs[lo - self.kmin : hi - self.kmin + 1]
        return CoeffSequence(out, kmin)

    def restricted(self, kmin: int, kmax: int) -> "CoeffSequence":
        """Truncate or pad to ``kmin..kmax`` (entries outside are dropped)."""
        return self.padded(kmin, kmax)

    def shifted(self, m: int) -> "CoeffSequence":
        """Multiply by ``z^m``."""
        return CoeffSequence(self.coeffs, self.kmin + m)

    def as_trigpoly(self, n: int | None = None) -> "TrigPoly":
        if n is None:
            n = max(abs(self.kmin), abs(self.kmax))
        if self.degree > n:
            raise ValueError(f"sequence has degree {self.degree} > {n}")
        return TrigPoly(self.padded(-n, n).coeffs)

    def evaluate(self, theta) -> np.ndarray:
        """Pointwise values ``sum_k c_k e^{ik theta}``; shape ``(len(theta), d)``."""
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        E = np.exp(1j * np.outer(th, self.indices))
        return E @ self.coeffs

    def map_coeffs(self, fn) -> "CoeffSequence":
        """Apply ``fn(k, coeffs)`` returning new coefficients on the same band."""
        return type(self)._rebuild(self, fn(self.indices, self.coeffs))

    @staticmethod
    def _rebuild(template, coeffs):
        if isinstance(template, TrigPoly):
            return TrigPoly(coeffs)
        return CoeffSequence(coeffs, template.kmin)

    # -- arithmetic ----------------------------------------------------------
    def _aligned(self, other):
        lo, hi = min(self.kmin, other.kmin), max(self.kmax, other.kmax)
        return self.padded(lo, hi), other.padded(lo, hi), lo

    def __add__(self, other):
        if not isinstance(other, CoeffSequence):
            return NotImplemented
        a, b, lo = self._aligned(other)
        return CoeffSequence(a.coeffs + b.coeffs, lo)

    def __sub__(self, other):
        if not isinstance(other, CoeffSequence):
            return NotImplemented
        a, b, lo = self._aligned(other)
        return CoeffSequence(a.coeffs - b.coeffs, lo)

    def __neg__(self):
        return type(self)._rebuild(self, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, CoeffSequence):
            return NotImplemented
        return type(self)._rebuild(self, self.coeffs * scalar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def allclose(self, other, atol=1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def __repr__(self):
        return f"CoeffSequence(kmin={self.kmin}, kmax={self.kmax}, dim={self.dim})"


class TrigPoly(CoeffSequence):
    """Trigonometric polynomial of degree at most ``n``, coefficients ``-n..n``."""

    __slots__ = ()

    def __init__(self, coeffs):
        c = np.asarray(coeffs)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] % 2 != 1:
            raise ValueError("a TrigPoly needs an odd number of coefficients")
        super().__init__(c, -(c.shape[0] // 2))

    @property
    def n(self) -> int:
        return -self.kmin

    @property
    def N(self) -> int:
        return 2 * self.n + 1

    @classmethod
    def monomial(cls, k: int, vector=(1.0, 0.0, 0.0), n: int | None = None) -> "TrigPoly":
        n = abs(k) if n is None else n
        vec = np.atleast_1d(np.asarray(vector, dtype=complex))
        c = np.zeros((2 * n + 1, vec.size), dtype=complex)
        c[k + n] = vec
        return cls(c)

    @classmethod
    def constant(cls, vector, n: int = 0) -> "TrigPoly":
        return cls.monomial(0, vector, n)

    def __repr__(self):
        return f"TrigPoly(n={self.n}, dim={self.dim})"


# ---------------------------------------------------------------------------
# projections


@dataclass(frozen=True)
class DegreeAtMost:
    m: int

    def mask(self, k):
        return np.abs(k) <= self.m


@dataclass(frozen=True)
class Complement:
    m: int

    def mask(self, k):
        return np.abs(k) > self.m


@dataclass(frozen=True)
class NonnegFreq:
    def mask(self, k):
        return k >= 0


@dataclass(frozen=True)
class NegFreq:
    def mask(self, k):
        return k < 0


@dataclass(frozen=True)
class TailPlus:
    m: int

    def mask(self, k):
        return k > self.m


@dataclass(frozen=True)
class TailMinus:
    m: int

    def mask(self, k):
        return k < -self.m


def project(P: CoeffSequence, region) -> CoeffSequence:
    """Zero every coefficient outside ``region``; the band is kept."""
    keep = region.mask(P.indices)
    return P.map_coeffs(lambda k, c: np.where(keep[:, None], c, 0))


# ---------------------------------------------------------------------------
# interpolation and aliasing


def _field_values(F) -> np.ndarray:
    if isinstance(F, LatticeField):
        return F.values
    v = np.asarray(F)
    return v[:, None] if v.ndim == 1 else v


def interpolate_trig(F) -> TrigPoly:
    """Degree-n trigonometric interpolant of a lattice field on ``N = 2n + 1`` nodes."""
    v = _field_values(F)
    N = check_odd(v.shape[0])
    c = dft(v) / N
    # dft slots are ordered 0..n, -n..-1
    return TrigPoly(np.fft.fftshift(c, axes=0))


def sample(P: CoeffSequence, N: int | None = None) -> LatticeField:
    """Evaluate at the N-th roots of unity; ``N >= 2 deg + 1`` (no aliasing).

    Real-symmetric coefficients give a real field.
    """
    if not isinstance(P, TrigPoly):
        P = P.as_trigpoly()
    N = P.N if N is None else check_odd(N)
    if N < P.N:
        raise ValueError(f"sampling degree-{P.n} polynomial on N={N} < {P.N} nodes aliases")
    slots = np.zeros((N, P.dim), dtype=complex)
    k = P.indices
    slots[k % N] = P.coeffs
    vals = idft(slots) * N
    if P.real_flag:
        vals = vals.real
    return LatticeField(vals)


def alias_fold(C: CoeffSequence, N: int) -> TrigPoly:
    """Fold coefficients modulo N into ``[-n, n]``: ``c_k = sum_j u_{k + jN}``."""
    N = check_odd(N)
    n = N // 2
    out = np.zeros((N, C.dim), dtype=complex)
    idx = (C.indices + n) % N
    np.add.at(out, idx, C.coeffs)
    return TrigPoly(out)


# ---------------------------------------------------------------------------
# products


def _conv1(a, b):
    return np.convolve(a, b)


def convolve(A: CoeffSequence, B: CoeffSequence, mode: str = "scalar") -> CoeffSequence:
    """Coefficients of the pointwise product of two sequences.

    ``mode`` is ``scalar`` (componentwise, a scalar factor broadcasts),
    ``dot`` (scalar result) or ``cross`` (3-vectors).
    """
    a, b = A.coeffs, B.coeffs
    kmin = A.kmin + B.kmin
    if mode == "scalar":
        if a.shape[1] == 1 and b.shape[1] > 1:
            a = np.repeat(a, b.shape[1], axis=1)
        if b.shape[1] == 1 and a.shape[1] > 1:
            b = np.repeat(b, a.shape[1], axis=1)
        if a.shape[1] != b.shape[1]:
            raise ValueError("component mismatch for scalar product")
        c = np.stack([_conv1(a[:, i], b[:, i]) for i in range(a.shape[1])], axis=1)
    elif mode == "dot":
        if a.shape[1] != b.shape[1]:
            raise ValueError("component mismatch for dot product")
        c = sum(_conv1(a[:, i], b[:, i]) for i in range(a.shape[1]))[:, None]
    elif mode == "cross":
        if a.shape[1] != 3 or b.shape[1] != 3:
            raise ValueError("cross product needs 3 components")
        c = np.stack(
            [
                _conv1(a[:, 1], b[:, 2]) - _conv1(a[:, 2], b[:, 1]),
                _conv1(a[:, 2], b[:, 0]) - _conv1(a[:, 0], b[:, 2]),
                _conv1(a[:, 0], b[:, 1]) - _conv1(a[:, 1], b[:, 0]),
            ],
            axis=1,
        )
    else:
        raise ValueError(f"unknown product mode {mode!r}")
    return CoeffSequence(c, kmin)


def _pointwise(f: np.ndarray, g: np.ndarray, mode: str) -> np.ndarray:
    if mode == "scalar":
        return f * g
    if mode == "dot":
        return np.sum(f * g, axis=1, keepdims=True)
    if mode == "cross":
        return np.cross(f, g)
    raise ValueError(f"unknown product mode {mode!r}")


def product_formula(ft: TrigPoly, gt: TrigPoly, mode: str = "scalar") -> TrigPoly:
    """``[P_n + zbar^N P_{n,+}^perp + z^N P_{n,-}^perp](ft gt)`` for ``ft, gt`` in Pol_n."""
    if ft.n != gt.n:
        raise ValueError("both factors must have the same degree bound")
    n, N = ft.n, ft.N
    prod = convolve(ft, gt, mode)
    folded = (
        project(prod, DegreeAtMost(n))
        + project(prod, TailPlus(n)).shifted(-N)
        + project(prod, TailMinus(n)).shifted(N)
    )
    return folded.as_trigpoly(n)


def tilde_product(f, g, mode: str = "scalar", atol: float = 1e-10) -> TrigPoly:
    """Interpolant of the pointwise product ``f (mode) g``.

    The result is cross-checked against :func:`product_formula`; a mismatch
    larger than ``atol`` (relative to the coefficient scale) raises
    :class:`ConsistencyError`.
    """
    fv, gv = _field_values(f), _field_values(g)
    if fv.shape[0] != gv.shape[0]:
        raise ValueError("fields live on different lattices")
    direct = interpolate_trig(_pointwise(fv, gv, mode))
    via = product_formula(interpolate_trig(fv), interpolate_trig(gv), mode)
    scale = max(1.0, direct.max_abs())
    gap = (direct - via).max_abs()
    if gap > atol * scale:
        raise ConsistencyError(f"product formula mismatch {gap:.3e}")
    return direct


# ---------------------------------------------------------------------------
# Sobolev calculus


def sobolev_norm(P: CoeffSequence, s: float, kind: str = "inhomogeneous") -> float:
    """``(sum_k w_k^{2s} |c_k|^2)^{1/2}`` with ``w = |k|`` or ``<k> = (1 + k^2)^{1/2}``."""
    k = P.indices.astype(float)
    if kind == "homogeneous":
        if s < 0:
            raise ValueError("homogeneous norm needs s >= 0")
        w = np.abs(k) ** (2 * s) if s > 0 else np.ones_like(k)
    elif kind == "inhomogeneous":
        w = (1.0 + k**2) ** s
    else:
        raise ValueError(f"unknown Sobolev kind {kind!r}")
    return float(np.sqrt(np.sum(w * np.sum(np.abs(P.coeffs) ** 2, axis=1))))


def pairing(A: CoeffSequence, B: CoeffSequence) -> complex:
    """L^2 pairing ``sum_k conj(a_k) . b_k``."""
    a, b, _ = A._aligned(B)
    return complex(np.vdot(a.coeffs, b.coeffs))


def dn_symbol(k, N: int, power: float = 1.0, extended: bool = False) -> np.ndarray:
    """Symbol of ``D_N^power``: ``mu_{|k|}`` on ``|k| <= n``; ``|k|/2`` beyond when extended."""
    N = check_odd(N)
    n = N // 2
    a = np.abs(np.asarray(k, dtype=float))
    inside = a <= n
    if not extended and not np.all(inside):
        raise ValueError(f"frequencies beyond n={n} need extended=True")
    mu = np.where(inside, a * (N - a) / N, a / 2)
    if power == 0:
        return np.ones_like(mu)
    return mu**power


def dn_operator(P: CoeffSequence, N: int | None = None, power: float = 1.0,
                extended: bool = False) -> CoeffSequence:
    """Apply ``D_N^power``, the operator conjugate to the lattice half-wave operator."""
    if N is None:
        if not isinstance(P, TrigPoly):
            raise ValueError("N is required for a general coefficient sequence")
        N = P.N
    m = dn_symbol(P.indices, N, power, extended)
    return P.map_coeffs(lambda k, c: m[:, None] * c)


def abs_grad(P: CoeffSequence, power: float = 1.0) -> CoeffSequence:
    """Continuum ``|grad|^power`` (symbol ``|k|^power``)."""
    a = np.abs(P.indices.astype(float))
    m = a**power if power != 0 else np.ones_like(a)
    return P.map_coeffs(lambda k, c: m[:, None] * c)


def kpv_commutator(S: CoeffSequence, U: CoeffSequence) -> CoeffSequence:
    """``|grad|^{1/2}(S x U) - (|grad|^{1/2} S) x U - S x |grad|^{1/2} U``.

    Accumulated mode by mode with weight
    ``|j+k|^{1/2} - |j|^{1/2} - |k|^{1/2}`` on ``s_j x u_k``.
    """
    if S.dim != 3 or U.dim != 3:
        raise ValueError("commutator needs 3-vector fields")
    ku = U.indices
    out = np.zeros((S.coeffs.shape[0] + U.coeffs.shape[0] - 1, 3), dtype=complex)
    sq_u = np.sqrt(np.abs(ku))
    for r, (j, sj) in enumerate(zip(S.indices, S.coeffs)):
        if not np.any(sj):
            continue
        w = np.sqrt(np.abs(j + ku)) - np.sqrt(abs(j)) - sq_u
        out[r : r + ku.size] += w[:, None] * np.cross(sj[None, :], U.coeffs)
    return CoeffSequence(out, S.kmin + U.kmin)


# ---------------------------------------------------------------------------
# piecewise-constant comparison


def _sinc(x):
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def piecewise_constant_coefficients(S, kmin: int, kmax: int) -> CoeffSequence:
    """Fourier coefficients of the step-function extension on ``kmin..kmax``.

    The step on node ``j`` covers angles ``[theta_j - pi/N, theta_j + pi/N)``;
    its ``k``-th coefficient is ``sinc(k pi / N)`` times the interpolant's
    coefficient at ``k`` folded into ``[-n, n]``.
    """
    St = interpolate_trig(S)
    n, N = St.n, St.N
    k = np.arange(kmin, kmax + 1)
    folded = (k + n) % N
    c = _sinc(k * np.pi / N)[:, None] * St.coeffs[folded]
    return CoeffSequence(c, kmin)


def piecewise_constant_distance(S) -> float:
    """L^2 distance between the trigonometric and step-function extensions.

    Closed form ``2 sum_{|k| <= n} |c_k|^2 (1 - sinc(k pi / N))``.
    """
    St = interpolate_trig(S)
    w = 1.0 - _sinc(St.indices * np.pi / St.N)
    d2 = 2.0 * np.sum(w * np.sum(np.abs(St.coeffs) ** 2, axis=1))
    return float(np.sqrt(max(d2, 0.0)))


# ---------------------------------------------------------------------------
# interpolation error study


def fit_loglog_slope(Ns: Iterable[float], values: Iterable[float]) -> float:
    """Least-squares decay order ``p`` in ``value ~ C N^{-p}``."""
    x = np.log(np.asarray(list(Ns), dtype=float))
    y = np.log(np.asarray(list(values), dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points to fit a slope")
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class InterpErrorRow:
    N: int
    interp_norm: float
    error: float


@dataclass(frozen=True)
class InterpErrorReport:
    s: float
    eps: float
    f_norm: float
    rows: tuple
    order: float
    expected_order: float
    bound: float

    @property
    def bounded(self) -> bool:
        return all(r.interp_norm <= self.bound * self.f_norm for r in self.rows)

    @property
    def order_ok(self) -> bool:
        if all(r.error == 0 for r in self.rows):
            return True
        return self.order >= self.expected_order - 0.2


def interp_error_report(C: CoeffSequence, Ns, s: float = 0.0, eps: float = 0.1) -> InterpErrorReport:
    """Per-N size of ``I_N f`` in ``H^{1/2+eps}`` and the error ``||f - I_N f||_{H^s}``.

    ``bound`` is the explicit constant ``(1 + 2 zeta(1 + 2 eps))^{1/2}`` for
    ``||I_N f|| / ||f||`` in ``H^{1/2+eps}``.
    """
    if not 0 <= s < 0.5 + eps:
        raise ValueError(f"need 0 <= s < 1/2 + eps, got s={s}, eps={eps}")
    Ns = [check_odd(N) for N in Ns]
    rows = []
    for N in Ns:
        I = alias_fold(C, N)
        rows.append(
            InterpErrorRow(
                N=N,
                interp_norm=sobolev_norm(I, 0.5 + eps),
                error=sobolev_norm(C - I, s),
            )
        )
    errs = [r.error for r in rows]
    if len(rows) >= 2 and all(e > 0 for e in errs):
        order = fit_loglog_slope(Ns, errs)
    else:
        order = math.inf
    return InterpErrorReport(
        s=s,
        eps=eps,
        f_norm=sobolev_norm(C, 0.5 + eps),
        rows=tuple(rows),
        order=order,
        expected_order=1.0 + eps - s,
        bound=float(np.sqrt(1.0 + 2.0 * zeta(1.0 + 2.0 * eps))),
    )


# ---------------------------------------------------------------------------
# CSV dump


def coeffs_to_csv(P: CoeffSequence) -> str:
    """Rows ``component,k,re,im`` with 17 significant digits (exact round trip)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "k", "re", "im"])
    for comp in range(P.dim):
        for k, c in zip(P.indices, P.coeffs[:, comp]):
            w.writerow([comp, int(k), f"{c.real:.17g}", f"{c.imag:.17g}"])
    return buf.getvalue()


def coeffs_from_csv(text: str) -> CoeffSequence:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty coefficient table")
    ks = [int(r["k"]) for r in rows]
    dims = 1 + max(int(r["component"]) for r in rows)
    kmin, kmax = min(ks), max(ks)
    c = np.zeros((kmax - kmin + 1, dims), dtype=complex)
    for r in rows:
        c[int(r["k"]) - kmin, int(r["component"])] = complex(float(r["re"]), float(r["im"]))
    return CoeffSequence(c, kmin)
