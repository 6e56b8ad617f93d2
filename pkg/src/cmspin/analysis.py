"""
Diagnostics for the continuum limit of the lattice flow.

All quantities act on trigonometric interpolants ``S`` in Pol_n
(``N = 2n + 1``). The central objects are

* the aliasing error ``E_N = I_N(S x D_N S) - S x D_N S``,
* its tail coefficients (the coefficients of ``D_N S x S`` beyond ``n``),
* the consistency residual ``R_N`` against the continuum half-wave flow,
* the weak-form gap against test functions,
* convergence tables in ``N`` against a high-resolution reference.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FlowParams, Trajectory, integrate
from .lattice import check_odd
from .spectral import (
    CoeffSequence,
    ConsistencyError,
    DegreeAtMost,
    TailMinus,
    TailPlus,
    TrigPoly,
    abs_grad,
    alias_fold,
    convolve,
    dn_operator,
    dn_symbol,
    fit_loglog_slope,
    interpolate_trig,
    pairing,
    project,
    sobolev_norm,
)

__all__ = [
    "error_term",
    "error_term_tail_form",
    "error_norm",
    "error_norm_weighted",
    "TailCoefficients",
    "tail_coefficients",
    "tail_envelope",
    "ErrorReport",
    "error_norm_sweep",
    "ResidualReport",
    "residual_RN",
    "WeakResidualReport",
    "weak_residual",
    "ConvergenceRow",
    "ConvergenceTable",
    "convergence_study",
    "regular_horizon",
    "fit_gronwall_rate",
    "map_ordered",
]


def _check_pol(S: CoeffSequence, N: int | None) -> tuple[TrigPoly, int]:
    if not isinstance(S, TrigPoly):
        S = S.as_trigpoly()
    N = S.N if N is None else check_odd(N)
    n = N // 2
    if S.degree > n:
        raise ValueError(f"input has degree {S.degree} > n = {n}")
    return S.as_trigpoly(n), N


def map_ordered(fn, items, threads: int = 1):
    """``[fn(x) for x in items]``, optionally on a thread pool; order is kept."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# error term


def error_term(S: CoeffSequence, N: int | None = None, check: bool = True,
               atol: float = 1e-12) -> CoeffSequence:
    """``E_N = I_N(S x D_N S) - S x D_N S`` on ``-2n..2n``.

    Computed by folding the exact product; with ``check`` the result is
    compared against :func:`error_term_tail_form`.
    """
    S, N = _check_pol(S, N)
    n = N // 2
    prod = convolve(S, dn_operator(S, N), "cross")
    E = alias_fold(prod, N).padded(-2 * n, 2 * n) - prod.padded(-2 * n, 2 * n)
    if check:
        other = error_term_tail_form(S, N)
        scale = max(1.0, prod.max_abs())
        gap = (E - other).max_abs()
        if gap > atol * scale:
            raise ConsistencyError(f"error-term routes disagree by {gap:.3e}")
    return E


def error_term_tail_form(S: CoeffSequence, N: int | None = None) -> CoeffSequence:
    """``-((zbar^N - 1) P_{n,+}^perp + (z^N - 1) P_{n,-}^perp)(D_N S x S)``."""
    S, N = _check_pol(S, N)
    n = N // 2
    C = convolve(dn_operator(S, N), S, "cross")
    plus, minus = project(C, TailPlus(n)), project(C, TailMinus(n))
    E = -((plus.shifted(-N) - plus) + (minus.shifted(N) - minus))
    return E.padded(-2 * n, 2 * n)


def error_norm(E: CoeffSequence, eps: float = 0.1) -> float:
    """``||E||_{H^{-1/2-eps}}``."""
    return sobolev_norm(E, -0.5 - eps)


def error_norm_weighted(S: CoeffSequence, N: int | None = None, eps: float = 0.1) -> float:
    """``||E_N||_{H^{-1/2-eps}}`` from the tail coefficients alone.

    ``sum_k (<n+k>^{-1-2eps} + <n+1-k>^{-1-2eps}) (|C_{n+k}|^2 + |C_{-n-k}|^2)``.
    """
    S, N = _check_pol(S, N)
    n = N // 2
    C = convolve(dn_operator(S, N), S, "cross").padded(-2 * n, 2 * n)
    k = np.arange(1, n + 1)
    jb = lambda x: (1.0 + x.astype(float) ** 2) ** (-0.5 - eps)  # noqa: E731
    w = jb(n + k) + jb(n + 1 - k)
    cp = np.sum(np.abs(C.coeffs[2 * n + n + k]) ** 2, axis=1)
    cm = np.sum(np.abs(C.coeffs[2 * n - n - k]) ** 2, axis=1)
    return float(np.sqrt(np.sum(w * (cp + cm))))


# ---------------------------------------------------------------------------
# tail coefficients


@dataclass(frozen=True)
class TailCoefficients:
    """Coefficients ``C_{n+k}``, ``k = 1..n``, of ``D_N S x S`` (rows ``k - 1``)."""

    n: int
    full: np.ndarray
    reduced: np.ndarray
    negative: np.ndarray

    @property
    def form_gap(self) -> float:
        return float(np.max(np.abs(self.full - self.reduced), initial=0.0))

    @property
    def symmetry_gap(self) -> float:
        return float(np.max(np.abs(self.negative - self.full.conj()), initial=0.0))


def tail_coefficients(S: CoeffSequence) -> TailCoefficients:
    """Full and skew-reduced sums for the tail ``C_{n+k}``, ``1 <= k <= n``.

    full:    ``sum_{j=k}^{n} mu_j S_j x S_{n+k-j}``
    reduced: ``sum_{j=ceil((n+k)/2)}^{n} (mu_j - mu_{n+k-j}) S_j x S_{n+k-j}``
    """
    S, N = _check_pol(S, None)
    n = S.n
    if S.dim != 3:
        raise ValueError("tail coefficients need 3-vector fields")
    c = S.coeffs
    mu = dn_symbol(np.arange(0, n + 1), N)
    full = np.zeros((n, 3), dtype=complex)
    red = np.zeros((n, 3), dtype=complex)
    neg = np.zeros((n, 3), dtype=complex)
    for k in range(1, n + 1):
        p = n + k
        j = np.arange(k, n + 1)
        full[k - 1] = np.sum(mu[j, None] * np.cross(c[j + n], c[p - j + n]), axis=0)
        neg[k - 1] = np.sum(mu[j, None] * np.cross(c[-j + n], c[-(p - j) + n]), axis=0)
        j = np.arange(math.ceil(p / 2), n + 1)
        red[k - 1] = np.sum(
            (mu[j] - mu[p - j])[:, None] * np.cross(c[j + n], c[p - j + n]), axis=0
        )
    return TailCoefficients(n=n, full=full, reduced=red, negative=neg)


def tail_envelope(S: CoeffSequence) -> np.ndarray:
    """Cauchy-Schwarz bound on ``|C_{n+k}|``, ``k = 1..n``.

    ``||S||_{Hdot^{1/2}} (sum_{j >= (n+k)/2} (2j - n - k) |S_{n+k-j}|^2)^{1/2}``
    """
    S, _ = _check_pol(S, None)
    n = S.n
    amp2 = np.sum(np.abs(S.coeffs) ** 2, axis=1)
    h = sobolev_norm(S, 0.5, "homogeneous")
    out = np.empty(n)
    for k in range(1, n + 1):
        p = n + k
        j = np.arange(math.ceil(p / 2), n + 1)
        out[k - 1] = h * np.sqrt(np.sum((2 * j - p) * amp2[p - j + n]))
    return out


# ---------------------------------------------------------------------------
# error sweep


@dataclass(frozen=True)
class ErrorReport:
    N: int
    eps: float
    sup_error: float
    times: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    tail_magnitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.concatenate([[self.sup_error], self.errors, self.tail_magnitudes])
        if not (np.all(np.isfinite(vals)) and np.all(vals >= 0)):
            raise ValueError("error report entries must be finite and nonnegative")

    def as_row(self) -> dict:
        return {
            "N": self.N,
            "eps": self.eps,
            "sup_error": self.sup_error,
            "log_N": math.log(self.N),
            "log_error": math.log(self.sup_error) if self.sup_error > 0 else -math.inf,
        }


def error_norm_sweep(data, Ns, T: float = 1.0, eps: float = 0.1, dt: float = 1e-3,
                     record_every: int = 50, threads: int = 1) -> list[ErrorReport]:
    """Sup over recorded times of ``||E_N(S_N(t))||_{H^{-1/2-eps}}`` for each N.

    ``data`` is an initial-data family (anything with ``sample(N)``).
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    Ns = [check_odd(N) for N in Ns]

    def one(N):
        tr = integrate(data.sample(N), FlowParams(dt=dt, t_end=T, record_every=record_every))
        errs, tails = [], None
        for s in tr.states:
            St = interpolate_trig(s)
            errs.append(error_norm_weighted(St, N, eps))
            mags = np.linalg.norm(tail_coefficients(St).full, axis=1)
            tails = mags if tails is None else np.maximum(tails, mags)
        errs = np.asarray(errs)
        return ErrorReport(N=N, eps=eps, sup_error=float(errs.max()), times=tr.times,
                           errors=errs, tail_magnitudes=tails)

    return map_ordered(one, Ns, threads)


# ---------------------------------------------------------------------------
# consistency residual


@dataclass(frozen=True)
class ResidualReport:
    residual: CoeffSequence
    norm: float
    aliasing_part: float
    dispersion_part: float
    flow_gap: float


def residual_RN(S: CoeffSequence, N: int | None = None) -> ResidualReport:
    """``R_N = [I_N(S x DS) - S x DS] - (1/N) I_N(S x D^2 S)`` with ``D = |grad|``.

    ``flow_gap`` is ``max |I_N(S x D_N S) - (S x DS + R_N)|``, which vanishes
    because ``D_N = D - D^2/N`` on Pol_n.
    """
    S, N = _check_pol(S, N)
    n = N // 2
    DS, D2S = abs_grad(S), abs_grad(S, 2.0)
    p1 = convolve(S, DS, "cross")
    p2 = convolve(S, D2S, "cross")
    bracket = alias_fold(p1, N) - p1
    disp = (1.0 / N) * alias_fold(p2, N)
    R = (bracket - disp).padded(-2 * n, 2 * n)
    flow = alias_fold(convolve(S, dn_operator(S, N), "cross"), N)
    gap = (flow - (p1 + R)).max_abs()
    return ResidualReport(
        residual=R,
        norm=sobolev_norm(R, 0.5),
        aliasing_part=sobolev_norm(bracket, 0.5),
        dispersion_part=sobolev_norm(disp, 0.5),
        flow_gap=gap,
    )


# ---------------------------------------------------------------------------
# weak form


@dataclass(frozen=True)
class WeakResidualReport:
    """``gaps[i, t]`` for test function ``i`` at interior snapshot ``t``."""

    N: int
    times: np.ndarray
    gaps: np.ndarray

    def __post_init__(self):
        if np.any(self.gaps < 0):
            raise ValueError("gaps must be nonnegative")

    def sup_per_test(self) -> np.ndarray:
        return self.gaps.max(axis=1)


def weak_residual(traj: Trajectory, testfns) -> WeakResidualReport:
    """``|<phi, dS/dt> - <|grad|^{1/2} S, |grad|^{1/2}(phi x S)>|`` along a trajectory.

    ``dS/dt`` is the second-order central difference of consecutive
    interpolated snapshots, so only interior snapshots are reported.
    """
    if len(traj) < 3:
        raise ValueError("weak residual needs at least 3 snapshots")
    t = np.asarray(traj.times)
    polys = [interpolate_trig(s) for s in traj.states]
    testfns = list(testfns)
    gaps = np.zeros((len(testfns), len(t) - 2))
    for i in range(1, len(t) - 1):
        h0, h1 = t[i] - t[i - 1], t[i + 1] - t[i]
        # nonuniform three-point derivative
        dS = (
            polys[i + 1] * (h0 / (h1 * (h0 + h1)))
            - polys[i - 1] * (h1 / (h0 * (h0 + h1)))
            + polys[i] * ((h1 - h0) / (h0 * h1))
        )
        S = polys[i]
        hS = abs_grad(S, 0.5)
        for a, phi in enumerate(testfns):
            lhs = pairing(phi, dS)
            rhs = pairing(hS, abs_grad(convolve(phi, S, "cross"), 0.5))
            gaps[a, i - 1] = abs(lhs - rhs)
    return WeakResidualReport(N=traj.N, times=t[1:-1], gaps=gaps)


# ---------------------------------------------------------------------------
# convergence in N


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    error: float

    @property
    def log_N(self) -> float:
        return math.log(self.N)

    @property
    def log_error(self) -> float:
        return math.log(self.error) if self.error > 0 else -math.inf


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple
    slope: float | None
    reference: str
    T: float

    def __post_init__(self):
        if len(self.rows) < 2:
            raise ValueError("a convergence table needs at least 2 rows")

    @property
    def exact(self) -> bool:
        """All errors vanish (e.g. stationary data); the slope is undefined."""
        return all(r.error <= 1e-13 for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "error", "log_N", "log_error"])
        for r in self.rows:
            w.writerow([r.N, f"{r.error:.17g}", f"{r.log_N:.17g}", f"{r.log_error:.17g}"])
        w.writerow([])
        w.writerow(["slope", "exact" if self.slope is None else f"{self.slope:.17g}"])
        w.writerow(["reference", self.reference])
        w.writerow(["T", f"{self.T:.17g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"N": r.N, "error": r.error, "log_N": r.log_N, "log_error": r.log_error}
                for r in self.rows
            ],
            "slope": self.slope,
            "exact": self.exact,
            "reference": self.reference,
            "T": self.T,
        }


def regular_horizon(traj: Trajectory, growth: float = 2.0) -> float:
    """Last recorded time before the lattice ``H^{5/2}`` norm exceeds ``growth`` times its start."""
    h = traj.diag("h52")
    bad = np.flatnonzero(h > growth * h[0])
    if bad.size == 0:
        return float(traj.times[-1])
    return float(traj.times[max(bad[0] - 1, 0)])


def convergence_study(data, Ns, T: float | None = 1.0, N_ref: int = 1025, dt: float = 1e-3,
                      n_records: int = 20, threads: int = 1) -> ConvergenceTable:
    """Sup-in-time ``H^{1/2}`` distance between ``S_N`` and a high-N reference.

    The reference runs at ``N_ref`` with step ``dt/2``. Comparison is in
    coefficient space on ``[-n, n]`` (reference truncated). With ``T=None``
    the horizon is where the reference ``H^{5/2}`` norm has doubled, capped
    at 4.
    """
    Ns = sorted(check_odd(N) for N in Ns)
    N_ref = check_odd(N_ref)
    if N_ref <= 2 * max(Ns):
        raise ValueError(f"N_ref={N_ref} must exceed 2 * max(N) = {2 * max(Ns)}")
    if T is None:
        probe = integrate(data.sample(N_ref), FlowParams(dt=dt / 2, t_end=4.0, record_every=200))
        T = regular_horizon(probe)
    steps = max(1, int(round(T / dt)))
    record = max(1, steps // n_records)
    if steps % record:
        record = 1
    ref = integrate(data.sample(N_ref), FlowParams(dt=T / (2 * steps), t_end=T, record_every=2 * record))
    ref_polys = [interpolate_trig(s) for s in ref.states]

    def one(N):
        n = N // 2
        tr = integrate(data.sample(N), FlowParams(dt=T / steps, t_end=T, record_every=record))
        if not np.allclose(tr.times, ref.times, rtol=0, atol=1e-12):
            raise RuntimeError("recorded time grids of run and reference differ")
        errs = [
            sobolev_norm(interpolate_trig(s) - r.restricted(-n, n), 0.5)
            for s, r in zip(tr.states, ref_polys)
        ]
        return ConvergenceRow(N=N, error=float(max(errs)))

    rows = tuple(map_ordered(one, Ns, threads))
    if all(r.error <= 1e-13 for r in rows):
        slope = None
    else:
        slope = fit_loglog_slope([r.N for r in rows], [r.error for r in rows])
    return ConvergenceTable(
        rows=rows,
        slope=slope,
        reference=f"HighN(N_ref={N_ref}, dt={T / (2 * steps):.3g})",
        T=float(T),
    )


# ---------------------------------------------------------------------------
# Gronwall envelope


def fit_gronwall_rate(times, norms) -> float:
    """Smallest ``Gamma >= 0`` with ``norm(t) <= norm(0) / (1 - Gamma t norm(0))`` on the record."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    y0 = y[0]
    m = (t > 0) & (y > y0)
    if not np.any(m):
        return 0.0
    return float(np.max((1.0 - y0 / y[m]) / (t[m] * y0)))
