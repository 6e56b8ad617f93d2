"""
Time integration of the lattice spin flow

    dS/dt = S x |grad|_N S + eps * Lap_N S

with fixed-step classical RK4. For ``eps = 0`` the flow keeps every spin on
the unit sphere and conserves the pair energy and the total spin; the
``rk4-projected`` method renormalizes each node after every full step.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .lattice import (
    DiffPlus,
    HalfwavePower,
    Laplacian,
    LatticeField,
    SpinConfiguration,
    Translate,
    check_odd,
    dft,
    discrete_norm,
    folded_frequencies,
    hamiltonian,
    idft,
    inner,
)

__all__ = [
    "NonFiniteState",
    "ProjectionWithViscosity",
    "StabilityError",
    "FlowParams",
    "Trajectory",
    "stability_cap",
    "rhs_spin",
    "integrate",
    "diagnostics",
    "ViscousIdentity",
    "viscous_identity_check",
    "TRAJECTORY_SCHEMA_VERSION",
]

TRAJECTORY_SCHEMA_VERSION = "1"
METHODS = ("rk4", "rk4-projected")


class NonFiniteState(FloatingPointError):
    """The integrated state contains NaN or inf."""


class ProjectionWithViscosity(ValueError):
    """Sphere projection requested for the viscous flow, which leaves the sphere."""


class StabilityError(ValueError):
    """Time step above the documented stability cap."""


def stability_cap(N: int, epsilon: float = 0.0) -> float:
    """``1 / (4 mu_max max(1, eps N))`` with ``mu_max = n (n + 1) / N``."""
    N = check_odd(N)
    n = N // 2
    mu_max = n * (n + 1) / N
    return 1.0 / (4.0 * mu_max * max(1.0, epsilon * N))


@dataclass(frozen=True)
class FlowParams:
    epsilon: float = 0.0
    dt: float = 1e-3
    t_end: float = 1.0
    method: str = "rk4"
    record_every: int = 1
    allow_unstable: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if self.method == "rk4-projected" and self.epsilon > 0:
            raise ProjectionWithViscosity(
                "rk4-projected requires epsilon = 0; the viscous flow does not stay on the sphere"
            )

    @property
    def n_steps(self) -> int:
        # t_end is hit exactly; dt is the upper bound on the step
        return int(math.ceil(self.t_end / self.dt - 1e-9)) if self.t_end > 0 else 0

    @property
    def step(self) -> float:
        return self.t_end / self.n_steps if self.n_steps else self.dt

    def validate_for(self, N: int) -> None:
        cap = stability_cap(N, self.epsilon)
        if self.step > cap and not self.allow_unstable:
            raise StabilityError(
                f"dt={self.step:.3e} exceeds the stability cap {cap:.3e} for N={N}, "
                f"eps={self.epsilon}; reduce dt or set allow_unstable"
            )


DIAG_KEYS = ("hamiltonian", "l2", "hhalf", "h52", "sphere_dev", "spin_x", "spin_y", "spin_z")


def diagnostics(S) -> dict:
    """Conserved and monitored quantities of one state."""
    v = np.asarray(S.values if isinstance(S, LatticeField) else S, dtype=float)
    total = v.sum(axis=0)
    return {
        "hamiltonian": hamiltonian(v),
        "l2": discrete_norm(v, "L2"),
        "hhalf": discrete_norm(v, "Hhalf"),
        "h52": discrete_norm(v, "H52"),
        "sphere_dev": float(np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0))),
        "spin_x": float(total[0]),
        "spin_y": float(total[1]),
        "spin_z": float(total[2]),
    }


@dataclass(eq=False)
class Trajectory:
    """Recorded states ``(n_snap, N, 3)`` with per-snapshot diagnostics."""

    params: FlowParams
    times: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def N(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> LatticeField:
        return LatticeField(self.states[i])

    def diag(self, key: str) -> np.ndarray:
        return np.asarray(self.diagnostics[key])

    def total_spin(self) -> np.ndarray:
        return np.stack([self.diag("spin_x"), self.diag("spin_y"), self.diag("spin_z")], axis=1)

    # -- export --------------------------------------------------------------
    def to_csv(self) -> str:
        """Rows ``t,k,Sx,Sy,Sz`` (17 significant digits)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "k", "Sx", "Sy", "Sz"])
        for t, S in zip(self.times, self.states):
            for k, s in enumerate(S):
                w.writerow([f"{t:.17g}", k] + [f"{x:.17g}" for x in s])
        return buf.getvalue()

    def diagnostics_json(self) -> dict:
        return {
            "schema": "cmspin.trajectory.diagnostics",
            "schema_version": TRAJECTORY_SCHEMA_VERSION,
            "N": self.N,
            "params": asdict(self.params),
            "times": [float(t) for t in self.times],
            "diagnostics": {k: [float(x) for x in v] for k, v in self.diagnostics.items()},
        }

    def save(self, stem) -> tuple[str, str]:
        """Write ``<stem>.csv`` and ``<stem>.diagnostics.json``."""
        stem = str(stem)
        with open(stem + ".csv", "w") as fh:
            fh.write(self.to_csv())
        with open(stem + ".diagnostics.json", "w") as fh:
            json.dump(self.diagnostics_json(), fh, indent=1, sort_keys=True)
        return stem + ".csv", stem + ".diagnostics.json"


# ---------------------------------------------------------------------------
# right-hand side


class _Symbols:
    """Cached multiplier symbols for one lattice size."""

    def __init__(self, N: int):
        k = folded_frequencies(N)
        self.mu = HalfwavePower(1.0).symbol(k, N)[:, None]
        self.lap = Laplacian().symbol(k, N)[:, None]


def _rhs(v: np.ndarray, epsilon: float, sym: _Symbols) -> np.ndarray:
    vh = dft(v)
    Lv = idft(sym.mu * vh).real
    out = np.cross(v, Lv)
    if epsilon:
        out += epsilon * idft(sym.lap * vh).real
    return out


def rhs_spin(S, epsilon: float = 0.0) -> LatticeField:
    """``S x |grad|_N S + eps Lap_N S`` (cross product taken nodewise)."""
    v = np.asarray(S.values if isinstance(S, LatticeField) else S, dtype=float)
    return LatticeField(_rhs(v, epsilon, _Symbols(check_odd(v.shape[0]))))


def integrate(S0, params: FlowParams) -> Trajectory:
    """Fixed-step RK4 integration of the (possibly viscous) spin flow.

    Snapshots are taken at ``t = 0``, every ``record_every`` steps, and at
    ``t_end``.

    Raises
    ------
    NonFiniteState
        If any value becomes NaN or inf.
    StabilityError
        If the step exceeds :func:`stability_cap` and ``allow_unstable`` is off.
    """
    v = np.array(S0.values if isinstance(S0, LatticeField) else S0, dtype=float)
    N = check_odd(v.shape[0])
    if params.method == "rk4-projected" and params.epsilon > 0:
        raise ProjectionWithViscosity("rk4-projected requires epsilon = 0")
    params.validate_for(N)
    sym = _Symbols(N)
    eps = params.epsilon
    dt = params.step
    nsteps = params.n_steps
    project = params.method == "rk4-projected"

    times, states = [0.0], [v.copy()]
    for i in range(1, nsteps + 1):
        k1 = _rhs(v, eps, sym)
        k2 = _rhs(v + 0.5 * dt * k1, eps, sym)
        k3 = _rhs(v + 0.5 * dt * k2, eps, sym)
        k4 = _rhs(v + dt * k3, eps, sym)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if project:
            v /= np.linalg.norm(v, axis=1, keepdims=True)
        if not np.all(np.isfinite(v)):
            raise NonFiniteState(f"non-finite state at step {i} (t={i * dt:.6g})")
        if i % params.record_every == 0 or i == nsteps:
            times.append(i * dt if i < nsteps else params.t_end)
            states.append(v.copy())

    states = np.asarray(states)
    diags = {k: [] for k in DIAG_KEYS}
    for s in states:
        for k, val in diagnostics(s).items():
            diags[k].append(val)
    return Trajectory(
        params=params,
        times=np.asarray(times),
        states=states,
        diagnostics={k: np.asarray(x) for k, x in diags.items()},
    )


# ---------------------------------------------------------------------------
# the viscous energy identity


@dataclass(frozen=True)
class ViscousIdentity:
    """Terms of the top-order energy identity for the viscous flow.

    ``lhs``: ``1/2 d/dt <D^2 L S, D^2 S> + eps <D^3 L S, D^3 S>`` with the
    time derivative expanded bilinearly and ``dS/dt`` substituted.
    ``rhs``: ``<D^2 L S, D^2 (S x L S)>``.
    ``leibniz``: the same pairing from the ``k = 0, 1`` discrete Leibniz terms.
    ``leibniz_halfwave``: those terms with ``L^{1/2}`` moved onto each side.
    ``top_term``: the ``k = 2`` Leibniz term, zero by orthogonality.
    """

    lhs: float
    rhs: float
    leibniz: float
    leibniz_halfwave: float
    top_term: float
    scale: float

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.scale

    @property
    def leibniz_gap(self) -> float:
        return max(abs(self.leibniz - self.rhs), abs(self.leibniz_halfwave - self.rhs)) / self.scale


def _apply(v, m):
    return idft(m[:, None] * dft(v)).real


def viscous_identity_check(S, epsilon: float) -> ViscousIdentity:
    """Evaluate both sides of the top-order energy identity at one state."""
    v = np.asarray(S.values if isinstance(S, LatticeField) else S, dtype=float)
    N = check_odd(v.shape[0])
    k = folded_frequencies(N)
    mu = HalfwavePower(1.0).symbol(k, N)
    sq = HalfwavePower(0.5).symbol(k, N)
    dp = DiffPlus().symbol(k, N)
    tr = Translate(1).symbol(k, N)

    def D(u, m=1):
        return _apply(u, dp**m)

    L = lambda u: _apply(u, mu)  # noqa: E731
    T = lambda u, j=1: _apply(u, tr**j)  # noqa: E731

    vdot = rhs_spin(v, epsilon).values
    LS = L(v)
    lhs = 0.5 * (inner(D(L(vdot), 2), D(v, 2)) + inner(D(LS, 2), D(vdot, 2)))
    lhs += epsilon * inner(D(LS, 3), D(v, 3))

    rhs = inner(D(LS, 2), D(np.cross(v, LS), 2))

    # D^2(f x g) = sum_k C(2,k) D^k f x D^{2-k} T^k g with f = L S, g = S;
    # S x LS = -(LS x S)
    D2LS = D(LS, 2)
    terms = [math.comb(2, j) * np.cross(D(LS, j), D(T(v, j), 2 - j)) for j in range(3)]
    leibniz = -sum(inner(D2LS, t) for t in terms[:2])
    half = lambda u: _apply(u, sq)  # noqa: E731
    leibniz_half = -sum(inner(half(D(v, 2)), half(t)) for t in terms[:2])
    top = -inner(D2LS, terms[2])

    scale = max(
        abs(rhs),
        abs(inner(D2LS, D2LS)) * max(1.0, float(np.max(np.abs(v)))),
        1e-300,
    )
    return ViscousIdentity(
        lhs=float(lhs),
        rhs=float(rhs),
        leibniz=float(leibniz),
        leibniz_halfwave=float(leibniz_half),
        top_term=float(top),
        scale=float(scale),
    )
