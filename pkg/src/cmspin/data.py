"""Initial-data families: continuum maps into the sphere, sampled at lattice nodes."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .lattice import LatticeGeometry, SpinConfiguration

__all__ = [
    "GreatCircle",
    "Tilted",
    "RandomBandLimited",
    "Algebraic",
    "family_from_dict",
    "FAMILIES",
]


def _trig(theta, cos_coeffs, sin_coeffs):
    # cos_coeffs[0] is the constant term, sin_coeffs[0] multiplies sin(theta)
    th = np.asarray(theta, dtype=float)
    out = np.zeros_like(th)
    for m, a in enumerate(cos_coeffs):
        out = out + a * np.cos(m * th)
    for m, b in enumerate(sin_coeffs, start=1):
        out = out + b * np.sin(m * th)
    return out


class _Family:
    name = ""

    def __call__(self, theta) -> np.ndarray:
        raise NotImplementedError

    def sample(self, N: int) -> SpinConfiguration:
        """Nodewise evaluation ``S_N(z_k) = S_0(z_k)``."""
        g = LatticeGeometry(N)
        return SpinConfiguration.normalized(self(g.nodes))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return {"family": self.name, **d}


@dataclass(frozen=True)
class GreatCircle(_Family):
    """``(cos m theta, sin m theta, 0)``; stationary for the lattice flow when ``m <= n``."""

    m: int = 1
    name = "great_circle"

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.stack([np.cos(self.m * th), np.sin(self.m * th), np.zeros_like(th)], axis=-1)


@dataclass(frozen=True)
class Tilted(_Family):
    """Polar/azimuth parametrization with trigonometric-polynomial angles.

    ``S = (sin a cos b, sin a sin b, cos a)``; ``a`` and ``b`` are given by
    cosine coefficients (index 0 is the mean) and sine coefficients
    (index 0 multiplies ``sin theta``).
    """

    alpha_cos: tuple = (1.0, 0.5)
    alpha_sin: tuple = (0.0, 0.3)
    beta_cos: tuple = (0.0, 0.0, 0.4)
    beta_sin: tuple = (0.8,)
    name = "tilted"

    def __post_init__(self):
        for f in ("alpha_cos", "alpha_sin", "beta_cos", "beta_sin"):
            object.__setattr__(self, f, tuple(float(x) for x in getattr(self, f)))

    def __call__(self, theta):
        a = _trig(theta, self.alpha_cos, self.alpha_sin)
        b = _trig(theta, self.beta_cos, self.beta_sin)
        v = np.stack([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)], axis=-1)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True)
class RandomBandLimited(_Family):
    """Seeded random trigonometric polynomial field, projected onto the sphere.

    A constant offset along ``e_z`` keeps the field away from zero.
    """

    degree: int = 4
    seed: int = 0
    amplitude: float = 0.5
    offset: float = 1.0
    name = "random"

    def _coeffs(self):
        rng = np.random.default_rng(self.seed)
        a = rng.standard_normal((self.degree + 1, 3))
        b = rng.standard_normal((self.degree + 1, 3))
        decay = 1.0 / (1.0 + np.arange(self.degree + 1))[:, None] ** 2
        return self.amplitude * a * decay, self.amplitude * b * decay

    def __call__(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        a, b = self._coeffs()
        m = np.arange(self.degree + 1)
        v = np.cos(np.outer(th, m)) @ a + np.sin(np.outer(th, m)) @ b
        v[:, 2] += self.offset
        return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Algebraic(_Family):
    """Finite-regularity map: normalized ``e_z + e_x cos + e_y sin + tail``.

    The tail has Fourier coefficients of size ``amplitude * k^{-power}``
    for ``2 <= k <= kmax`` with seeded unit directions, so the map lies in
    ``H^s`` for ``s < power - 1/2`` and no better.
    """

    power: float = 3.5
    amplitude: float = 0.4
    kmax: int = 2048
    seed: int = 1
    name = "algebraic"

    def __call__(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        rng = np.random.default_rng(self.seed)
        k = np.arange(2, self.kmax + 1)
        dirs = rng.standard_normal((k.size, 2, 3))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        w = self.amplitude * k.astype(float) ** (-self.power)
        v = np.zeros((th.size, 3))
        v[:, 0] = 0.6 * np.cos(th)
        v[:, 1] = 0.6 * np.sin(th)
        v[:, 2] = 1.0
        # chunked to bound memory at large N
        for lo in range(0, th.size, 512):
            phase = np.outer(th[lo : lo + 512], k)
            v[lo : lo + 512] += (np.cos(phase) * w) @ dirs[:, 0] + (np.sin(phase) * w) @ dirs[:, 1]
        return v / np.linalg.norm(v, axis=-1, keepdims=True)


FAMILIES = {cls.name: cls for cls in (GreatCircle, Tilted, RandomBandLimited, Algebraic)}


def family_from_dict(d: dict) -> _Family:
    """Inverse of ``to_dict``."""
    d = dict(d)
    try:
        cls = FAMILIES[d.pop("family")]
    except KeyError as exc:
        raise ValueError(f"unknown data family {exc}; choose from {sorted(FAMILIES)}") from None
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**kwargs)
