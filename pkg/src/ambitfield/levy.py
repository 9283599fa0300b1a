"""Homogeneous Lévy bases: cumulant functions and cell samplers.

A basis is described by its per-unit-area cumulant ``K[xi]``, i.e.
``log E[exp(xi * Z(da))] = K[xi] da``. The measure of a lattice cell of
area ``A`` is infinitely divisible with cumulant ``A * K[xi]``, which is
what :func:`sample_cell` draws from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class CumulantDomainError(ValueError):
    """Raised when the cumulant is evaluated outside the basis domain.

    ``bound`` names the violated parameter bound and ``xi`` the offending
    argument, so callers can report the critical moment order.
    """

    def __init__(self, message: str, *, xi: float, bound: str):
        super().__init__(message)
        self.xi = xi
        self.bound = bound


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Gaussian:
    """Brownian sheet with drift ``a`` and volatility ``b``."""

    a: float = 0.0
    b: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "a", _finite("a", self.a))
        object.__setattr__(self, "b", _positive("b", self.b))


@dataclass(frozen=True)
class Poisson:
    """Compound Poisson basis with a single positive jump size."""

    intensity: float
    jump: float = 1.0
    kind = "poisson"

    def __post_init__(self):
        object.__setattr__(self, "intensity", _positive("intensity", self.intensity))
        object.__setattr__(self, "jump", _positive("jump", self.jump))


@dataclass(frozen=True)
class Gamma:
    """Gamma basis: shape ``rate`` per unit area, inverse scale ``gamma``."""

    rate: float
    gamma: float
    kind = "gamma"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))


@dataclass(frozen=True)
class StableSkewed:
    """Maximally skewed alpha-stable basis with ``K[xi] = s * c * xi**alpha``.

    The law has skewness -1 (heavy left tail), the only stable family with
    finite exponential moments for ``xi >= 0``. The sign ``s`` is +1 for
    ``alpha > 1`` and -1 for ``alpha < 1``; with ``alpha < 1`` the law lives
    on the negative half line and its cumulant is ``-c xi**alpha``, which
    keeps ``K`` convex in both regimes.
    """

    alpha: float
    c: float = 1.0
    kind = "stable"

    def __post_init__(self):
        alpha = float(self.alpha)
        if not (0.0 < alpha <= 2.0) or alpha == 1.0:
            raise ValueError(f"alpha must lie in (0, 2] with alpha != 1, got {alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "c", _positive("c", self.c))

    @property
    def sign(self) -> float:
        return 1.0 if self.alpha > 1.0 else -1.0


@dataclass(frozen=True)
class NIG:
    """Normal inverse Gaussian basis NIG(alpha, beta, delta, nu).

    ``delta`` and ``nu`` are per unit area; a cell of area ``A`` is
    NIG(alpha, beta, delta*A, nu*A).
    """

    alpha: float
    beta: float
    delta: float
    nu: float = 0.0
    kind = "nig"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "beta", _finite("beta", self.beta))
        object.__setattr__(self, "delta", _positive("delta", self.delta))
        object.__setattr__(self, "nu", _finite("nu", self.nu))
        if not abs(self.beta) < self.alpha:
            raise ValueError(f"NIG requires |beta| < alpha, got beta={self.beta}, alpha={self.alpha}")


LevyBasisSpec = Union[Gaussian, Poisson, Gamma, StableSkewed, NIG]

BASIS_KINDS = {cls.kind: cls for cls in (Gaussian, Poisson, Gamma, StableSkewed, NIG)}


def basis_from_dict(record: dict) -> LevyBasisSpec:
    """Build a basis from a tagged record such as ``{"kind": "gaussian", "a": 0, "b": 1}``."""
    record = dict(record)
    try:
        kind = record.pop("kind")
    except KeyError:
        raise ValueError("basis record needs a 'kind' key") from None
    try:
        cls = BASIS_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown basis kind {kind!r}; expected one of {sorted(BASIS_KINDS)}") from None
    try:
        return cls(**record)
    except TypeError as exc:
        raise ValueError(f"bad parameters for basis {kind!r}: {exc}") from None


def basis_to_dict(basis: LevyBasisSpec) -> dict:
    out = {"kind": basis.kind}
    out.update({k: v for k, v in basis.__dict__.items()})
    return out


def cumulant(basis: LevyBasisSpec, xi: float) -> float:
    """Per-unit-area log-Laplace transform ``K[xi]`` of the basis.

    Raises
    ------
    CumulantDomainError
        If ``xi`` lies outside the set where the exponential moment exists.
    """
    xi = float(xi)
    if isinstance(basis, Gaussian):
        return basis.a * xi + 0.5 * basis.b**2 * xi**2
    if isinstance(basis, Poisson):
        return basis.intensity * math.expm1(basis.jump * xi)
    if isinstance(basis, Gamma):
        if not xi < basis.gamma:
            raise CumulantDomainError(
                f"gamma cumulant needs xi < gamma={basis.gamma}, got xi={xi}", xi=xi, bound="xi < gamma"
            )
        return -basis.rate * math.log1p(-xi / basis.gamma)
    if isinstance(basis, StableSkewed):
        if xi < 0:
            raise CumulantDomainError(
                f"skewed stable cumulant needs xi >= 0, got xi={xi}", xi=xi, bound="xi >= 0"
            )
        return basis.sign * basis.c * xi**basis.alpha
    if isinstance(basis, NIG):
        shifted = basis.beta + xi
        if abs(shifted) > basis.alpha:
            raise CumulantDomainError(
                f"NIG cumulant needs |beta + xi| <= alpha={basis.alpha}, got |{basis.beta} + {xi}| = {abs(shifted)}",
                xi=xi,
                bound="|beta + xi| <= alpha",
            )
        a2 = basis.alpha**2
        return basis.nu * xi + basis.delta * (math.sqrt(a2 - basis.beta**2) - math.sqrt(a2 - shifted**2))
    raise TypeError(f"not a Lévy basis: {basis!r}")


def cumulant_gap(basis: LevyBasisSpec, n1: float, n2: float) -> float:
    """``K[n1 + n2] - K[n1] - K[n2]``, nonnegative by convexity of ``K``."""
    return cumulant(basis, n1 + n2) - cumulant(basis, n1) - cumulant(basis, n2)


def _stable_skewed_draws(alpha: float, scale: float, size, rng: np.random.Generator) -> np.ndarray:
    # Chambers-Mallows-Stuck with beta = -1, parameterisation S1(scale, -1, 0).
    v = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    w = rng.standard_exponential(size)
    zeta = np.tan(0.5 * np.pi * alpha)  # -beta * tan(pi alpha / 2)
    shift = np.arctan(-zeta) / alpha
    stretch = (1.0 + zeta * zeta) ** (1.0 / (2.0 * alpha))
    x = (
        stretch
        * np.sin(alpha * (v + shift))
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - alpha * (v + shift)) / w) ** ((1.0 - alpha) / alpha)
    )
    return scale * x


def sample_cell(basis: LevyBasisSpec, area: float, rng: np.random.Generator, size=None):
    """Draw ``Z(cell)`` for cells of the given area.

    Parameters
    ----------
    basis : LevyBasisSpec
    area : float
        Cell area, strictly positive.
    rng : numpy.random.Generator
        Random stream; the caller owns it.
    size : int or tuple, optional
        Output shape. ``None`` returns a scalar.
    """
    area = float(area)
    if not area > 0:
        raise ValueError(f"cell area must be positive, got {area!r}")
    if isinstance(basis, Gaussian):
        return rng.normal(basis.a * area, basis.b * math.sqrt(area), size)
    if isinstance(basis, Poisson):
        return basis.jump * rng.poisson(basis.intensity * area, size)
    if isinstance(basis, Gamma):
        return rng.gamma(basis.rate * area, 1.0 / basis.gamma, size)
    if isinstance(basis, StableSkewed):
        # E exp(xi X) = exp(-scale**alpha xi**alpha / cos(pi alpha / 2)) for beta = -1.
        scale = (basis.c * area * abs(math.cos(0.5 * math.pi * basis.alpha))) ** (1.0 / basis.alpha)
        return _stable_skewed_draws(basis.alpha, scale, size, rng)
    if isinstance(basis, NIG):
        delta = basis.delta * area
        gamma = math.sqrt(basis.alpha**2 - basis.beta**2)
        y = rng.wald(delta / gamma, delta * delta, size)
        return basis.nu * area + basis.beta * y + np.sqrt(y) * rng.standard_normal(size)
    raise TypeError(f"not a Lévy basis: {basis!r}")
