"""Isotropic priors over the Bloch ball and the radial/angular integrals they feed.

A prior is a nonnegative radial measure ``f(b)`` with
``4 pi int_0^1 b^2 f(b) db = 1``.  Point masses are stored exactly as
``(radius, mass)`` pairs; an optional smooth part is either the uniform ball
or a linearly interpolated table.  Half-integer exponents are passed around
as twice-value integers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import PriorError

NORM_TOL = 1e-9
DEFAULT_NODES = 64
QUAD_ENV = "OPTMEAS_QUAD_ORDER"

PRIOR_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "points": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"b": {"type": "number"}, "mass": {"type": "number"}},
                "required": ["b", "mass"],
                "additionalProperties": False,
            },
        },
        "density": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["uniform-ball", "table"]},
                "mass": {"type": "number"},
                "b": {"type": "array", "items": {"type": "number"}},
                "f": {"type": "array", "items": {"type": "number"}},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    },
    "anyOf": [{"required": ["points"]}, {"required": ["density"]}],
    "additionalProperties": False,
}


def default_nodes() -> int:
    """Radial quadrature order, overridable through ``OPTMEAS_QUAD_ORDER``."""
    raw = os.environ.get(QUAD_ENV)
    if not raw:
        return DEFAULT_NODES
    try:
        n = int(raw)
    except ValueError:
        raise PriorError(f"{QUAD_ENV}={raw!r} is not an integer") from None
    if n < 2:
        raise PriorError(f"{QUAD_ENV} must be at least 2, got {n}")
    return n


@dataclass(frozen=True)
class SmoothDensity:
    """Smooth radial density ``f(b)``; ``scale`` multiplies the raw shape."""

    kind: str
    scale: float
    table_b: tuple = ()
    table_f: tuple = ()

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        if self.kind == "uniform-ball":
            return np.full_like(b, self.scale * 3.0 / (4.0 * np.pi))
        return self.scale * np.interp(b, self.table_b, self.table_f, left=0.0, right=0.0)


@dataclass(frozen=True)
class RadialPrior:
    points: tuple = ()
    density: SmoothDensity | None = None
    name: str = "custom"
    renormalization: float = 1.0
    _mass: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple((float(b), float(w)) for b, w in self.points)
        object.__setattr__(self, "points", pts)
        for b, w in pts:
            if not 0.0 <= b <= 1.0:
                raise PriorError(f"radius {b} outside [0, 1]")
            if w < 0:
                raise PriorError(f"negative mass {w} at radius {b}")
        total = sum(w for _, w in pts) + self.smooth_mass()
        object.__setattr__(self, "_mass", total)
        if abs(total - 1.0) > NORM_TOL:
            raise PriorError(f"prior is not normalized: total mass {total:.17g}")

    def smooth_mass(self) -> float:
        if self.density is None:
            return 0.0
        if self.density.kind == "uniform-ball":
            return float(self.density.scale)
        return self.density.scale * _table_raw_mass(self.density.table_b, self.density.table_f)

    @property
    def total_mass(self) -> float:
        return self._mass

    def radial_rule(self, nodes=None):
        """Radii and weights such that ``sum(w * h(b))`` integrates ``h`` against the prior.

        The smooth part is integrated in ``t`` with ``b = sin t``, which turns
        the ``sqrt(1 - b^2)`` endpoint behaviour into an analytic integrand.
        """
        radii = [b for b, _ in self.points]
        weights = [w for _, w in self.points]
        if self.density is not None:
            n = default_nodes() if nodes is None else int(nodes)
            x, wx = np.polynomial.legendre.leggauss(n)
            # tables are only piecewise smooth: one rule per segment between breakpoints
            if self.density.kind == "table":
                edges = np.arcsin(np.clip(self.density.table_b, 0.0, 1.0))
            else:
                edges = np.array([0.0, 0.5 * np.pi])
            for lo, hi in zip(edges[:-1], edges[1:]):
                half = 0.5 * (hi - lo)
                t = lo + half * (x + 1.0)
                b = np.sin(t)
                w = 4.0 * np.pi * b**2 * self.density(b) * np.cos(t) * half * wx
                radii.extend(b.tolist())
                weights.extend(w.tolist())
        return np.asarray(radii, dtype=float), np.asarray(weights, dtype=float)


def _table_raw_mass(tb, tf) -> float:
    # b^2 times a linear segment is cubic: two-point Gauss-Legendre per segment is exact.
    x, w = np.polynomial.legendre.leggauss(2)
    total = 0.0
    for k in range(len(tb) - 1):
        lo, hi = tb[k], tb[k + 1]
        if hi <= lo:
            continue
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        bb = mid + half * x
        ff = np.interp(bb, tb, tf)
        total += half * float(np.sum(w * bb**2 * ff))
    return 4.0 * np.pi * total


def _half_power(x, twice_exp):
    x = np.clip(x, 0.0, None)
    if twice_exp % 2 == 0:
        return x ** (twice_exp // 2)
    return np.sqrt(x) ** twice_exp


def moment_I(prior: RadialPrior, twice_alpha: int, nodes=None) -> float:
    """``I_alpha = 4 pi int b^2 f(b) ((1 - b^2)/4)^alpha db`` with ``alpha = twice_alpha/2``."""
    if twice_alpha < 0:
        raise ValueError("twice_alpha must be nonnegative")
    radii, weights = prior.radial_rule(nodes)
    x = (1.0 - radii**2) / 4.0
    return float(np.sum(weights * _half_power(x, twice_alpha)))


def g_integrals(prior: RadialPrior, N: int, twice_s: int, nodes=None):
    """Return ``(g1, g2)`` for ``N`` copies and total spin ``twice_s/2``.

    The azimuthal integral is done analytically; the polar integral over
    ``u = cos(theta)`` uses a Gauss-Legendre rule that is exact for the
    polynomial integrands.
    """
    if twice_s < 0 or twice_s > N or (N - twice_s) % 2:
        raise ValueError(f"twice_s={twice_s} incompatible with N={N}")
    radii, weights = prior.radial_rule(nodes)
    u, wu = np.polynomial.legendre.leggauss(twice_s + 2)
    bu = np.outer(radii, u)
    base = ((1.0 + bu) / 2.0) ** twice_s
    ang1 = 0.5 * (base @ wu)
    # odd in u when twice_s == 0; keep it exactly zero so the guess stays 0
    ang2 = 0.5 * ((base * bu / 2.0) @ wu) if twice_s else np.zeros_like(ang1)
    x = (1.0 - radii**2) / 4.0
    g1 = float(np.sum(weights * _half_power(x, N + 1 - twice_s) * ang1))
    g2 = float(np.sum(weights * _half_power(x, N - twice_s) * ang2))
    return g1, g2


def point_prior(points, name="custom") -> RadialPrior:
    return RadialPrior(points=tuple(points), name=name)


def pure_prior() -> RadialPrior:
    return RadialPrior(points=((1.0, 1.0),), name="pure")


def random_state_prior() -> RadialPrior:
    return RadialPrior(points=((0.0, 1.0),), name="random")


def uniform_ball_prior() -> RadialPrior:
    return RadialPrior(density=SmoothDensity("uniform-ball", 1.0), name="uniform-ball")


def two_point_prior(m0=0.1, b0=0.0, m1=0.9, b1=1.0) -> RadialPrior:
    name = f"two-point:{m0:g}@{b0:g},{m1:g}@{b1:g}"
    return RadialPrior(points=((b0, m0), (b1, m1)), name=name)


def load_prior(document, name=None) -> RadialPrior:
    """Build a validated prior from a JSON-like mapping."""
    try:
        jsonschema.validate(document, PRIOR_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise PriorError(f"prior document does not match schema: {exc.message}") from None
    points = [(p["b"], p["mass"]) for p in document.get("points", [])]
    point_mass = sum(m for _, m in points)
    name = name or document.get("name", "custom")
    density = None
    renorm = 1.0
    dens = document.get("density")
    if dens is not None:
        target = dens.get("mass", 1.0 - point_mass)
        if target < -NORM_TOL:
            raise PriorError(f"point masses sum to {point_mass} > 1, no room for a density")
        if dens["kind"] == "uniform-ball":
            density = SmoothDensity("uniform-ball", float(target))
        else:
            tb = np.asarray(dens.get("b", []), dtype=float)
            tf = np.asarray(dens.get("f", []), dtype=float)
            if tb.size < 2 or tb.size != tf.size:
                raise PriorError("table density needs matching 'b' and 'f' arrays of length >= 2")
            if np.any(np.diff(tb) <= 0):
                raise PriorError("table radii must be strictly increasing")
            if tb[0] < 0 or tb[-1] > 1:
                raise PriorError("table radii must lie in [0, 1]")
            if np.any(tf < 0):
                raise PriorError("table density values must be nonnegative")
            raw = _table_raw_mass(tuple(tb), tuple(tf))
            if raw <= 0:
                raise PriorError("table density has zero mass")
            renorm = max(target, 0.0) / raw
            density = SmoothDensity("table", renorm, tuple(tb), tuple(tf))
    return RadialPrior(points=tuple(points), density=density, name=name, renormalization=renorm)


BUILTIN_PRIORS = {
    "pure": pure_prior,
    "random": random_state_prior,
    "uniform-ball": uniform_ball_prior,
    "two-point": two_point_prior,
}


def parse_prior(text: str) -> RadialPrior:
    """Resolve a builtin name, ``two-point:m1@b1,m2@b2`` shorthand, or a JSON file path."""
    text = text.strip()
    if text in BUILTIN_PRIORS:
        return BUILTIN_PRIORS[text]()
    if text.startswith("two-point:"):
        body = text[len("two-point:"):]
        points = []
        try:
            for item in body.split(","):
                m, b = item.split("@")
                points.append((float(b), float(m)))
        except ValueError:
            raise PriorError(f"cannot parse two-point prior {text!r}; expected m1@b1,m2@b2") from None
        return RadialPrior(points=tuple(points), name=text)
    path = Path(text)
    if not path.is_file():
        raise PriorError(f"unknown prior {text!r}: not a builtin name and no such file")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PriorError(f"{path}: invalid JSON ({exc})") from None
    return load_prior(document, name=document.get("name", path.stem))


def random_prior(rng, smooth=True) -> RadialPrior:
    """Random valid prior: up to three point masses, optionally mixed with the uniform ball."""
    k = int(rng.integers(1, 4))
    radii = rng.uniform(0.0, 1.0, size=k)
    use_ball = smooth and rng.random() < 0.5
    masses = rng.dirichlet(np.ones(k + int(use_ball)))
    points = tuple(zip(radii.tolist(), masses[:k].tolist()))
    density = SmoothDensity("uniform-ball", float(masses[k])) if use_ball else None
    # dirichlet sums to 1 only up to rounding; fold the remainder into the first mass
    drift = 1.0 - float(np.sum(masses))
    if drift:
        b0, m0 = points[0]
        points = ((b0, m0 + drift),) + points[1:]
    return RadialPrior(points=points, density=density, name="random-draw")
