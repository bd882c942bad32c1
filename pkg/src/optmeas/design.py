"""Weighted direction sets resolving the identity on a symmetric spin subspace.

For ``t = 2s`` qubits a direction set ``{(n_i, c_i^2)}`` must satisfy

    sum_i c_i^2 |n_i><n_i|^{(x) t} = P_sym

which forces ``sum c_i^2 = t + 1`` and ``sum c_i^2 n_i = 0``.  Sets for
``t <= 3`` are the antipodal pair, tetrahedron and octahedron.  Sets for
``t = 4, 5`` come from :func:`solve_direction_set` and are shipped as JSON
certificates in ``optmeas/data``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from math import comb

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from . import jsonio
from .errors import ConvergenceError, DesignError

log = logging.getLogger(__name__)

#: Minimal outcome counts for pure-state estimation with 1..5 copies.
PURE_STATE_COUNTS = {0: 1, 1: 2, 2: 4, 3: 6, 4: 10, 5: 12}

DESIGN_TOL = 1e-8
CONSTRAINT_TOL = 1e-9
SOLVE_TOL = 1e-10


@dataclass(frozen=True)
class DirectionSet:
    twice_s: int
    directions: np.ndarray  # (n, 3) unit vectors
    weights: np.ndarray  # (n,) c_i^2

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if d.shape[0] != w.shape[0]:
            raise DesignError("directions and weights differ in length")
        d.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.shape[0]

    def rotated(self, R) -> "DirectionSet":
        return DirectionSet(self.twice_s, self.directions @ np.asarray(R).T, self.weights)

    def to_json(self, certificate=None) -> dict:
        doc = {
            "twice_s": int(self.twice_s),
            "entries": [
                {"n": [float(f"{x:.17g}") for x in n], "c_sq": float(f"{w:.17g}")}
                for n, w in zip(self.directions, self.weights)
            ],
        }
        if certificate is not None:
            doc["certificate"] = certificate
        return doc

    @classmethod
    def from_json(cls, doc) -> "DirectionSet":
        try:
            twice_s = int(doc["twice_s"])
            entries = doc["entries"]
            dirs = np.array([e["n"] for e in entries], dtype=float).reshape(-1, 3)
            wts = np.array([e["c_sq"] for e in entries], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise DesignError(f"malformed direction-set document: {exc}") from None
        return cls(twice_s, dirs, wts)


def coherent_amplitudes(directions, t) -> np.ndarray:
    """Components of ``|n>^{(x) t}`` in the normalized Dicke basis, shape ``(m, t+1)``."""
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    theta = np.arccos(np.clip(d[:, 2] / np.linalg.norm(d, axis=1), -1.0, 1.0))
    phi = np.arctan2(d[:, 1], d[:, 0])
    return _amplitudes(theta, phi, t)


def _amplitudes(theta, phi, t):
    k = np.arange(t + 1)
    binom = np.sqrt([comb(t, int(j)) for j in k])
    c = np.cos(theta / 2)[:, None]
    s = np.sin(theta / 2)[:, None]
    return binom * c ** (t - k) * s**k * np.exp(1j * np.outer(phi, k))


def _frame_operator(theta, phi, weights, t):
    a = _amplitudes(theta, phi, t)
    return (a.T * weights) @ a.conj()


# -- builtins ---------------------------------------------------------------


def _sorted_set(twice_s, directions, weights) -> DirectionSet:
    d = np.asarray(directions, dtype=float)
    w = np.asarray(weights, dtype=float)
    order = sorted(range(len(w)), key=lambda i: (*np.round(d[i], 12), round(w[i], 12)))
    return DirectionSet(twice_s, d[order], w[order])


def builtin_direction_set(twice_s: int) -> DirectionSet:
    """Antipodal pair, regular tetrahedron or octahedron for ``twice_s`` 1, 2, 3."""
    if twice_s == 1:
        dirs = [[0, 0, 1], [0, 0, -1]]
    elif twice_s == 2:
        r2 = np.sqrt(2.0)
        dirs = [
            [0, 0, 1],
            [2 * r2 / 3, 0, -1 / 3],
            [-r2 / 3, np.sqrt(2 / 3), -1 / 3],
            [-r2 / 3, -np.sqrt(2 / 3), -1 / 3],
        ]
    elif twice_s == 3:
        dirs = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
    else:
        raise DesignError(f"no builtin direction set for twice_s={twice_s}")
    n = len(dirs)
    return _sorted_set(twice_s, dirs, np.full(n, (twice_s + 1) / n))


def cached_direction_set(twice_s: int) -> DirectionSet:
    """Solver-generated set shipped with the package."""
    count = PURE_STATE_COUNTS.get(twice_s)
    name = f"design_{twice_s}_{count}.json"
    try:
        text = resources.files("optmeas.data").joinpath(name).read_text()
    except (FileNotFoundError, ModuleNotFoundError):
        raise DesignError(f"no cached direction set for twice_s={twice_s}") from None
    return DirectionSet.from_json(json.loads(text))


def direction_set(twice_s: int) -> DirectionSet:
    """Default minimal set for ``twice_s`` (builtin or cached)."""
    if twice_s in (1, 2, 3):
        return builtin_direction_set(twice_s)
    return cached_direction_set(twice_s)


# -- verification -------------------------------------------------------------


def _dicke_projector(t):
    """Projector onto the symmetric subspace of ``t`` qubits, built from Hamming weights."""
    dim = 2**t
    weights = np.array([bin(i).count("1") for i in range(dim)])
    P = np.zeros((dim, dim))
    for k in range(t + 1):
        mask = weights == k
        P[np.ix_(mask, mask)] = 1.0 / comb(t, k)
    return P


def _product_ket(n, t):
    n = np.asarray(n, dtype=float)
    theta = np.arccos(np.clip(n[2] / np.linalg.norm(n), -1.0, 1.0))
    phi = np.arctan2(n[1], n[0])
    single = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    out = np.ones(1, dtype=complex)
    for _ in range(t):
        out = np.kron(out, single)
    return out


@dataclass(frozen=True)
class DesignReport:
    twice_s: int
    count: int
    design_residual: float
    weight_sum_error: float
    centroid_error: float
    unit_error: float
    rank: int
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


def verify_direction_set(ds: DirectionSet, tol=DESIGN_TOL) -> DesignReport:
    """Check the design condition in the full ``2**(2s)`` space, independently of the solver."""
    t = int(ds.twice_s)
    P = _dicke_projector(t)
    frame = np.zeros_like(P, dtype=complex)
    for n, w in zip(ds.directions, ds.weights):
        v = _product_ket(n, t)
        frame += w * np.outer(v, v.conj())
    design = float(np.max(np.abs(frame - P)))
    wsum = abs(float(np.sum(ds.weights)) - (t + 1))
    centroid = float(np.linalg.norm(ds.weights @ ds.directions)) if len(ds) else 0.0
    unit = float(np.max(np.abs(np.linalg.norm(ds.directions, axis=1) - 1.0))) if len(ds) else 0.0
    rank = int(np.sum(np.linalg.eigvalsh(0.5 * (frame + frame.conj().T)) > 1e-8))
    passed = (
        len(ds) > 0
        and design < tol
        and wsum < CONSTRAINT_TOL
        and centroid < CONSTRAINT_TOL
        and unit < CONSTRAINT_TOL
        and bool(np.all(ds.weights > 0))
        and rank == t + 1
    )
    return DesignReport(t, len(ds), design, wsum, centroid, unit, rank, bool(passed))


# -- solver ---------------------------------------------------------------------


def _sphere_starts(count, seed, restarts):
    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(count * restarts, 2))))
    pts = sampler.random_base2(m)
    for r in range(restarts):
        block = pts[r * count:(r + 1) * count]
        theta = np.arccos(1.0 - 2.0 * block[:, 0])
        phi = 2.0 * np.pi * block[:, 1]
        yield theta, phi


def _residuals(x, count, t):
    theta, phi, root = x[:count], x[count:2 * count], x[2 * count:]
    w = root**2
    M = _frame_operator(theta, phi, w, t) - np.eye(t + 1)
    iu = np.triu_indices(t + 1)
    dirs = np.column_stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
    )
    return np.concatenate(
        [M.real[iu], M.imag[np.triu_indices(t + 1, 1)], w @ dirs, [np.sum(w) - (t + 1)]]
    )


def _rotation_to_z(v):
    v = v / np.linalg.norm(v)
    z = np.array([0.0, 0.0, 1.0])
    c = float(v @ z)
    if c > 1 - 1e-15:
        return np.eye(3)
    if c < -1 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    k = np.cross(v, z)
    s = np.linalg.norm(k)
    k = k / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * K @ K


def canonicalize(ds: DirectionSet) -> DirectionSet:
    """Rotate the heaviest direction to +z and the next one into the +x half of the xz-plane.

    Ties in weight are broken by original index; the result is then sorted
    lexicographically.
    """
    w = ds.weights
    d = ds.directions / np.linalg.norm(ds.directions, axis=1, keepdims=True)
    order = sorted(range(len(w)), key=lambda i: (-round(float(w[i]), 10), i))
    anchor = order[0]
    R = _rotation_to_z(d[anchor])
    d = d @ R.T
    for j in order[1:]:
        rho = np.hypot(d[j, 0], d[j, 1])
        if rho > 1e-9:
            ang = -np.arctan2(d[j, 1], d[j, 0])
            c, s = np.cos(ang), np.sin(ang)
            d = d @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]).T
            break
    d[np.abs(d) < 1e-14] = 0.0
    return _sorted_set(ds.twice_s, d, w)


def solve_direction_set(twice_s: int, count: int, seed: int = 1, restarts: int = 64) -> DirectionSet:
    """Find a weighted set of ``count`` directions satisfying the design condition.

    Deterministic multi-start trust-region least squares over polar angles and
    square-root weights, started from a scrambled Sobol sequence on the
    sphere.  Returns the first restart whose verified residual is below
    ``1e-10``, canonicalized.
    """
    if twice_s < 1:
        raise DesignError("twice_s must be at least 1")
    if count < twice_s + 1:
        raise DesignError(
            f"infeasible count {count}: at least {twice_s + 1} directions are needed "
            f"to span the {twice_s + 1}-dimensional symmetric subspace"
        )
    t = twice_s
    best = np.inf
    for r, (theta, phi) in enumerate(_sphere_starts(count, seed, restarts)):
        root = np.full(count, np.sqrt((t + 1) / count))
        x0 = np.concatenate([theta, phi, root])
        sol = least_squares(
            _residuals, x0, args=(count, t), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
            max_nfev=200 * x0.size,
        )
        theta, phi, root = sol.x[:count], sol.x[count:2 * count], sol.x[2 * count:]
        dirs = np.column_stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
        )
        keep = root**2 > 1e-12
        if not np.all(keep):
            # a vanished weight means fewer than `count` directions; not a valid minimal set
            best = min(best, float(np.max(np.abs(sol.fun))))
            continue
        candidate = canonicalize(DirectionSet(t, dirs, root**2))
        report = verify_direction_set(candidate)
        resid = max(report.design_residual, report.weight_sum_error, report.centroid_error)
        log.debug("restart %d: residual %.3e", r, resid)
        best = min(best, resid)
        if resid < SOLVE_TOL and report.passed:
            return candidate
    raise ConvergenceError(
        f"no direction set for twice_s={twice_s}, count={count} after {restarts} restarts "
        f"(best residual {best:.3e})",
        best_residual=best,
    )


def certificate(ds: DirectionSet, **extra) -> dict:
    rep = verify_direction_set(ds)
    cert = {
        "design_residual": rep.design_residual,
        "weight_sum_error": rep.weight_sum_error,
        "centroid_error": rep.centroid_error,
        "rank": rep.rank,
        "passed": rep.passed,
    }
    cert.update(extra)
    return cert


def write_direction_set(ds: DirectionSet, path, **extra):
    jsonio.dump(ds.to_json(certificate(ds, **extra)), path)


def read_direction_set(path) -> DirectionSet:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DesignError(f"{path}: invalid JSON ({exc})") from None
    return DirectionSet.from_json(doc)


def gram(ds: DirectionSet) -> np.ndarray:
    return ds.directions @ ds.directions.T
