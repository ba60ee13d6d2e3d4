"""Finite spectral models of the spatial domains.

A domain enters every other module only through a :class:`SpectralBasis`:
eigenpairs of the generator together with nodal quadrature, so that all
operators downstream are diagonal (or nodal) in this basis.  Two concrete
constructions are provided: the Dirichlet Laplacian on the unit interval
(analytic sine basis) and graph approximations of the Sierpinski gasket
with a Neumann-type renormalized graph Laplacian.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import AliasingError, ResourceLimitError, TruncationWarning
from .ioutil import dumps_with_arrays, fmt17

GASKET_MAX_LEVEL = 6

# Dimensions of the gasket in the Euclidean metric of its planar embedding.
# This convention keeps d_S = 2*ln3/ln5 while distances stay computable
# from the stored coordinates; it is recorded in exported documents.
GASKET_HAUSDORFF_DIM = math.log(3.0) / math.log(2.0)
GASKET_WALK_DIM = math.log(5.0) / math.log(2.0)


@dataclass(eq=False)
class SpectralBasis:
    """Eigenpairs, nodes and quadrature weights of a spatial generator.

    ``eigenvectors[i, j]`` is the nodal value e_i(x_j); the weights w_j are
    a quadrature rule for the underlying measure, so discrete orthonormality
    sum_j w_j e_i(x_j) e_k(x_j) = delta_ik holds to solver precision.
    """

    kind: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    hausdorff_dim: float
    walk_dim: float
    coords: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def spectral_dim(self) -> float:
        return 2.0 * self.hausdorff_dim / self.walk_dim

    @property
    def measure_total(self) -> float:
        return float(np.sum(self.weights))

    def synthesis_matrix(self) -> np.ndarray:
        """(n_modes, n_nodes) matrix of nodal values e_i(x_j)."""
        return self.eigenvectors

    def analysis_matrix(self) -> np.ndarray:
        """(n_modes, n_nodes) matrix with rows w_j * e_i(x_j)."""
        return self.eigenvectors * self.weights[None, :]

    def gram(self) -> np.ndarray:
        return self.analysis_matrix() @ self.eigenvectors.T

    def distances(self, i, j) -> float:
        """Metric distance between nodes i and j."""
        if self.coords is not None:
            return float(np.linalg.norm(self.coords[i] - self.coords[j]))
        return float(abs(self.nodes[i] - self.nodes[j]))

    def identifier_hash(self) -> str:
        payload = (
            self.kind
            + ",".join(fmt17(v) for v in self.eigenvalues)
            + "|"
            + ",".join(fmt17(v) for v in self.nodes)
        ).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def to_json(self) -> str:
        scalars = {
            "kind": self.kind,
            "level_or_nmodes": int(self.meta.get("level", self.n_modes)),
            "hausdorff_dim": self.hausdorff_dim,
            "walk_dim": self.walk_dim,
            "metric_convention": self.meta.get("metric_convention", "euclidean"),
        }
        arrays = {
            "eigenvalues": self.eigenvalues,
            "nodes": self.nodes,
            "weights": self.weights,
            "eigenvectors": self.eigenvectors,  # row-major flattening
        }
        return dumps_with_arrays(scalars, arrays)

    @staticmethod
    def from_json(text: str) -> "SpectralBasis":
        doc = json.loads(text)
        eigenvalues = np.asarray(doc["eigenvalues"], dtype=float)
        nodes = np.asarray(doc["nodes"], dtype=float)
        weights = np.asarray(doc["weights"], dtype=float)
        vecs = np.asarray(doc["eigenvectors"], dtype=float).reshape(len(eigenvalues), len(nodes))
        if doc["kind"] == "interval":
            d_h, w = 1.0, 2.0
            coords = None
        else:
            d_h, w = GASKET_HAUSDORFF_DIM, GASKET_WALK_DIM
            coords = _gasket_vertices(int(doc["level_or_nmodes"]))[0]
        return SpectralBasis(
            kind=doc["kind"],
            eigenvalues=eigenvalues,
            eigenvectors=vecs,
            nodes=nodes,
            weights=weights,
            hausdorff_dim=d_h,
            walk_dim=w,
            coords=coords,
            meta={"level": doc["level_or_nmodes"], "metric_convention": doc.get("metric_convention", "euclidean")},
        )


def build_interval_basis(n_modes: int, n_nodes: int) -> SpectralBasis:
    """Dirichlet Laplacian eigenbasis on (0,1): e_i = sqrt(2) sin(i pi x).

    Nodes are a uniform grid including the endpoints, weights are the
    trapezoid rule.  The trapezoid rule integrates products of the first
    ``n_modes`` sine modes exactly, so the discrete Gram matrix is the
    identity to round-off provided ``n_nodes >= 4 * n_modes``.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if n_nodes < 4 * n_modes:
        raise AliasingError(
            f"n_nodes={n_nodes} cannot resolve {n_modes} modes; need n_nodes >= {4 * n_modes}"
        )
    x = np.linspace(0.0, 1.0, n_nodes)
    i = np.arange(1, n_modes + 1)
    vecs = math.sqrt(2.0) * np.sin(np.pi * np.outer(i, x))
    lam = (i * np.pi) ** 2
    h = 1.0 / (n_nodes - 1)
    w = np.full(n_nodes, h)
    w[0] = w[-1] = h / 2.0
    return SpectralBasis(
        kind="interval",
        eigenvalues=lam,
        eigenvectors=vecs,
        nodes=x,
        weights=w,
        hausdorff_dim=1.0,
        walk_dim=2.0,
        meta={"n_modes": n_modes, "metric_convention": "euclidean"},
    )


def _gasket_vertices(level: int):
    """Vertex coordinates and smallest-triangle index triples at ``level``."""
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    verts = [tuple(p) for p in corners]
    index = {v: k for k, v in enumerate(verts)}
    triangles = [(0, 1, 2)]
    for _ in range(level):
        new_triangles = []
        midpoint_cache: dict = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key in midpoint_cache:
                return midpoint_cache[key]
            p = tuple((np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0)
            if p not in index:
                index[p] = len(verts)
                verts.append(p)
            midpoint_cache[key] = index[p]
            return index[p]

        for (a, b, c) in triangles:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_triangles += [(a, ab, ca), (ab, b, bc), (ca, bc, c)]
        triangles = new_triangles
    return np.asarray(verts), triangles


def build_gasket_basis(level: int) -> SpectralBasis:
    """Eigenbasis of the renormalized graph Laplacian on the level-m gasket.

    The stiffness matrix is 5**m times the plain graph Laplacian and the
    vertex measure is the 3**-m weighted counting measure, which makes the
    operator 15**m (D - A); at level 0 this is the unrenormalized K3 graph
    Laplacian.  Eigenvalue scaling under this convention reproduces the
    spectral dimension 2 ln3/ln5.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if level > GASKET_MAX_LEVEL:
        raise ResourceLimitError(f"gasket level {level} > {GASKET_MAX_LEVEL} exceeds dense eigensolve budget")
    coords, triangles = _gasket_vertices(level)
    n = len(coords)
    adj = np.zeros((n, n))
    for (a, b, c) in triangles:
        for p, q in ((a, b), (b, c), (a, c)):
            adj[p, q] = adj[q, p] = 1.0
    lap = np.diag(adj.sum(axis=1)) - adj
    stiffness = 5.0**level * lap
    w = np.full(n, 3.0 ** (-level))
    lam, vecs = scipy.linalg.eigh(stiffness, np.diag(w))
    lam = np.clip(lam, 0.0, None)  # clip -1e-15 round-off on the constant mode
    return SpectralBasis(
        kind="gasket",
        eigenvalues=lam,
        eigenvectors=vecs.T,
        nodes=np.arange(n, dtype=float),
        weights=w,
        hausdorff_dim=GASKET_HAUSDORFF_DIM,
        walk_dim=GASKET_WALK_DIM,
        coords=coords,
        meta={"level": level, "metric_convention": "euclidean", "complete": True},
    )


def weyl_count_slope(basis: SpectralBasis, n_samples: int = 60) -> float:
    """Spectral-dimension estimate from the eigenvalue counting function.

    Least-squares fit of log N(lambda) against log lambda, with N sampled on
    a geometric grid spanning the positive spectrum and evaluated with the
    midpoint convention N - 1/2 (the standard continuity correction at the
    jumps, which matters at the small mode counts of low gasket levels).
    Returns the estimate of d_S = 2 * slope.
    """
    lam = np.sort(basis.eigenvalues)
    pos = lam[lam > 0]
    grid = np.geomspace(pos[0], pos[-1], n_samples)
    count = np.searchsorted(lam, grid * (1 + 1e-12), side="right").astype(float) - 0.5
    slope = np.polyfit(np.log(grid), np.log(count), 1)[0]
    return float(2.0 * slope)


@dataclass
class HeatKernelModel:
    """Spectral heat kernel p(t,x,y) = sum_i exp(-lambda_i t) e_i(x) e_i(y).

    ``r0`` is the small-time horizon on which two-sided sub-Gaussian bounds
    are fitted; profile parameters are filled in by :func:`fit_hke_bounds`.
    """

    basis: SpectralBasis
    r0: float = 1.0
    truncation_tol: float = 1e-12
    c1: float | None = None
    kappa1: float | None = None
    c2: float | None = None
    kappa2: float | None = None
    pt_constant: float | None = None

    def truncation_ok(self, t: float) -> bool:
        if self.basis.meta.get("complete"):
            return True  # full graph spectrum: no truncation tail
        return math.exp(-self.basis.eigenvalues[-1] * t) < self.truncation_tol

    def _check_time(self, t: float):
        if t <= 0:
            raise ValueError(f"heat kernel needs t > 0, got {t}")
        if not self.truncation_ok(t):
            warnings.warn(
                f"mode truncation tail exp(-lambda_max*t)={math.exp(-self.basis.eigenvalues[-1] * t):.3e} "
                f">= {self.truncation_tol} at t={t}",
                TruncationWarning,
                stacklevel=3,
            )

    def profile(self, s, which: int):
        """Fitted sub-Gaussian profile Phi_1 (which=1) or Phi_2 (which=2)."""
        c, kappa = (self.c1, self.kappa1) if which == 1 else (self.c2, self.kappa2)
        if c is None:
            raise ValueError("profiles not fitted yet; call fit_hke_bounds")
        p = self.basis.walk_dim / (self.basis.walk_dim - 1.0)
        return c * np.exp(-kappa * np.asarray(s, dtype=float) ** p)


def heat_kernel(model: HeatKernelModel, t: float, xi: int, xj: int) -> float:
    """Kernel value between node indices ``xi`` and ``xj`` at time t > 0."""
    model._check_time(t)
    b = model.basis
    decay = np.exp(-b.eigenvalues * t)
    return float(np.sum(decay * b.eigenvectors[:, xi] * b.eigenvectors[:, xj]))


def heat_kernel_row(model: HeatKernelModel, t: float, xi: int) -> np.ndarray:
    """Vector p(t, x_i, x_j) over all nodes j."""
    model._check_time(t)
    b = model.basis
    decay = np.exp(-b.eigenvalues * t)
    return (decay * b.eigenvectors[:, xi]) @ b.eigenvectors


def heat_trace_density(model: HeatKernelModel, t) -> np.ndarray:
    """Measure-averaged on-diagonal value Z(t)/mu(X) for an array of times."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    z = np.exp(-np.outer(t, model.basis.eigenvalues)).sum(axis=1)
    return z / model.basis.measure_total


@dataclass
class HkeFitReport:
    sandwich_ok: bool
    c1: float
    kappa1: float
    c2: float
    kappa2: float
    max_violation: float
    integrability_value: float
    integrability_finite: bool
    ondiag_slope: float
    ondiag_r2: float
    pt_constant: float
    truncation_ok: bool
    n_points: int
    message: str = ""


def fit_hke_bounds(model: HeatKernelModel, t_grid, beta: float, n_pairs: int = 400, seed: int = 0,
                   statistic: str = "auto") -> HkeFitReport:
    """Fit two-sided sub-Gaussian envelopes to the computed kernel.

    Scatter points (s, v) with s = d(x,y) / t^(1/w) and v = p(t,x,y) * t^(dH/w)
    are collected over ``t_grid`` and sampled node pairs.  A common decay rate
    kappa is estimated by least squares in (s^p, log v) with p = w/(w-1) and
    the two constants are shifted so that c1 exp(-kappa s^p) <= v <=
    c2 exp(-kappa s^p) on every retained point; the integrability integral
    int_0^inf s^(dH + beta w/2 - 1) Phi_2(s) ds is then evaluated in closed
    form.  Failure to obtain a decaying envelope is reported, not raised.

    The on-diagonal regression uses p(t, x*, x*) at the most central node
    for the interval (the trace carries the Dirichlet boundary deficit) and
    the measure-averaged diagonal for closed fractal models.
    """
    from scipy.special import gamma as gamma_fn

    b = model.basis
    t_grid = np.asarray(t_grid, dtype=float)
    if beta <= 0:
        raise ValueError("beta must be positive")
    rng = np.random.default_rng(seed)
    n = b.n_nodes
    pairs = [(i, i) for i in rng.choice(n, size=min(n, 24), replace=False)]
    pairs += [tuple(rng.choice(n, size=2, replace=False)) for _ in range(n_pairs)]
    dist = np.array([b.distances(i, j) for i, j in pairs])

    s_all, v_all = [], []
    trunc_ok = model.truncation_ok(float(t_grid.min()))
    for t in t_grid:
        decay = np.exp(-b.eigenvalues * t)
        pvals = np.array(
            [np.sum(decay * b.eigenvectors[:, i] * b.eigenvectors[:, j]) for i, j in pairs]
        )
        scale = t ** (b.hausdorff_dim / b.walk_dim)
        s_all.append(dist / t ** (1.0 / b.walk_dim))
        v_all.append(pvals * scale)
    s = np.concatenate(s_all)
    v = np.concatenate(v_all)
    keep = v > 1e-13 * v.max()
    s, v = s[keep], v[keep]

    # on-diagonal time scaling
    if statistic == "auto":
        statistic = "node" if b.kind == "interval" else "trace"
    if statistic == "node":
        centroid = np.average(b.nodes, weights=b.weights) if b.coords is None else None
        idx = int(np.argmin(np.abs(b.nodes - centroid))) if centroid is not None else 0
        decay = np.exp(-np.outer(t_grid, b.eigenvalues))
        zt = decay @ b.eigenvectors[:, idx] ** 2
    else:
        zt = heat_trace_density(model, t_grid)
    if len(t_grid) >= 2:
        logt = np.log(t_grid)
        dslope, dintercept = np.polyfit(logt, np.log(zt), 1)
        resid = np.log(zt) - (dslope * logt + dintercept)
        ss_tot = np.sum((np.log(zt) - np.log(zt).mean()) ** 2)
        r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
        pt_c = float(np.exp(dintercept))
    else:
        dslope, r2, pt_c = np.nan, np.nan, np.nan
    model.pt_constant = pt_c

    p = b.walk_dim / (b.walk_dim - 1.0)
    sp = s**p
    if len(s) < 3 or float(np.ptp(sp)) < 1e-14:
        return HkeFitReport(
            sandwich_ok=False, c1=np.nan, kappa1=np.nan, c2=np.nan, kappa2=np.nan,
            max_violation=np.nan, integrability_value=np.inf, integrability_finite=False,
            ondiag_slope=float(dslope), ondiag_r2=float(r2), pt_constant=pt_c,
            truncation_ok=trunc_ok, n_points=len(s),
            message="no decaying envelope exists on this grid (degenerate kernel scatter)",
        )
    slope, intercept = np.polyfit(sp, np.log(v), 1)
    kappa = -slope

    if kappa <= 0:
        return HkeFitReport(
            sandwich_ok=False, c1=np.nan, kappa1=np.nan, c2=np.nan, kappa2=np.nan,
            max_violation=np.nan, integrability_value=np.inf, integrability_finite=False,
            ondiag_slope=float(dslope), ondiag_r2=float(r2), pt_constant=pt_c,
            truncation_ok=trunc_ok, n_points=len(s),
            message="no decaying envelope exists on this grid (fitted kappa <= 0)",
        )

    ratio = v * np.exp(kappa * sp)
    c2 = float(ratio.max())
    c1 = float(ratio.min())
    upper = c2 * np.exp(-kappa * sp)
    lower = c1 * np.exp(-kappa * sp)
    violation = max(float(np.max((v - upper) / upper)), float(np.max((lower - v) / upper)))

    q = b.hausdorff_dim + beta * b.walk_dim / 2.0
    integral = c2 * gamma_fn(q / p) / (p * kappa ** (q / p))

    model.c1, model.kappa1 = c1, kappa
    model.c2, model.kappa2 = c2, kappa
    model.r0 = float(t_grid.max())
    return HkeFitReport(
        sandwich_ok=True, c1=c1, kappa1=kappa, c2=c2, kappa2=kappa,
        max_violation=violation, integrability_value=float(integral),
        integrability_finite=bool(np.isfinite(integral)),
        ondiag_slope=float(dslope), ondiag_r2=float(r2), pt_constant=pt_c,
        truncation_ok=trunc_ok, n_points=len(s),
    )


def default_kernel_time_grid(basis: SpectralBasis, n_times: int = 12,
                             z_window: tuple = (2.5, 0.7)) -> np.ndarray:
    """Log grid inside the on-diagonal scaling window.

    The window is chosen through the partition function Z(t) = sum exp(-lam t):
    from the time where Z has dropped to ``z_window[1]`` of the mode count
    (small enough that truncation resolves the kernel) down to where
    Z = ``z_window[0]`` (before the lowest modes flatten the scaling).  The
    lower end is additionally kept above the truncation-safe time 30/lam_max.
    """
    lam = basis.eigenvalues

    def z_of(t):
        return float(np.exp(-lam * t).sum())

    def t_at(z_target):
        lo, hi = 1e-14, 1e6
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if z_of(mid) > z_target:
                lo = mid
            else:
                hi = mid
        return math.sqrt(lo * hi)

    t_lo = t_at(z_window[1] * basis.n_modes)
    if not basis.meta.get("complete"):
        t_lo = max(t_lo, 30.0 / lam[-1])
    t_hi = t_at(z_window[0])
    if t_hi <= t_lo:
        t_hi = 10.0 * t_lo
    return np.geomspace(t_lo, t_hi, n_times)
