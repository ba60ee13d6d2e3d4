"""Field algebra on a spectral basis.

A :class:`Field` is a coefficient vector in the eigenbasis; every fractional
Sobolev norm, the semigroup, Bessel potentials and fractional powers of the
generator act diagonally on it.  Dual (negative-order) elements are stored
as coefficient vectors too and only their norms are reweighted.

Norm conventions
----------------
* sigma > 0: ||u|| = ||u||_L2 + ||A^(sigma/2) u||_L2 (the form used when a
  semigroup estimate is being measured).
* sigma = 0: the plain L2 norm.
* sigma < 0: the spectral form (sum_i (1+lambda_i)^sigma u_i^2)^(1/2).

``norm_spectral`` exposes the (1+lambda)^sigma form for every sigma; it is
what the internal algebra (Bessel isometries, duality) uses, with exact
per-mode conversion between the two conventions.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasingWarning
from .ioutil import float_list_json
from .spectral import SpectralBasis


@dataclass(eq=False)
class Field:
    coeffs: np.ndarray
    basis: SpectralBasis
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.basis.n_modes,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, basis has {self.basis.n_modes} modes"
            )

    def values(self) -> np.ndarray:
        """Nodal synthesis u(x_j) = sum_i c_i e_i(x_j)."""
        return self.coeffs @ self.basis.eigenvectors

    def sup_nodal(self) -> float:
        return float(np.max(np.abs(self.values())))

    def copy(self) -> "Field":
        return Field(self.coeffs.copy(), self.basis)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.coeffs - other.coeffs, self.basis)

    def __rmul__(self, a: float) -> "Field":
        return Field(a * self.coeffs, self.basis)

    def to_json(self) -> str:
        return (
            '{"basis_hash": "%s", "coeffs": %s}'
            % (self.basis.identifier_hash(), float_list_json(self.coeffs))
        )

    @staticmethod
    def from_json(text: str, basis: SpectralBasis) -> "Field":
        import json

        doc = json.loads(text)
        if doc["basis_hash"] != basis.identifier_hash():
            raise ValueError("field was serialized against a different basis")
        return Field(np.asarray(doc["coeffs"], dtype=float), basis)


def norms_to_csv(u: Field, sigmas, path):
    """Report norm_H(u, sigma) as CSV rows (sigma, value)."""
    from .ioutil import write_csv

    write_csv(path, ["sigma", "value"], [[s, norm_H(u, s)] for s in sigmas])


def mode_field(basis: SpectralBasis, i: int, amplitude: float = 1.0) -> Field:
    """The i-th basis eigenfunction as a Field (0-based index)."""
    c = np.zeros(basis.n_modes)
    c[i] = amplitude
    return Field(c, basis)


def project_nodal(basis: SpectralBasis, nodal_values: np.ndarray) -> Field:
    """Analysis of nodal data: c_i = sum_j w_j f(x_j) e_i(x_j)."""
    return Field(basis.analysis_matrix() @ np.asarray(nodal_values, dtype=float), basis)


def l2_inner(u: Field, v: Field) -> float:
    return float(np.dot(u.coeffs, v.coeffs))


def norm_H(u: Field, sigma: float) -> float:
    """Fractional Sobolev norm of order sigma (see module docstring)."""
    if not -4.0 <= sigma <= 4.0:
        raise ValueError("sigma outside the documented working range [-4, 4]")
    c = u.coeffs
    lam = u.basis.eigenvalues
    l2 = float(np.sqrt(np.sum(c**2)))
    if sigma == 0.0:
        return l2
    if sigma > 0.0:
        return l2 + float(np.sqrt(np.sum(lam**sigma * c**2)))
    return norm_spectral(u, sigma)


def norm_spectral(u: Field, sigma: float) -> float:
    """(sum_i (1+lambda_i)^sigma c_i^2)^(1/2), valid for every sigma."""
    lam = u.basis.eigenvalues
    return float(np.sqrt(np.sum((1.0 + lam) ** sigma * u.coeffs**2)))


def norm_H_inf(u: Field, sigma: float) -> float:
    """Norm of H^sigma intersected with L_inf: norm_H + nodal sup."""
    return norm_H(u, sigma) + u.sup_nodal()


def semigroup_apply(u: Field, t: float) -> Field:
    """T(t): per-mode multiplier exp(-lambda_i t)."""
    if t < 0:
        raise ValueError("semigroup time must be >= 0")
    return Field(np.exp(-u.basis.eigenvalues * t) * u.coeffs, u.basis)


def subordinated_apply(u: Field, t: float, theta: float) -> Field:
    """Subordinated semigroup: multiplier exp(-lambda_i^theta t)."""
    if t < 0:
        raise ValueError("semigroup time must be >= 0")
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    return Field(np.exp(-u.basis.eigenvalues**theta * t) * u.coeffs, u.basis)


def bessel_potential(u: Field, sigma: float) -> Field:
    """J^sigma: multiplier (1+lambda_i)^(-sigma/2)."""
    return Field((1.0 + u.basis.eigenvalues) ** (-sigma / 2.0) * u.coeffs, u.basis)


def fractional_power_apply(u: Field, nu: float) -> Field:
    """A^nu: multiplier lambda_i^nu (zero modes stay zero for nu > 0)."""
    lam = u.basis.eigenvalues
    with np.errstate(divide="ignore"):
        mult = np.where(lam > 0, lam**nu, 0.0 if nu > 0 else np.where(lam == 0, 1.0, 0.0))
    if nu == 0:
        mult = np.ones_like(lam)
    return Field(mult * u.coeffs, u.basis)


@dataclass
class ParamSet:
    """Full parameter tuple with the two admissibility predicates.

    alpha: noise time-roughness (z is Hölder of order 1-alpha);
    beta: dual-space order of the noise; gamma/delta: target time/space
    regularity; q: integrability index (defaults to d_S/delta);
    hurst: Hurst exponent of the driving paths; theta: dissipation power;
    t0: horizon; epsilon: surplus regularity of the initial condition.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    spectral_dim: float
    walk_dim: float = 2.0
    q: float | None = None
    hurst: float = 0.8
    theta: float = 1.0
    t0: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if self.q is None:
            self.q = self.spectral_dim / self.delta

    @classmethod
    def for_basis(cls, basis: SpectralBasis, **kwargs) -> "ParamSet":
        return cls(spectral_dim=basis.spectral_dim, walk_dim=basis.walk_dim, **kwargs)

    def gamma_max_P(self) -> float:
        return 1.0 - self.alpha - self.beta / 2.0 - self.spectral_dim / 4.0

    def gamma_max_lowdim(self) -> float:
        return 1.0 - self.alpha - self.beta / 2.0 - self.delta / 2.0

    def admissible_P(self) -> bool:
        return (
            0.0 < self.alpha < self.gamma
            and 0.0 < self.beta < self.delta < min(self.spectral_dim / 2.0, 1.0)
            and self.gamma < self.gamma_max_P()
        )

    def admissible_lowdim(self) -> bool:
        return (
            self.spectral_dim / 2.0 <= self.beta <= self.delta < 1.0
            and 0.0 < self.beta
            and 0.0 < self.alpha < self.gamma < self.gamma_max_lowdim()
        )

    def admissible(self) -> bool:
        return self.admissible_P() or self.admissible_lowdim()

    def eta_window(self) -> tuple[float, float]:
        return (self.alpha, self.gamma)

    def default_eta(self) -> float:
        return 0.5 * (self.alpha + self.gamma)


def _nyquist_energy_fraction(u: Field) -> float:
    c2 = u.coeffs**2
    total = float(np.sum(c2))
    if total == 0.0:
        return 0.0
    top = int(np.ceil(0.75 * len(c2)))
    return float(np.sum(c2[top:]) / total)


def pointwise_product(g: Field, h: Field, params: ParamSet | None = None) -> Field:
    """Product g*h via nodal multiplication followed by analysis.

    ``h`` may represent a dual element; it is synthesized through the basis
    like a function and the result is a coefficient vector whose
    negative-order norms realize the q=2 spectral proxy of the dual-space
    product (reports built on it carry a "q=2 proxy" caveat).  A result
    whose inputs both hold substantial energy near the resolution limit is
    flagged as aliased.
    """
    if g.basis is not h.basis and g.basis.identifier_hash() != h.basis.identifier_hash():
        raise ValueError("fields live on different bases")
    out = project_nodal(g.basis, g.values() * h.values())
    if min(_nyquist_energy_fraction(g), _nyquist_energy_fraction(h)) > 0.1:
        warnings.warn("product of two near-Nyquist fields; analysis is aliased", AliasingWarning, stacklevel=2)
        out.meta["aliasing_warning"] = True
    if params is not None:
        out.meta["q2_proxy"] = True
    return out


def product_estimate_constant(
    basis: SpectralBasis, params: ParamSet, n_samples: int = 1000, seed: int = 7
) -> dict:
    """Empirical constant in ||g h||_{-beta} <= C ||g||_delta ||h||_{-beta}.

    Monte Carlo sup over random pairs; the h-norm is the q=2 spectral proxy,
    which the report flags.
    """
    rng = np.random.default_rng(seed)
    ratios = np.empty(n_samples)
    for k in range(n_samples):
        g = Field(rng.standard_normal(basis.n_modes), basis)
        h = Field(rng.standard_normal(basis.n_modes), basis)
        gh = pointwise_product(g, h)
        ratios[k] = norm_spectral(gh, -params.beta) / (
            norm_H(g, params.delta) * norm_spectral(h, -params.beta)
        )
    return {
        "constant": float(ratios.max()),
        "median_ratio": float(np.median(ratios)),
        "n_samples": n_samples,
        "q2_proxy": True,
        "beta": params.beta,
        "delta": params.delta,
    }


@dataclass
class SemigroupEstimateReport:
    """Max measured ratios of the four smoothing/continuity estimates."""

    nu: float
    beta: float
    smoothing: float           # ||A^(nu/2) T(t) v|| t^(nu/2) / ||v||_0
    continuity_l2: float       # ||T(t)u - u||_0 / (t^nu ||u||_{2 nu})
    dual_smoothing: float      # ||T(t)w||_delta t^(delta/2+beta/2) / ||w||_{-beta}
    dual_continuity: float     # ||T(t)w - w||_{-beta-2nu} / (t^nu ||w||_{-beta})
    delta: float
    n_fields: int

    def as_dict(self) -> dict:
        return {
            "smoothing": self.smoothing,
            "continuity_l2": self.continuity_l2,
            "dual_smoothing": self.dual_smoothing,
            "dual_continuity": self.dual_continuity,
        }

    def stable_against(self, other: "SemigroupEstimateReport", rel_tol: float = 0.1) -> bool:
        a, b = self.as_dict(), other.as_dict()
        return all(abs(a[k] - b[k]) <= rel_tol * max(abs(a[k]), abs(b[k])) for k in a)


def smoothing_ratio_single_mode(lam: float, nu: float, t) -> np.ndarray:
    """Closed-form ratio t^(nu/2) lambda^(nu/2) exp(-lambda t) for one mode."""
    t = np.asarray(t, dtype=float)
    return t ** (nu / 2.0) * lam ** (nu / 2.0) * np.exp(-lam * t)


def smoothing_ratio_max(nu: float) -> tuple[float, float]:
    """Analytic maximizer of the single-mode smoothing ratio.

    max_t t^(nu/2) lam^(nu/2) e^(-lam t) is attained at t = nu/(2 lam) with
    value (nu/2)^(nu/2) e^(-nu/2), independent of the eigenvalue.
    """
    val = (nu / 2.0) ** (nu / 2.0) * np.exp(-nu / 2.0)
    return val, nu / 2.0


def verify_semigroup_estimates(
    basis: SpectralBasis,
    nu: float,
    beta: float,
    t_grid,
    delta: float | None = None,
    n_fields: int = 64,
    seed: int = 1,
) -> SemigroupEstimateReport:
    """Measure the four semigroup estimate ratios over random fields.

    All four maxima are finite for any finite basis; the report is meant to
    be compared across grid refinements for stability.
    """
    if not 0.0 < nu < 1.0:
        raise ValueError("nu must lie in (0,1)")
    t_grid = np.asarray(t_grid, dtype=float)
    if delta is None:
        delta = beta
    rng = np.random.default_rng(seed)
    lam = basis.eigenvalues
    r1 = r2 = r3 = r4 = 0.0
    for _ in range(n_fields):
        c = rng.standard_normal(basis.n_modes)
        u = Field(c, basis)
        n0 = norm_H(u, 0.0)
        n2nu = norm_H(u, 2.0 * nu)
        nmb = norm_spectral(u, -beta)
        for t in t_grid:
            tu = semigroup_apply(u, t)
            r1 = max(r1, norm_H(fractional_power_apply(tu, nu / 2.0), 0.0) * t ** (nu / 2.0) / n0)
            r2 = max(r2, norm_H(tu - u, 0.0) / (t**nu * n2nu))
            r3 = max(r3, norm_H(tu, delta) * t ** (delta / 2.0 + beta / 2.0) / nmb)
            r4 = max(r4, norm_spectral(tu - u, -beta - 2.0 * nu) / (t**nu * nmb))
    return SemigroupEstimateReport(
        nu=nu, beta=beta, smoothing=r1, continuity_l2=r2,
        dual_smoothing=r3, dual_continuity=r4, delta=delta, n_fields=n_fields,
    )


@dataclass(eq=False)
class TimePath:
    """A Field-valued function on a uniform time grid.

    ``coeffs[k]`` holds the coefficient vector at ``times[k]``; the grid
    must be uniform because all quadrature downstream relies on lag tables.
    """

    times: np.ndarray
    coeffs: np.ndarray
    basis: SpectralBasis

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        steps = np.diff(self.times)
        if len(steps) and not np.allclose(steps, steps[0], rtol=1e-10, atol=1e-15):
            raise ValueError("time grid must be uniform")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t0(self) -> float:
        return float(self.times[-1])

    def field(self, k: int) -> Field:
        return Field(self.coeffs[k], self.basis)

    def nodal(self) -> np.ndarray:
        """(n_times, n_nodes) nodal values along the path."""
        return self.coeffs @ self.basis.eigenvectors

    def norm_profile(self, sigma: float) -> np.ndarray:
        return np.array([norm_H(self.field(k), sigma) for k in range(len(self.times))])
