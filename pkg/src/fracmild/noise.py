"""Driving paths: exact fractional Brownian motion and series noise.

Fractional Brownian motions are sampled exactly through a Cholesky factor
of the covariance R(s,t) = (s^2H + t^2H - |t-s|^2H)/2, which is the unique
centered Gaussian law with stationary increments, B(0) = 0 and
E B(t)^2 = t^2H.  Space-time noise is the truncated eigenfunction series
z(t) = sum_i q_i B_i^H(t) e_i with independent per-mode paths; coefficient
laws are a power law q_i = c_q lambda_i^(-rho/2) or a flat spectrum (the
series analogue of spatially white noise).

Determinism: all randomness flows through numpy SeedSequence; the per-mode
seed of mode i under master seed s is SeedSequence((s, i)).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import JitterWarning, NoiseGenerationError, SummabilityError
from .ioutil import fmt17, write_csv
from .spaces import Field, TimePath, norm_spectral
from .spectral import SpectralBasis

FBM_MAX_POINTS = 2**14

_CHOL_CACHE: dict = {}


def _fbm_cholesky(times_key: tuple, hurst: float) -> np.ndarray:
    key = (times_key, round(hurst, 15))
    if key not in _CHOL_CACHE:
        if len(_CHOL_CACHE) > 8:
            _CHOL_CACHE.clear()
        t = np.asarray(times_key)
        s, tt = np.meshgrid(t, t, indexing="ij")
        cov = 0.5 * (s ** (2 * hurst) + tt ** (2 * hurst) - np.abs(s - tt) ** (2 * hurst))
        jitters = [0.0, 1e-14, 1e-12, 1e-10]
        for jit in jitters:
            try:
                mat = cov + jit * np.max(np.diag(cov)) * np.eye(len(t)) if jit else cov
                chol = np.linalg.cholesky(mat)
                if jit:
                    warnings.warn(f"fBm covariance needed jitter {jit:g} to factor", JitterWarning, stacklevel=3)
                break
            except np.linalg.LinAlgError:
                chol = None
        if chol is None:
            raise NoiseGenerationError(f"fBm covariance not factorizable for H={hurst}, N={len(t)}")
        _CHOL_CACHE[key] = chol
    return _CHOL_CACHE[key]


@dataclass(eq=False)
class FbmPath:
    times: np.ndarray
    values: np.ndarray
    hurst: float
    seed: int

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def gen_fbm(n_steps: int, t0: float, hurst: float, seed) -> FbmPath:
    """Exact fractional Brownian motion on a uniform grid of n_steps cells."""
    if not 0.0 < hurst < 1.0:
        raise ValueError("hurst must lie in (0,1)")
    if n_steps + 1 > FBM_MAX_POINTS:
        raise ValueError(f"n_steps exceeds Cholesky budget {FBM_MAX_POINTS}")
    times = np.linspace(0.0, t0, n_steps + 1)
    chol = _fbm_cholesky(tuple(times[1:]), hurst)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    z = rng.standard_normal(n_steps)
    values = np.concatenate([[0.0], chol @ z])
    return FbmPath(times=times, values=values, hurst=hurst, seed=seed)


def gen_fbm_batch(n_steps: int, t0: float, hurst: float, seeds) -> np.ndarray:
    """Row-per-seed matrix of exact fBm paths sharing one Cholesky factor."""
    times = np.linspace(0.0, t0, n_steps + 1)
    chol = _fbm_cholesky(tuple(times[1:]), hurst)
    z = np.column_stack(
        [np.random.default_rng(np.random.SeedSequence(s)).standard_normal(n_steps) for s in seeds]
    )
    out = np.zeros((len(seeds), n_steps + 1))
    out[:, 1:] = (chol @ z).T
    return out


def mode_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((master_seed, index))


def path_seed(master_seed: int, path_index: int) -> int:
    """64-bit per-path seed derived from the master seed."""
    return int(np.random.SeedSequence((master_seed, path_index)).generate_state(1, np.uint64)[0])


@dataclass
class SeriesNoiseSpec:
    """Coefficient law and regularity declaration of the series noise.

    ``beta_star`` is the declared dual-order threshold: the series lives in
    H^(-beta) for beta > beta_star.  ``a1``, ``a2``, ``b_exponent`` are the
    sup-norm and Hölder growth exponents of the eigenfunctions entering the
    summability exponent -beta_star + max(a1,a2) - 2 b / w.
    """

    law: str = "power"  # "power" or "flat"
    c_q: float = 1.0
    rho: float = 0.4
    beta_star: float = 0.3
    a1: float = 0.0
    a2: float = 1.0
    b_exponent: float = 1.0
    n_terms: int = 16
    hurst: float = 0.8

    def coefficients(self, basis: SpectralBasis) -> np.ndarray:
        lam = basis.eigenvalues
        q = np.zeros(basis.n_modes)
        k = min(self.n_terms, basis.n_modes)
        if self.law == "flat":
            q[:k] = self.c_q
        elif self.law == "power":
            live = lam[:k] > 0
            q[:k][live] = self.c_q * lam[:k][live] ** (-self.rho / 2.0)
            # zero eigenvalues are excluded from the power law
        else:
            raise ValueError(f"unknown coefficient law {self.law!r}")
        return q

    def _extended_eigenvalues(self, basis: SpectralBasis, n_ext: int) -> np.ndarray:
        lam = basis.eigenvalues[basis.eigenvalues > 0]
        if basis.kind == "interval":
            return (np.arange(1, n_ext + 1) * np.pi) ** 2
        # Weyl extrapolation lam_i ~ c i^(2/d_S) fitted on the computed tail
        i = np.arange(1, len(lam) + 1)
        c = np.exp(np.mean(np.log(lam) - (2.0 / basis.spectral_dim) * np.log(i)))
        return c * np.arange(1, n_ext + 1) ** (2.0 / basis.spectral_dim)

    def _tail_fraction(self, basis: SpectralBasis, beta: float, n_ext: int) -> float:
        lam = self._extended_eigenvalues(basis, n_ext)
        expo = -beta + max(self.a1, self.a2) - 2.0 * self.b_exponent / basis.walk_dim
        if self.law == "flat":
            q2 = np.full(n_ext, self.c_q**2)
        else:
            q2 = self.c_q**2 * lam ** (-self.rho)
        terms = q2 * lam**expo
        total = float(terms.sum())
        head = float(terms[: int(0.75 * n_ext)].sum())
        return (total - head) / total if total > 0 else 0.0

    def summability_check(self, basis: SpectralBasis, margin: float = 0.25, n_ext: int = 1 << 22) -> dict:
        """Partial-sum stabilization of sum q_i^2 lam_i^(-beta + a - 2b/w).

        ``beta_star`` declares the *critical* dual order of the series: for a
        power coefficient law the sum is log-divergent at beta_star itself
        and convergent strictly above, so the stabilization criterion
        (relative tail < 1e-3 on a Weyl-extended eigenvalue sequence) is
        evaluated at beta_star + margin.  The tail fraction at
        beta_star - margin is reported as well; when it fails to stabilize
        the declared threshold is confirmed as (close to) critical rather
        than conservative.
        """
        tail_above = self._tail_fraction(basis, self.beta_star + margin, n_ext)
        tail_below = self._tail_fraction(basis, max(self.beta_star - margin, 0.0), n_ext)
        return {
            "relative_tail_above": float(tail_above),
            "relative_tail_below": float(tail_below),
            "ok": bool(tail_above < 1e-3),
            "critical_confirmed": bool(tail_below >= 1e-3),
            "margin": margin,
            "n_terms_used": n_ext,
        }

    def implied_beta_star_range(self, basis: SpectralBasis, grid=None) -> dict:
        """Dual orders whose membership sum stabilizes on the probe grid."""
        grid = np.arange(0.05, 1.0, 0.05) if grid is None else np.asarray(grid)
        ok = [float(b) for b in grid if self._tail_fraction(basis, float(b), 1 << 20) < 1e-3]
        return {"admissible_beta": ok, "min_admissible": min(ok) if ok else None}

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(eq=False)
class NoisePath(TimePath):
    """Coefficient path of the driving noise z with generation metadata."""

    spec: SeriesNoiseSpec | None = None
    seed: int | None = None
    holder_report: object = None

    def field_at(self, k: int) -> Field:
        return self.field(k)


def gen_series_noise(spec: SeriesNoiseSpec, basis: SpectralBasis, n_steps: int, t0: float, seed: int) -> NoisePath:
    """Truncated eigenfunction-series noise with independent fBm modes."""
    if spec.n_terms > basis.n_modes:
        raise ValueError("n_terms exceeds the basis mode count")
    check = spec.summability_check(basis)
    if not check["ok"]:
        raise SummabilityError(
            f"coefficient law fails summability above the declared threshold: relative tail "
            f"{check['relative_tail_above']:.2e} >= 1e-3 at beta_star+margin "
            f"(beta_star={spec.beta_star}, margin={check['margin']})"
        )
    times = np.linspace(0.0, t0, n_steps + 1)
    q = spec.coefficients(basis)
    coeffs = np.zeros((n_steps + 1, basis.n_modes))
    live = np.nonzero(q)[0]
    if n_steps > 0 and len(live) > 0:
        chol = _fbm_cholesky(tuple(times[1:]), spec.hurst)
        gauss = np.column_stack(
            [np.random.default_rng(mode_seed(seed, int(i))).standard_normal(n_steps) for i in live]
        )
        coeffs[1:, live] = (chol @ gauss) * q[live][None, :]
    return NoisePath(times=times, coeffs=coeffs, basis=basis, spec=spec, seed=seed)


def subsample(z: NoisePath, factor: int = 2) -> NoisePath:
    """Restriction to every ``factor``-th grid point (exactness preserved:
    a restriction of an exact fBm sample is the exact coarse-grid law)."""
    if z.n_steps % factor:
        raise ValueError("grid not divisible by the subsampling factor")
    return NoisePath(
        times=z.times[::factor].copy(), coeffs=z.coeffs[::factor].copy(),
        basis=z.basis, spec=z.spec, seed=z.seed,
    )


def zero_noise(basis: SpectralBasis, n_steps: int, t0: float) -> NoisePath:
    times = np.linspace(0.0, t0, n_steps + 1)
    return NoisePath(times=times, coeffs=np.zeros((n_steps + 1, basis.n_modes)), basis=basis, spec=None, seed=None)


def regulated(z: TimePath, t_index: int) -> TimePath:
    """z_t(s) = 1_(0,t)(s) (z(s) - z(t)); zero outside the open interval."""
    out = z.coeffs - z.coeffs[t_index]
    out[t_index:] = 0.0
    out[0] = 0.0
    return TimePath(times=z.times.copy(), coeffs=out, basis=z.basis)


def holder_in_dual_norm(z: NoisePath, beta: float, max_lag_frac: int = 32, n_sets: int = 32):
    """Estimated time-Hölder exponent of z in the H^(-beta) spectral norm.

    Log-log regression of sup-over-anchor-set increments
    ||z(s+h) - z(s)||_(-beta) against dyadic lags h (see
    :func:`fracmild.regularity.sup_increment_slope` for the anchor design).
    The slope estimates 1 - alpha.
    """
    from .regularity import sup_increment_slope

    weights = (1.0 + z.basis.eigenvalues) ** (-beta)

    def normfn(d):
        return np.sqrt(d**2 @ weights)

    est = sup_increment_slope(z.times, z.coeffs, normfn, max_lag_frac=max_lag_frac, n_sets=n_sets)
    z.holder_report = est
    return est


def export_noise_csv(z: NoisePath, csv_path, sidecar_path):
    """CSV of (t, coeff_1..coeff_n) plus a JSON sidecar with spec and seed."""
    header = ["t"] + [f"coeff_{i+1}" for i in range(z.basis.n_modes)]
    rows = [[z.times[k]] + list(z.coeffs[k]) for k in range(len(z.times))]
    write_csv(csv_path, header, rows)
    sidecar = {
        "seed": z.seed,
        "spec": z.spec.as_dict() if z.spec is not None else None,
        "basis_hash": z.basis.identifier_hash(),
        "t0": fmt17(z.times[-1]),
        "n_steps": len(z.times) - 1,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=1)


def import_noise_csv(csv_path, sidecar_path, basis: SpectralBasis) -> NoisePath:
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    if sidecar["basis_hash"] != basis.identifier_hash():
        raise ValueError("noise was exported against a different basis")
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    spec = SeriesNoiseSpec(**sidecar["spec"]) if sidecar["spec"] else None
    return NoisePath(times=data[:, 0], coeffs=data[:, 1:], basis=basis, spec=spec, seed=sidecar["seed"])
