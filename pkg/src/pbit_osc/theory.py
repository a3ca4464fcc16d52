"""Linearized mean-field theory of period-2 oscillations and the c*(I0) boundary.

The numerical boundary uses the Gaussian effective Jacobian
``A = (1 - p) I + p * alpha_eff(I0) * I0 * J``, whose eigenvalues are affine in
those of ``J``. A negative eigenvalue ``lam`` of ``A`` produces a visible
period-2 signature within ``T`` ticks when ``|lam|**T >= R``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import roots_hermitenorm

from .graph import DENSE_MAX_NODES, CouplingMatrix, DegenerateGraphError

NORM_GROWTH_MAX_N = 256


class EigenSolverError(RuntimeError):
    pass


class QuadratureError(RuntimeError):
    pass


class Variant(str, enum.Enum):
    NON_IPR = "non_ipr"
    IPR = "ipr_corrected"

    @classmethod
    def parse(cls, value: str | Variant) -> Variant:
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {"non_ipr": cls.NON_IPR, "nonipr": cls.NON_IPR, "baseline": cls.NON_IPR,
                   "ipr": cls.IPR, "ipr_corrected": cls.IPR}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown variant {value!r}; use 'non-ipr' or 'ipr'") from None


@dataclass(frozen=True)
class TheoryParams:
    i0: float = 1.0
    c: float = 1.0
    horizon_T: int = 40
    threshold_R: float = 10.0
    gamma: float = 1.0
    n_modes_K: int = 8
    c_max: float = 20.0
    tol: float = 1e-3

    def __post_init__(self):
        if not self.i0 > 0:
            raise ValueError(f"i0 must be positive, got {self.i0}")
        if not self.c >= 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.horizon_T < 1:
            raise ValueError(f"horizon T must be >= 1, got {self.horizon_T}")
        if not self.threshold_R > 1:
            raise ValueError(f"threshold R must exceed 1, got {self.threshold_R}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.n_modes_K < 1:
            raise ValueError(f"n_modes_K must be >= 1, got {self.n_modes_K}")
        if not self.c_max > 1:
            raise ValueError(f"c_max must exceed 1, got {self.c_max}")

    @property
    def p(self) -> float:
        return 1.0 / self.c

    def with_(self, **changes) -> TheoryParams:
        return replace(self, **changes)


# --- mean-field map ------------------------------------------------------------


def _matrix(J):
    return J.J if isinstance(J, CouplingMatrix) else J


def _field(J, h, m):
    J = _matrix(J)
    m = np.asarray(m, dtype=float)
    if m.shape != (J.shape[0],):
        raise ValueError(f"state has shape {m.shape}, expected ({J.shape[0]},)")
    out = np.asarray(J @ m, dtype=float)
    if h is not None:
        h = np.asarray(h, dtype=float)
        if h.shape != m.shape:
            raise ValueError(f"bias has shape {h.shape}, expected {m.shape}")
        out = out + h
    return out


def mean_field_step(m, J, h=None, p: float = 1.0, i0: float = 1.0) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return (1 - p) * m + p * np.tanh(i0 * _field(J, h, m))


def fixed_point(J, h=None, p: float = 1.0, i0: float = 1.0, m0=None,
                damping: float = 0.5, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Damped iteration of the mean-field map to a fixed point."""
    n = _matrix(J).shape[0]
    m = np.zeros(n) if m0 is None else np.asarray(m0, dtype=float).copy()
    for _ in range(max_iter):
        nxt = (1 - damping) * m + damping * mean_field_step(m, J, h, p, i0)
        if np.max(np.abs(nxt - m)) < tol:
            return nxt
        m = nxt
    raise RuntimeError(f"fixed-point iteration did not converge in {max_iter} steps")


def jacobian(m_star, J, h=None, p: float = 1.0, i0: float = 1.0) -> np.ndarray:
    """``A = (1-p) I + p D I0 J`` with ``D = diag(sech^2(I0 (h + J m*)))``."""
    Jd = _matrix(J)
    Jd = Jd.toarray() if sp.issparse(Jd) else np.asarray(Jd, dtype=float)
    gain = 1.0 - np.tanh(i0 * _field(Jd, h, m_star)) ** 2
    return (1 - p) * np.eye(len(gain)) + p * i0 * gain[:, None] * Jd


# --- Gaussian effective gain -----------------------------------------------------


@lru_cache(maxsize=8)
def _hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_hermitenorm(n)
    return x, w / math.sqrt(2 * math.pi)


def _sech2(z: np.ndarray) -> np.ndarray:
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def alpha_eff(i0: float, sigma_h: float, start_nodes: int = 64, tol: float = 1e-8,
              max_nodes: int = 1 << 22) -> float:
    """``E[sech^2(I0 h)]`` for ``h ~ N(0, sigma_h^2)`` by Gauss-Hermite quadrature.

    The node count doubles from ``start_nodes`` until two successive rules
    agree to ``tol``.
    """
    if sigma_h < 0:
        raise ValueError(f"sigma_h must be non-negative, got {sigma_h}")
    a = abs(i0) * sigma_h
    if a == 0:
        return 1.0
    n = start_nodes
    x, w = _hermite_rule(n)
    prev = float(w @ _sech2(a * x))
    while n < max_nodes:
        n *= 2
        x, w = _hermite_rule(n)
        cur = float(w @ _sech2(a * x))
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise QuadratureError(f"alpha_eff did not converge for I0*sigma_h = {a} with {n} nodes")


# --- spectra and modes --------------------------------------------------------------


def ipr(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sum(v ** 4) / np.sum(v ** 2) ** 2)


@dataclass(frozen=True, eq=False)
class ModeInfo:
    eigenvalue: float
    eigenvector: np.ndarray
    ipr: float
    score: float


def _make_mode(lam: float, v: np.ndarray, gamma: float) -> ModeInfo:
    v = v / np.linalg.norm(v)
    # fix the sign so results do not depend on the eigensolver's choice
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    r = float(np.sum(v ** 4))
    return ModeInfo(float(lam), v, r, abs(float(lam)) / r ** gamma)


@dataclass(frozen=True, eq=False)
class CouplingSpectrum:
    """Extreme eigenvalues of J plus its K algebraically smallest modes."""

    lambda_min: float
    lambda_max: float
    modes: tuple[ModeInfo, ...]
    gamma: float = 1.0


def _dense_spectrum(J: np.ndarray, K: int):
    vals, vecs = np.linalg.eigh(J)
    return vals[0], vals[-1], vals[:K], vecs[:, :K]


def _sparse_spectrum(J, K: int, tol: float = 1e-8):
    try:
        vals, vecs = spla.eigsh(J, k=K, which="SA", tol=tol)
        top = spla.eigsh(J, k=1, which="LA", tol=tol, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise EigenSolverError(f"Lanczos solver did not converge (tol={tol}): {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    scale = max(abs(vals[0]), abs(top[0]), 1e-300)
    resid = np.linalg.norm(J @ vecs - vecs * vals, axis=0)
    if np.any(resid > 1e-6 * scale):
        raise EigenSolverError(
            f"eigenpair residual {resid.max():.3e} exceeds {1e-6 * scale:.3e} (tol={tol})")
    return vals[0], top[0], vals, vecs


def coupling_spectrum(J, K: int = 8, gamma: float = 1.0) -> CouplingSpectrum:
    J = _matrix(J)
    n = J.shape[0]
    K = min(K, n)
    if sp.issparse(J) and n > DENSE_MAX_NODES and K < n - 1:
        lo, hi, vals, vecs = _sparse_spectrum(J, K)
    else:
        Jd = J.toarray() if sp.issparse(J) else np.asarray(J, dtype=float)
        try:
            lo, hi, vals, vecs = _dense_spectrum(Jd, K)
        except np.linalg.LinAlgError as exc:
            raise EigenSolverError(f"dense eigendecomposition failed: {exc}") from exc
    modes = tuple(_make_mode(l, vecs[:, k], gamma) for k, l in enumerate(vals))
    return CouplingSpectrum(float(lo), float(hi), modes, gamma)


def extreme_modes(J, K: int = 8, gamma: float = 1.0) -> list[ModeInfo]:
    """The K algebraically smallest eigenpairs of J, ascending, with IPR and score."""
    n = _matrix(J).shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must lie in [1, {n}], got {K}")
    return list(coupling_spectrum(J, K, gamma).modes)


def select_mode(spectrum: CouplingSpectrum, variant: Variant | str) -> ModeInfo:
    """Mode whose eigenvalue drives the period-2 instability.

    The baseline takes the most negative eigenvalue. The IPR-corrected variant
    takes the negative mode with the largest ``|lambda| / IPR**gamma``; inside a
    degenerate cluster this picks the least localized basis vector.
    """
    variant = Variant.parse(variant)
    lowest = spectrum.modes[0]
    if variant is Variant.NON_IPR:
        return lowest
    candidates = [m for m in spectrum.modes if m.eigenvalue < 0]
    if not candidates:
        return lowest
    # max() keeps the first (most negative) mode on exact ties
    return max(candidates, key=lambda m: m.score)


def effective_jacobian(J, p: float, i0: float, alpha: float) -> np.ndarray:
    Jd = _matrix(J)
    Jd = Jd.toarray() if sp.issparse(Jd) else np.asarray(Jd, dtype=float)
    return (1 - p) * np.eye(Jd.shape[0]) + p * alpha * i0 * Jd


def effective_jacobian_spectrum(J, p: float, i0: float, alpha: float,
                                spectrum: CouplingSpectrum | None = None) -> tuple[float, float]:
    """Extreme eigenvalues of the Gaussian effective Jacobian."""
    if spectrum is None:
        spectrum = coupling_spectrum(J, K=1)
    ends = [(1 - p) + p * alpha * i0 * lam for lam in (spectrum.lambda_min, spectrum.lambda_max)]
    return min(ends), max(ends)


# --- finite-time observability -------------------------------------------------------


def growth_factor(lambda_abs: float, T: int) -> float:
    """``|lambda|**T``, evaluated in log space."""
    if lambda_abs < 0:
        raise ValueError(f"lambda_abs must be non-negative, got {lambda_abs}")
    if lambda_abs == 0:
        return 0.0
    log_g = T * math.log(lambda_abs)
    return math.exp(log_g) if log_g < 709.0 else math.inf


def is_observable(G: float, R: float) -> bool:
    if G <= 0:
        return False
    return math.log(G) >= math.log(R)


def finite_time_norm_growth(A, T: int) -> float:
    """Largest singular value of ``A**T`` (dense validation path)."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] > NORM_GROWTH_MAX_N:
        raise ValueError(f"dense norm growth limited to n <= {NORM_GROWTH_MAX_N}, got {A.shape[0]}")
    return float(np.linalg.norm(np.linalg.matrix_power(A, T), 2))


def _oscillation_observable(c: float, q: float, T: int, R: float) -> bool:
    # eigenvalue of A_eff for the oscillatory mode: 1 - (1 + q) / c
    lam = (1.0 - 1.0 / c) - q / c
    return lam < 0 and is_observable(growth_factor(-lam, T), R)


def critical_c_from_lambda(lambda_osc: float, alpha: float, i0: float, T: int = 40,
                           R: float = 10.0, c_max: float = 20.0, tol: float = 1e-3) -> float:
    """Smallest c >= 1 at which the mode ``lambda_osc`` of J stays below R within T ticks.

    Returns 1.0 when full synchrony is already unobservable and ``inf`` when
    the oscillation is still observable at ``c_max``.
    """
    q = -alpha * i0 * lambda_osc
    if not _oscillation_observable(1.0, q, T, R):
        return 1.0
    if _oscillation_observable(c_max, q, T, R):
        return math.inf
    lo, hi = 1.0, c_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _oscillation_observable(mid, q, T, R):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def closed_form_critical_c(q: float, T: int, R: float) -> float:
    """``(1 + q) / (1 + R**(1/T))`` clamped at 1."""
    return max(1.0, (1.0 + q) / (1.0 + R ** (1.0 / T)))


@dataclass(frozen=True)
class BoundaryPoint:
    i0: float
    c_star: float
    variant: Variant
    lambda_osc: float
    ipr: float
    alpha_eff: float


def critical_point(couplings: CouplingMatrix, params: TheoryParams, variant: Variant | str,
                   spectrum: CouplingSpectrum | None = None) -> BoundaryPoint:
    variant = Variant.parse(variant)
    if not couplings.s_J > 0:
        raise DegenerateGraphError(f"{couplings.name or 'graph'}: s_J = 0, no threshold defined")
    if spectrum is None:
        spectrum = coupling_spectrum(couplings, params.n_modes_K, params.gamma)
    mode = select_mode(spectrum, variant)
    alpha = alpha_eff(params.i0, couplings.sigma_h)
    c_star = critical_c_from_lambda(mode.eigenvalue, alpha, params.i0, params.horizon_T,
                                    params.threshold_R, params.c_max, params.tol)
    return BoundaryPoint(params.i0, c_star, variant, mode.eigenvalue, mode.ipr, alpha)


def critical_c(couplings: CouplingMatrix, params: TheoryParams, variant: Variant | str = Variant.NON_IPR,
               spectrum: CouplingSpectrum | None = None) -> float:
    return critical_point(couplings, params, variant, spectrum).c_star


@dataclass(frozen=True)
class BoundaryCurve:
    points: tuple[BoundaryPoint, ...]
    variant: Variant

    @property
    def i0(self) -> np.ndarray:
        return np.array([p.i0 for p in self.points])

    @property
    def c_star(self) -> np.ndarray:
        return np.array([p.c_star for p in self.points])


def boundary_curve(couplings: CouplingMatrix, i0_grid, params: TheoryParams | None = None,
                   variant: Variant | str = Variant.NON_IPR, jobs: int = 1,
                   spectrum: CouplingSpectrum | None = None) -> BoundaryCurve:
    variant = Variant.parse(variant)
    params = params or TheoryParams()
    grid = [float(x) for x in i0_grid]
    i0_max = couplings.i0_max
    for x in grid:
        if not 0 < x <= i0_max * (1 + 1e-12):
            raise ValueError(f"I0 = {x} outside (0, I0_max = {i0_max}]")
    if spectrum is None:
        spectrum = coupling_spectrum(couplings, params.n_modes_K, params.gamma)

    def point(x: float) -> BoundaryPoint:
        return critical_point(couplings, params.with_(i0=x), variant, spectrum)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            points = tuple(pool.map(point, grid))
    else:
        points = tuple(point(x) for x in grid)
    return BoundaryCurve(points, variant)


BOUNDARY_COLUMNS = ("i0", "c_star", "variant", "lambda_osc", "ipr", "alpha_eff")


def boundary_rows(curve: BoundaryCurve) -> list[dict]:
    return [{"i0": p.i0, "c_star": p.c_star, "variant": p.variant.value,
             "lambda_osc": p.lambda_osc, "ipr": p.ipr, "alpha_eff": p.alpha_eff}
            for p in curve.points]
