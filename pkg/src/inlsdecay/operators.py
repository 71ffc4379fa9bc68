"""Bound states of -d^2/dx^2 + mu V0 and coercivity of the virial quadratic forms.

Eigenproblems use the three-point Dirichlet Laplacian on the staggered nodes
(walls one half-spacing outside the box), so every operator is a symmetric
tridiagonal matrix and eigenvalue counts below a shift come from Sturm
sequences.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, EigenSolverError, SymmetryPreconditionError, ValidationError
from .functionals import SUITE_SEED, _dx, gaussian_suite, weighted_h1
from .model import GridSpec, PotentialSpec, StateField, eval_V0, eval_xV_prime

# ---------------------------------------------------------------------------
# tridiagonal Sturm machinery
# ---------------------------------------------------------------------------


def sturm_count(diag, off, lam: float) -> int:
    """Number of eigenvalues strictly below ``lam`` of the tridiagonal (diag, off)."""
    d = np.asarray(diag, dtype=float).tolist()
    e2 = (np.asarray(off, dtype=float) ** 2).tolist()
    e2.append(0.0)
    pivmin = 1e-300 * max(1.0, max(abs(v) for v in e2))
    count = 0
    q = d[0] - lam
    if q == 0.0:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        q = d[i] - lam - e2[i - 1] / q
        if q == 0.0:
            q = -pivmin
        if q < 0:
            count += 1
    return count


def gershgorin(diag, off) -> tuple[float, float]:
    d = np.asarray(diag, dtype=float)
    a = np.abs(np.asarray(off, dtype=float))
    radius = np.zeros_like(d)
    radius[:-1] += a
    radius[1:] += a
    return float(np.min(d - radius)), float(np.max(d + radius))


def bisect_eigenvalue(diag, off, index: int, rtol: float = 1e-12, atol: float = 1e-15,
                      max_iter: int = 200) -> float:
    """The ``index``-th smallest eigenvalue (0-based) by Sturm bisection."""
    lo, hi = gershgorin(diag, off)
    width = max(abs(lo), abs(hi), 1.0)
    lo -= 1e-12 * width
    hi += 1e-12 * width
    if sturm_count(diag, off, lo) > index or sturm_count(diag, off, hi) <= index:
        raise EigenSolverError("initial Gershgorin bracket does not isolate the eigenvalue", (lo, hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if sturm_count(diag, off, mid) > index:
            hi = mid
        else:
            lo = mid
        if hi - lo <= max(atol, rtol * max(abs(lo), abs(hi))):
            return 0.5 * (lo + hi)
    raise EigenSolverError(f"bisection for eigenvalue {index} did not converge", (lo, hi))


def dirichlet_operator(V0: np.ndarray, mu: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(V0)
    diag = 2.0 / h**2 + mu * np.asarray(V0, dtype=float)
    off = np.full(n - 1, -1.0 / h**2)
    return diag, off


def _eigenvector(diag, off, lam: float, seed: int = 7) -> np.ndarray:
    """Inverse iteration with a slightly shifted eigenvalue."""
    n = len(diag)
    shift = lam - max(1e-13, 1e-7 * abs(lam))
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag - shift
    ab[2, :-1] = off
    v = np.random.default_rng(seed).standard_normal(n)
    for _ in range(4):
        v = solve_banded((1, 1), ab, v)
        v /= np.linalg.norm(v)
    return v


def classify_parity(v: np.ndarray, tol: float = 1e-6) -> str:
    even = np.linalg.norm(v + v[::-1])
    odd = np.linalg.norm(v - v[::-1])
    if odd <= tol * even:
        return "even"
    if even <= tol * odd:
        return "odd"
    return "indeterminate"


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class EigenReport:
    """Spectral summary of -d^2/dx^2 + mu V0 on a Dirichlet box.

    ``lowest_eigenvalue`` is the Richardson extrapolation (4 E_{h/2} - E_h)/3;
    ``negative_count`` and ``negative_eigenvalues`` come from the finer grid.
    ``mu0_estimate`` is filled by ``simon_klaus_check``: the largest scanned
    coupling below which the count never exceeded one.  It is an empirical
    lower-bound witness, not the analytic threshold.
    """

    mu: float
    lowest_eigenvalue: float
    negative_count: int
    ground_state_parity: str
    moment_integral: float
    klaus_moment: float
    eigenvalue_coarse: float
    eigenvalue_fine: float
    negative_eigenvalues: list[float] = field(default_factory=list)
    sturm_count_at_zero: int = 0
    weak_coupling_prediction: float = float("nan")
    mu0_estimate: float | None = None
    grid_points: tuple[int, int] = (0, 0)
    half_length: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _solve_grid(V0: Callable, mu: float, grid: GridSpec, max_negative: int):
    x = grid.x
    diag, off = dirichlet_operator(V0(x), mu, grid.h)
    count = sturm_count(diag, off, 0.0)
    found = [bisect_eigenvalue(diag, off, i) for i in range(min(count, max_negative))]
    lowest = found[0] if found else bisect_eigenvalue(diag, off, 0)
    return diag, off, count, found, lowest


def lowest_eigenvalue(V0, mu: float, grid: GridSpec, max_negative: int = 8) -> EigenReport:
    """Lowest eigenvalue and negative-eigenvalue count of -d^2/dx^2 + mu V0.

    ``V0`` is a callable on node arrays so that the operator can be rebuilt on
    the refined grid used for extrapolation.
    """
    if not mu > 0:
        raise ConfigurationError(f"coupling mu must be positive, got {mu}")
    if not callable(V0):
        raise ConfigurationError("V0 must be a callable evaluated on grid nodes")
    samples = np.asarray(V0(grid.x), dtype=float)
    if not np.all(np.isfinite(samples)):
        raise ConfigurationError("V0 samples must be finite")
    moment = float(grid.h * np.sum(samples))
    klaus = float(grid.h * np.sum((1 + np.abs(grid.x)) * np.abs(samples)))

    _, _, _, _, e_coarse = _solve_grid(V0, mu, grid, max_negative)
    fine = grid.refined(2)
    diag, off, count, found, e_fine = _solve_grid(V0, mu, fine, max_negative)
    extrap = (4.0 * e_fine - e_coarse) / 3.0
    parity = classify_parity(_eigenvector(diag, off, e_fine))
    return EigenReport(
        mu=mu,
        lowest_eigenvalue=extrap,
        negative_count=count,
        ground_state_parity=parity,
        moment_integral=moment,
        klaus_moment=klaus,
        eigenvalue_coarse=e_coarse,
        eigenvalue_fine=e_fine,
        negative_eigenvalues=found,
        sturm_count_at_zero=count,
        weak_coupling_prediction=-((mu * moment / 2.0) ** 2) if moment < 0 else float("nan"),
        grid_points=(grid.point_count, fine.point_count),
        half_length=grid.half_length,
    )


def simon_klaus_check(pot: PotentialSpec, variant: str, mu_list, grid: GridSpec) -> list[EigenReport]:
    mus = [float(m) for m in mu_list]
    if any(m <= 0 for m in mus) or any(b <= a for a, b in zip(mus, mus[1:])):
        raise ConfigurationError("mu_list must be positive and strictly increasing")
    if pot.tag == "zero":
        # -d^2/dx^2 alone: reuse the generic path with an identically zero V0
        def V0(x):
            return np.zeros_like(x)
    else:
        def V0(x):
            return eval_V0(pot, x, variant)
    reports = [lowest_eigenvalue(V0, mu, grid) for mu in mus]
    mu0 = None
    for r in reports:
        if r.negative_count > 1:
            break
        mu0 = r.mu
    for r in reports:
        r.mu0_estimate = mu0
    return reports


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------


def _real_odd(w: StateField, tol: float = 1e-10) -> np.ndarray:
    v = w.values
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    if np.max(np.abs(v.imag)) > tol * scale:
        raise ConfigurationError("quadratic forms act on real-valued components")
    r = v.real
    if not w.grid.staggered:
        raise ConfigurationError("quadratic forms need a staggered grid")
    if np.max(np.abs(r + r[::-1])) > tol * scale:
        raise SymmetryPreconditionError("quadratic forms require an odd function")
    return r


@dataclass(frozen=True)
class FormParts:
    """B_V(w) = H(w) + J(w); with mu = 0 the total is B(w)."""

    H: float
    J: float

    @property
    def total(self) -> float:
        return self.H + self.J


def form_parts(w: StateField, pot: PotentialSpec | None = None, mu: float = 0.0) -> FormParts:
    g = w.grid
    r = _real_odd(w)
    x = g.x
    ax = np.abs(x)
    wx = _dx(r.astype(complex), g).real
    # d/dx [w / (1+|x|)]
    zx = wx / (1 + ax) - np.sign(x) * r / (1 + ax) ** 2
    Z = g.h * np.sum(zx**2)
    H = -3.0 * g.h * np.sum(r**2 / (1 + ax) ** 4) - Z + 2.0 * g.h * np.sum(wx**2 / (1 + ax) ** 2)
    J = Z
    if pot is not None and mu != 0 and pot.tag != "zero":
        # -mu int x(1+|x|) V' |w/(1+|x|)|^2 = -mu int x V'/(1+|x|) |w|^2
        J -= mu * g.h * np.sum(eval_xV_prime(pot, x) / (1 + ax) * r**2)
    return FormParts(float(H), float(J))


def quadratic_form(w: StateField, form: str = "B", pot: PotentialSpec | None = None, mu: float = 0.0,
                   mu0: float | None = None) -> float:
    """B(w) or B_V(w) for a real odd w."""
    if form == "B":
        return form_parts(w).total
    if form == "B_V":
        if mu0 is not None and not mu < mu0:
            raise ValidationError(f"B_V needs mu below the scanned threshold ({mu} >= {mu0})")
        return form_parts(w, pot, mu).total
    raise ConfigurationError(f"unknown form {form!r}; expected 'B' or 'B_V'")


@dataclass
class CoercivityReport:
    form: str
    sample_count: int
    min_ratio: float
    failures: list[int] = field(default_factory=list)
    j_min: float = float("nan")
    no_samples: bool = False
    ratios: list[float] = field(default_factory=list)

    @property
    def coercive(self) -> bool:
        return not self.no_samples and self.min_ratio > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coercive"] = self.coercive
        return d


def coercivity_ratio(u: StateField, form: str = "B", pot: PotentialSpec | None = None,
                     mu: float = 0.0) -> tuple[float, float]:
    """((F(Re u) + F(Im u)) / ||u||^2_{H^1_alpha}, min J) for an odd complex u."""
    parts = [form_parts(StateField(u.grid, comp), pot if form == "B_V" else None, mu if form == "B_V" else 0.0)
             for comp in (u.values.real, u.values.imag)]
    denom = weighted_h1(u)
    if math.sqrt(denom) <= 1e-12:
        return float("nan"), min(p.J for p in parts)
    return sum(p.total for p in parts) / denom, min(p.J for p in parts)


def coercivity_sweep(form: str, pot: PotentialSpec | None, mu: float, sample_count: int,
                     seed: int = SUITE_SEED, grid: GridSpec | None = None) -> CoercivityReport:
    """Evaluate the form over odd projections of the random Gaussian suite."""
    if form not in ("B", "B_V"):
        raise ConfigurationError(f"unknown form {form!r}")
    if sample_count <= 0:
        return CoercivityReport(form, 0, float("nan"), no_samples=True)
    if grid is None:
        grid = GridSpec(40.0, 4096)
    ratios, failures, j_values = [], [], []
    for i, member in enumerate(gaussian_suite(grid.L, sample_count, seed)):
        u = member.evaluate(grid)
        v = u.values
        u = u.with_values(0.5 * (v - v[::-1]))
        ratio, j = coercivity_ratio(u, form, pot, mu)
        j_values.append(j)
        if math.isnan(ratio):
            continue
        ratios.append(ratio)
        if ratio <= 0:
            failures.append(i)
    if not ratios:
        return CoercivityReport(form, sample_count, float("nan"), j_min=min(j_values), no_samples=True)
    return CoercivityReport(form, sample_count, float(min(ratios)), failures, float(min(j_values)),
                            ratios=ratios)
