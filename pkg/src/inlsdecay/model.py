"""Grids, coefficient families, weight functions and the wavefunction container.

Everything here is a pure function of its inputs.  Coefficients accept scalars
or numpy arrays and return the same kind.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import expit

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    ShapeError,
    SingularEvaluationError,
)

K_TAGS = ("K1_pure", "K2_pure", "K3_decay", "K4_decay", "zero")
V_TAGS = ("inverse_power", "yukawa", "zero")
V0_VARIANTS = ("cutoff", "bounded")
WEIGHT_KINDS = ("cutoff_R", "bounded", "psi", "alpha")


def _out(value, like):
    """Return a python float when the input was a scalar."""
    if np.ndim(like) == 0:
        return float(value)
    return value


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid on [-L, L) with N points.

    With ``staggered=True`` the nodes sit at ``-L + (j + 1/2) h`` so that the
    origin is never a node and ``-x_j`` is the node ``x_{N-1-j}``.
    """

    half_length: float
    point_count: int
    staggered: bool = True

    def __post_init__(self):
        if not self.half_length > 0:
            raise ConfigurationError(f"half_length must be positive, got {self.half_length}")
        n = self.point_count
        if int(n) != n or n < 1:
            raise ConfigurationError(f"point_count must be a positive integer, got {n}")

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def N(self) -> int:
        return self.point_count

    @property
    def h(self) -> float:
        return 2.0 * self.half_length / self.point_count

    @cached_property
    def x(self) -> np.ndarray:
        j = np.arange(self.point_count)
        offset = 0.5 if self.staggered else 0.0
        nodes = -self.half_length + (j + offset) * self.h
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers pi*m/L in FFT ordering."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.point_count, d=self.h)
        k.setflags(write=False)
        return k

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.half_length, self.point_count * factor, self.staggered)


def make_grid(L: float, N: int) -> GridSpec:
    """Staggered periodic grid; N must be a power of two and at least 16."""
    if not L > 0:
        raise ConfigurationError(f"L must be positive, got {L}")
    if int(N) != N or N < 1 or (int(N) & (int(N) - 1)) != 0:
        raise ConfigurationError(f"N must be a power of two, got {N}")
    if N < 16:
        raise ConfigurationError(f"N must be at least 16, got {N}")
    return GridSpec(float(L), int(N), staggered=True)


# ---------------------------------------------------------------------------
# nonlinearity coefficient K
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientFamily:
    """Tagged family for K(x); ``epsilon > 0`` replaces |x| by sqrt(x^2 + eps^2)."""

    tag: str
    sign: int = 1
    epsilon: float = 0.0

    def __post_init__(self):
        if self.tag not in K_TAGS:
            raise ConfigurationError(f"unknown K family {self.tag!r}; expected one of {K_TAGS}")
        if self.sign not in (1, -1):
            raise ConfigurationError(f"K sign must be +1 or -1, got {self.sign}")
        if self.tag == "K1_pure" and self.sign != 1:
            raise ConfigurationError("K1 requires a positive coefficient (sign=+1)")
        if self.epsilon < 0:
            raise ConfigurationError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def mollified(self) -> bool:
        return self.epsilon > 0

    @classmethod
    def from_name(cls, name: str, sign: int = 1, epsilon: float = 0.0) -> "CoefficientFamily":
        """Accept ``K1_mollified`` style names as well as the plain tags."""
        if name.endswith("_mollified"):
            base = name[: -len("_mollified")]
            tag = {"K1": "K1_pure", "K2": "K2_pure", "K3": "K3_decay", "K4": "K4_decay"}.get(base)
            if tag is None:
                raise ConfigurationError(f"unknown K family {name!r}")
            if epsilon <= 0:
                raise ConfigurationError(f"{name} needs a positive smoothing length")
            return cls(tag, sign, epsilon)
        return cls(name, sign, epsilon)


@dataclass(frozen=True)
class PotentialSpec:
    tag: str = "zero"
    m: float = 0.0
    n: float = 0.0

    def __post_init__(self):
        if self.tag not in V_TAGS:
            raise ConfigurationError(f"unknown potential family {self.tag!r}; expected one of {V_TAGS}")
        if self.tag == "inverse_power":
            if not (0 <= self.m < 1):
                raise ConfigurationError(f"inverse_power needs 0 <= m < 1, got m={self.m}")
            if not (self.n + self.m > 2):
                raise ConfigurationError(f"inverse_power needs n + m > 2, got {self.n + self.m}")
        elif self.tag == "yukawa":
            if not (0 < self.m < 1):
                raise ConfigurationError(f"yukawa needs m in (0, 1), got m={self.m}")
            if not self.n > 0:
                raise ConfigurationError(f"yukawa needs n > 0, got n={self.n}")

    @property
    def singular(self) -> bool:
        return self.tag != "zero" and self.m > 0


@dataclass(frozen=True)
class ModelSpec:
    sigma: float
    b: float
    mu: float = 0.0
    K: CoefficientFamily = field(default_factory=lambda: CoefficientFamily("K1_pure"))
    V: PotentialSpec = field(default_factory=PotentialSpec)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if not (0 < self.b < 1):
            raise ConfigurationError(f"b must lie in (0,1), got {self.b}")
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")


def _radius(x, eps):
    x = np.asarray(x, dtype=float)
    if eps > 0:
        return np.sqrt(x * x + eps * eps)
    return np.abs(x)


def _check_nonsingular(x, eps, what):
    if eps == 0 and np.any(np.asarray(x) == 0):
        raise SingularEvaluationError(f"{what} is singular at x = 0")


def eval_K(model: ModelSpec, x):
    fam = model.K
    if fam.tag == "zero":
        return _out(np.zeros_like(np.asarray(x, dtype=float)), x)
    _check_nonsingular(x, fam.epsilon, "K")
    r = _radius(x, fam.epsilon)
    b = model.b
    with np.errstate(divide="ignore"):
        val = r ** (-b)
        if fam.tag == "K3_decay":
            val = val * (1.0 + r) ** (b - 2.0)
        elif fam.tag == "K4_decay":
            val = val * (1.0 + r) ** (-3.0)
    return _out(fam.sign * val, x)


def eval_K_prime(model: ModelSpec, x):
    """dK/dx, using dr/dx = x/r for both the pure and the mollified radius."""
    fam = model.K
    if fam.tag == "zero":
        return _out(np.zeros_like(np.asarray(x, dtype=float)), x)
    _check_nonsingular(x, fam.epsilon, "K'")
    xa = np.asarray(x, dtype=float)
    r = _radius(xa, fam.epsilon)
    b = model.b
    # log-derivative d(log K)/dr
    logd = -b / r
    if fam.tag == "K3_decay":
        logd = logd + (b - 2.0) / (1.0 + r)
    elif fam.tag == "K4_decay":
        logd = logd - 3.0 / (1.0 + r)
    val = eval_K(model, xa) * logd * (xa / r)
    return _out(val, x)


def eval_xK_prime(model: ModelSpec, x):
    xa = np.asarray(x, dtype=float)
    return _out(xa * eval_K_prime(model, xa), x)


def default_mollified(model: ModelSpec, grid: GridSpec, factor: float = 4.0) -> ModelSpec:
    """Copy of ``model`` with K smoothed over ``factor`` grid spacings."""
    return replace(model, K=replace(model.K, epsilon=factor * grid.h))


def coefficient_class_report(model: ModelSpec, grid: GridSpec) -> dict:
    """Empirical constants of the (K1)-(K4) bounds on the grid nodes.

    ``K_constant`` is sup |K| / envelope; for the pure tagged families it is at
    most 1.  ``K1_sign_ok`` tells whether K > 0 and x K' <= 0 at every node.
    """
    x = grid.x
    ax = np.abs(x)
    b = model.b
    envelope = ax ** (-b)
    if model.K.tag == "K3_decay":
        envelope = envelope * (1 + ax) ** (b - 2)
    elif model.K.tag == "K4_decay":
        envelope = envelope * (1 + ax) ** (-3.0)
    K = eval_K(model, x)
    xKp = eval_xK_prime(model, x)
    return {
        "K_constant": float(np.max(np.abs(K) / envelope)),
        "Kprime_constant": float(np.max(np.abs(xKp) / envelope)),
        "K1_sign_ok": bool(np.all(K > 0) and np.all(xKp <= 0)),
    }


def check_k1_class(model: ModelSpec, grid: GridSpec) -> None:
    if model.K.tag != "K1_pure":
        return
    if not coefficient_class_report(model, grid)["K1_sign_ok"]:
        raise ConfigurationError("K1 family violates K > 0, x K'(x) <= 0 on the grid")


# ---------------------------------------------------------------------------
# potential V
# ---------------------------------------------------------------------------


def eval_V(pot: PotentialSpec, x):
    xa = np.asarray(x, dtype=float)
    if pot.tag == "zero":
        return _out(np.zeros_like(xa), x)
    if pot.m > 0 and np.any(xa == 0):
        raise SingularEvaluationError(f"{pot.tag} potential is singular at x = 0")
    ax = np.abs(xa)
    base = ax ** (-pot.m) if pot.m > 0 else np.ones_like(ax)
    if pot.tag == "inverse_power":
        val = base * (1.0 + ax) ** (-pot.n)
    else:
        val = base * np.exp(-pot.n * ax)
    return _out(val, x)


def eval_xV_prime(pot: PotentialSpec, x):
    """x V'(x), written without dividing by x (finite at 0 when m = 0)."""
    xa = np.asarray(x, dtype=float)
    if pot.tag == "zero":
        return _out(np.zeros_like(xa), x)
    ax = np.abs(xa)
    V = eval_V(pot, xa)
    if pot.tag == "inverse_power":
        val = -V * (pot.m + pot.n * ax / (1.0 + ax))
    else:
        val = -V * (pot.m + pot.n * ax)
    return _out(val, x)


def eval_V_prime(pot: PotentialSpec, x):
    xa = np.asarray(x, dtype=float)
    xvp = np.asarray(eval_xV_prime(pot, xa))
    if pot.tag == "zero":
        return _out(xvp, x)
    if np.any(xa == 0):
        raise SingularEvaluationError("V' is not defined at x = 0")
    return _out(xvp / xa, x)


def eval_V0(pot: PotentialSpec, x, variant: str = "cutoff"):
    """Derived comparison potential: -|x V'| (cutoff) or -x (1+|x|) V' (bounded)."""
    xvp = np.asarray(eval_xV_prime(pot, x))
    if variant == "cutoff":
        val = -np.abs(xvp)
    elif variant == "bounded":
        val = -(1.0 + np.abs(np.asarray(x, dtype=float))) * xvp
    else:
        raise ConfigurationError(f"unknown V0 variant {variant!r}; expected one of {V0_VARIANTS}")
    return _out(val, x)


def potential_moment(pot: PotentialSpec, grid: GridSpec) -> float:
    """Grid quadrature of |x V'(x)| (1+|x|)^2, the finiteness condition on V."""
    x = grid.x
    return float(grid.h * np.sum(np.abs(eval_xV_prime(pot, x)) * (1 + np.abs(x)) ** 2))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    R: float | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ConfigurationError(f"unknown weight kind {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if self.kind == "cutoff_R" and not (self.R is not None and self.R > 0):
            raise ConfigurationError("cutoff_R weight needs a positive R")

    @property
    def sup_norm(self) -> float:
        """sup over the real line of |phi|."""
        if self.kind == "cutoff_R":
            return float(self.R)
        return 1.0


def eta(t, d: int = 0):
    """Smooth step e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) and its derivatives up to 3."""
    ta = np.asarray(t, dtype=float)
    inside = (ta > 0) & (ta < 1)
    tt = np.where(inside, ta, 0.5)
    with np.errstate(over="ignore", divide="ignore"):
        g = 1.0 / tt - 1.0 / (1.0 - tt)
    p = expit(-g)
    pq = p * expit(g)
    if d == 0:
        val = np.where(ta >= 1, 1.0, np.where(inside, p, 0.0))
        return _out(val, t)
    g1 = -1.0 / tt**2 - 1.0 / (1.0 - tt) ** 2
    g2 = 2.0 / tt**3 - 2.0 / (1.0 - tt) ** 3
    g3 = -6.0 / tt**4 - 6.0 / (1.0 - tt) ** 4
    with np.errstate(over="ignore", invalid="ignore"):
        if d == 1:
            val = -pq * g1
        elif d == 2:
            val = pq * ((1 - 2 * p) * g1**2 - g2)
        elif d == 3:
            val = pq * ((2 * pq - (1 - 2 * p) ** 2) * g1**3 + 3 * (1 - 2 * p) * g1 * g2 - g3)
        else:
            raise ConfigurationError(f"eta derivative order must be 0..3, got {d}")
        val = np.where(inside & (pq > 0), val, 0.0)
    return _out(val, t)


def _phi_cutoff(R, x, d):
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    sgn = np.sign(xa)
    inner = ax <= R / 2
    outer = ax >= R
    s = R - ax
    tau = 2.0 * s / R
    if d == 0:
        mid = R - s * eta(tau)
        val = np.where(inner, ax, np.where(outer, R, mid)) * sgn
    elif d == 1:
        mid = eta(tau) + tau * eta(tau, 1)
        val = np.where(inner, 1.0, np.where(outer, 0.0, mid))
    elif d == 2:
        mid = -(2.0 / R) * (2 * eta(tau, 1) + tau * eta(tau, 2))
        val = np.where(inner | outer, 0.0, mid) * sgn
    else:
        mid = (4.0 / R**2) * (3 * eta(tau, 2) + tau * eta(tau, 3))
        val = np.where(inner | outer, 0.0, mid)
    return val


def _phi_bounded(x, d):
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    if d >= 2 and np.any(xa == 0):
        raise SingularEvaluationError("x/(1+|x|) is only C^1 at the origin")
    if d == 0:
        return xa / (1 + ax)
    if d == 1:
        return (1 + ax) ** -2.0
    if d == 2:
        return -2.0 * np.sign(xa) / (1 + ax) ** 3
    return 6.0 * (1 + ax) ** -4.0


def _decay4(x, d):
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    if d == 0:
        return (1 + ax) ** -4.0
    if d == 1:
        return -4.0 * np.sign(xa) * (1 + ax) ** -5.0
    raise ConfigurationError("psi/alpha weights only provide derivative orders 0 and 1")


def eval_phi(w: WeightSpec, x, d: int = 0):
    """Weight function (or its d-th derivative) at x."""
    if d not in (0, 1, 2, 3):
        raise ConfigurationError(f"derivative order must be in 0..3, got {d}")
    if w.kind == "cutoff_R":
        val = _phi_cutoff(float(w.R), x, d)
    elif w.kind == "bounded":
        val = _phi_bounded(x, d)
    else:
        val = _decay4(x, d)
    return _out(val, x)


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass
class StateField:
    grid: GridSpec
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.point_count,):
            raise ShapeError(
                f"state has shape {self.values.shape}, grid expects ({self.grid.point_count},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise DegenerateInputError("state contains non-finite samples")

    def with_values(self, values, t: float | None = None) -> "StateField":
        return StateField(self.grid, values, self.t if t is None else t)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: GridSpec, t: float = 0.0) -> "StateField":
        return cls(grid, np.zeros(grid.point_count, dtype=complex), t)


def h1_norm(u: StateField) -> float:
    """Discrete sqrt(||u||^2 + ||u_x||^2) with a spectral derivative."""
    g = u.grid
    ux = np.fft.ifft(1j * g.k * np.fft.fft(u.values))
    return float(np.sqrt(g.h * (np.sum(np.abs(u.values) ** 2) + np.sum(np.abs(ux) ** 2))))


def scale_to_h1(u: StateField, target: float) -> StateField:
    if not target > 0:
        raise ConfigurationError(f"target H1 norm must be positive, got {target}")
    norm = h1_norm(u)
    if norm == 0:
        raise DegenerateInputError("cannot rescale an identically zero field")
    return u * (target / norm)


def odd_gaussian_pair(grid: GridSpec, center: float = 1.0, width: float = 1.0, amplitude: complex = 1.0) -> StateField:
    x = grid.x
    vals = np.exp(-(((x - center) / width) ** 2)) - np.exp(-(((x + center) / width) ** 2))
    return StateField(grid, amplitude * vals)


def odd_xgaussian(grid: GridSpec, width: float = 1.0, amplitude: complex = 1.0) -> StateField:
    x = grid.x
    return StateField(grid, amplitude * x * np.exp(-((x / width) ** 2)))


def gaussian(grid: GridSpec, center: float = 0.0, width: float = 1.0, amplitude: complex = 1.0) -> StateField:
    x = grid.x
    return StateField(grid, amplitude * np.exp(-(((x - center) / width) ** 2)))
