"""Integral functionals of a state: mass, energy, virial quantities, weighted norms.

All integrals use the rectangle rule on the grid nodes and all x-derivatives
are spectral.  ``Observer`` precomputes every coefficient array once so that
recording diagnostics along a long trajectory only costs one FFT pair per
snapshot.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, DegenerateInputError, QueryError, ShapeError
from .model import (
    GridSpec,
    ModelSpec,
    StateField,
    WeightSpec,
    eval_K,
    eval_K_prime,
    eval_phi,
    eval_V,
    eval_V_prime,
    eval_xK_prime,
)

MORAWETZ_KERNELS = ("xKprime_over_1px", "absx_minus_b", "absx_decay", "alpha4_absx")
# kernels integrated over the whole line rather than |x| <= R
_GLOBAL_KERNELS = ("xKprime_over_1px", "alpha4_absx")

SUITE_SEED = 20240817
"""Frozen seed of the random Gaussian test-function suite."""


def quadrature(samples, grid: GridSpec) -> float:
    samples = np.asarray(samples)
    if samples.shape != (grid.point_count,):
        raise ShapeError(f"samples have shape {samples.shape}, grid has {grid.point_count} nodes")
    return float(grid.h * np.sum(samples))


def _dx(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.ifft(1j * grid.k * np.fft.fft(values))


def spectral_derivative(u: StateField) -> StateField:
    return u.with_values(_dx(u.values, u.grid))


def _abs2(values: np.ndarray) -> np.ndarray:
    return values.real**2 + values.imag**2


def _abs_pow(a2: np.ndarray, p: float) -> np.ndarray:
    """|u|^p from |u|^2 with the convention 0^p = 0."""
    if p == 2:
        return a2
    if p == 4:
        return a2 * a2
    return np.power(a2, 0.5 * p)


def mass(u: StateField) -> float:
    return float(u.grid.h * np.sum(_abs2(u.values)))


@dataclass(frozen=True)
class EnergyTerms:
    kinetic: float
    nonlinear: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.nonlinear + self.potential


def energy_terms(u: StateField, model: ModelSpec) -> EnergyTerms:
    g = u.grid
    a2 = _abs2(u.values)
    kin = g.h * np.sum(_abs2(_dx(u.values, g)))
    nl = 0.0
    if model.K.tag != "zero":
        nl = g.h * np.sum(eval_K(model, g.x) * _abs_pow(a2, 2 * model.sigma + 2)) / (model.sigma + 1)
    pot = 0.0
    if model.mu != 0 and model.V.tag != "zero":
        pot = model.mu * g.h * np.sum(eval_V(model.V, g.x) * a2)
    return EnergyTerms(float(kin), float(nl), float(pot))


def energy(u: StateField, model: ModelSpec) -> float:
    """Hamiltonian int |u_x|^2 + int K |u|^{2s+2}/(s+1) + mu int V |u|^2."""
    return energy_terms(u, model).total


def virial(u: StateField, w: WeightSpec) -> float:
    """Im int phi u conj(u_x)."""
    if w.kind not in ("cutoff_R", "bounded"):
        raise ConfigurationError(f"virial functional needs a cutoff_R or bounded weight, got {w.kind}")
    g = u.grid
    phi = eval_phi(w, g.x, 0)
    return float(g.h * np.sum(phi * np.imag(u.values * np.conj(_dx(u.values, g)))))


@dataclass(frozen=True)
class VirialTerms:
    """Signed terms whose sum equals -dI/dt for the exact flow."""

    kinetic: float = 0.0
    phi3: float = 0.0
    K1: float = 0.0
    K2: float = 0.0
    V: float = 0.0

    @property
    def total(self) -> float:
        return self.kinetic + self.phi3 + self.K1 + self.K2 + self.V


@dataclass(frozen=True)
class _WeightArrays:
    phi: np.ndarray
    phi_x: np.ndarray
    phi_xxx: np.ndarray


def _weight_arrays(w: WeightSpec, x: np.ndarray) -> _WeightArrays:
    return _WeightArrays(eval_phi(w, x, 0), eval_phi(w, x, 1), eval_phi(w, x, 3))


def _rhs(values, ux, h, sigma, mu, wa: _WeightArrays, K, Kp, Vp) -> VirialTerms:
    a2 = _abs2(values)
    kin = 2.0 * h * np.sum(wa.phi_x * _abs2(ux))
    phi3 = -0.5 * h * np.sum(wa.phi_xxx * a2)
    k1 = k2 = vt = 0.0
    if K is not None:
        p = _abs_pow(a2, 2 * sigma + 2)
        c = 2.0 / (2 * sigma + 2)
        k1 = -(c - 1.0) * h * np.sum(wa.phi_x * K * p)
        k2 = -c * h * np.sum(wa.phi * Kp * p)
    if Vp is not None:
        vt = -mu * h * np.sum(wa.phi * Vp * a2)
    return VirialTerms(float(kin), float(phi3), float(k1), float(k2), float(vt))


def virial_rhs(u: StateField, model: ModelSpec, w: WeightSpec) -> VirialTerms:
    if w.kind not in ("cutoff_R", "bounded"):
        raise ConfigurationError(f"virial identity needs a cutoff_R or bounded weight, got {w.kind}")
    g = u.grid
    x = g.x
    K = Kp = Vp = None
    if model.K.tag != "zero":
        K, Kp = eval_K(model, x), eval_K_prime(model, x)
    if model.mu != 0 and model.V.tag != "zero":
        Vp = eval_V_prime(model.V, x)
    return _rhs(u.values, _dx(u.values, g), g.h, model.sigma, model.mu, _weight_arrays(w, x), K, Kp, Vp)


def _alpha(x):
    return (1.0 + np.abs(x)) ** -4.0


def weighted_h1(u: StateField, alpha: WeightSpec | None = None) -> float:
    """Squared H^1 norm with weight (1+|x|)^{-4}."""
    if alpha is not None and alpha.kind not in ("alpha", "psi"):
        raise ConfigurationError(f"weighted_h1 needs the alpha weight, got {alpha.kind}")
    g = u.grid
    return float(g.h * np.sum(_alpha(g.x) * (_abs2(_dx(u.values, g)) + _abs2(u.values))))


def weighted_l2(u: StateField) -> float:
    g = u.grid
    return float(g.h * np.sum(_alpha(g.x) * _abs2(u.values)))


def local_norms(u: StateField, interval) -> tuple[float, float]:
    """(L^2 norm, max modulus) over the nodes inside [a, b]."""
    a, b = interval
    g = u.grid
    if a < -g.L or b > g.L or a > b:
        raise QueryError(f"interval [{a}, {b}] is not inside [-{g.L}, {g.L})")
    mask = (g.x >= a) & (g.x <= b)
    if not np.any(mask):
        raise DegenerateInputError(f"no grid node inside [{a}, {b}]")
    a2 = _abs2(u.values[mask])
    return float(np.sqrt(g.h * np.sum(a2))), float(np.sqrt(np.max(a2)))


def tail_mass(u: StateField, fraction: float = 0.1) -> float:
    """Share of the mass sitting in the outer ``fraction`` of the box."""
    if not (0 < fraction <= 0.5):
        raise QueryError(f"fraction must lie in (0, 0.5], got {fraction}")
    g = u.grid
    a2 = _abs2(u.values)
    total = np.sum(a2)
    if total == 0:
        return 0.0
    outer = np.abs(g.x) > (1.0 - fraction) * g.L
    return float(min(1.0, np.sum(a2[outer]) / total))


def even_part_norm(u: StateField) -> float:
    v = u.values
    return float(np.sqrt(u.grid.h * np.sum(_abs2(0.5 * (v + v[::-1])))))


# ---------------------------------------------------------------------------
# per-snapshot diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Probe:
    """What to record along a trajectory.

    ``weight`` is the active weight whose virial functional and identity terms
    fill ``I`` / ``rhs``; ``cutoff_R`` additionally records the cutoff-weight
    functional when the active weight is the bounded one.
    """

    weight: WeightSpec = field(default_factory=lambda: WeightSpec("bounded"))
    interval: tuple[float, float] = (-2.0, 2.0)
    cutoff_R: float | None = None
    tail_fraction: float = 0.1


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    I: float
    I_cutoff: float
    I_bounded: float
    rhs: VirialTerms
    h1_alpha: float
    l2_local: float
    linf_local: float
    tail_mass_fraction: float
    even_norm: float = 0.0
    energy_parts: EnergyTerms | None = None

    @classmethod
    def zero(cls, t: float = 0.0) -> "DiagnosticsRecord":
        return cls(t, 0.0, 0.0, 0.0, 0.0, 0.0, VirialTerms(), 0.0, 0.0, 0.0, 0.0)


class Observer:
    """Computes DiagnosticsRecords with all coefficient arrays cached."""

    def __init__(self, grid: GridSpec, model: ModelSpec, probe: Probe | None = None):
        self.grid = grid
        self.model = model
        self.probe = probe or Probe()
        x = grid.x
        w = self.probe.weight
        if w.kind not in ("cutoff_R", "bounded"):
            raise ConfigurationError(f"probe weight must be cutoff_R or bounded, got {w.kind}")
        self.wa = _weight_arrays(w, x)
        self.bounded_phi = eval_phi(WeightSpec("bounded"), x, 0)
        R = w.R if w.kind == "cutoff_R" else self.probe.cutoff_R
        self.cutoff_phi = eval_phi(WeightSpec("cutoff_R", R), x, 0) if R else None
        self.K = self.Kp = self.V = self.Vp = None
        if model.K.tag != "zero":
            self.K, self.Kp = eval_K(model, x), eval_K_prime(model, x)
        if model.mu != 0 and model.V.tag != "zero":
            self.V, self.Vp = eval_V(model.V, x), eval_V_prime(model.V, x)
        self.alpha = _alpha(x)
        a, b = self.probe.interval
        self.local_mask = (x >= a) & (x <= b)
        if not np.any(self.local_mask):
            raise DegenerateInputError(f"no grid node inside [{a}, {b}]")
        self.outer_mask = np.abs(x) > (1.0 - self.probe.tail_fraction) * grid.L

    def energy_parts(self, values: np.ndarray, ux: np.ndarray | None = None) -> EnergyTerms:
        h = self.grid.h
        if ux is None:
            ux = _dx(values, self.grid)
        a2 = _abs2(values)
        nl = pot = 0.0
        if self.K is not None:
            s = self.model.sigma
            nl = h * np.sum(self.K * _abs_pow(a2, 2 * s + 2)) / (s + 1)
        if self.V is not None:
            pot = self.model.mu * h * np.sum(self.V * a2)
        return EnergyTerms(float(h * np.sum(_abs2(ux))), float(nl), float(pot))

    def tail(self, values: np.ndarray) -> float:
        a2 = _abs2(values)
        total = np.sum(a2)
        if total == 0:
            return 0.0
        return float(min(1.0, np.sum(a2[self.outer_mask]) / total))

    def record(self, values: np.ndarray, t: float, even_norm: float | None = None) -> DiagnosticsRecord:
        g, h = self.grid, self.grid.h
        ux = _dx(values, g)
        a2 = _abs2(values)
        ux2 = _abs2(ux)
        im = np.imag(values * np.conj(ux))
        I_b = float(h * np.sum(self.bounded_phi * im))
        I_c = float(h * np.sum(self.cutoff_phi * im)) if self.cutoff_phi is not None else float("nan")
        I_active = I_c if self.probe.weight.kind == "cutoff_R" else I_b
        rhs = _rhs(values, ux, h, self.model.sigma, self.model.mu, self.wa, self.K, self.Kp, self.Vp)
        parts = self.energy_parts(values, ux)
        local = a2[self.local_mask]
        if even_norm is None:
            even_norm = float(np.sqrt(h * np.sum(_abs2(0.5 * (values + values[::-1])))))
        return DiagnosticsRecord(
            t=float(t),
            mass=float(h * np.sum(a2)),
            energy=parts.total,
            I=I_active,
            I_cutoff=I_c,
            I_bounded=I_b,
            rhs=rhs,
            h1_alpha=float(h * np.sum(self.alpha * (ux2 + a2))),
            l2_local=float(np.sqrt(h * np.sum(local))),
            linf_local=float(np.sqrt(np.max(local))),
            tail_mass_fraction=self.tail(values),
            even_norm=even_norm,
            energy_parts=parts,
        )


def diagnose(u: StateField, model: ModelSpec, probe: Probe | None = None) -> DiagnosticsRecord:
    return Observer(u.grid, model, probe).record(u.values, u.t)


def record_fields() -> list[str]:
    return [f.name for f in fields(DiagnosticsRecord)]


# ---------------------------------------------------------------------------
# Morawetz averages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MorawetzQuery:
    T: float
    R: float
    kernel: str = "absx_minus_b"

    def __post_init__(self):
        if self.kernel not in MORAWETZ_KERNELS:
            raise QueryError(f"unknown kernel {self.kernel!r}; expected one of {MORAWETZ_KERNELS}")
        if not (self.T > 0 and self.R > 0):
            raise QueryError("T and R must be positive")


def morawetz_kernel(kernel: str, model: ModelSpec, x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    b = model.b
    if kernel == "xKprime_over_1px":
        return np.abs(eval_xK_prime(model, x)) / (1.0 + ax)
    if kernel == "absx_minus_b":
        return ax ** (-b)
    if kernel == "absx_decay":
        return ax ** (-b) * (1.0 + ax) ** (b - 2.0)
    if kernel == "alpha4_absx":
        return ax ** (-b) * (1.0 + ax) ** -4.0
    raise QueryError(f"unknown kernel {kernel!r}")


def morawetz_density(snapshots, q: MorawetzQuery, model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Spatial integral of kernel |u|^{2s+2} at each snapshot time."""
    if not snapshots:
        raise QueryError("trajectory has no snapshots")
    grid = snapshots[0].grid
    x = grid.x
    ker = morawetz_kernel(q.kernel, model, x)
    if q.kernel not in _GLOBAL_KERNELS:
        if q.R > grid.L / 2 + 1e-12:
            raise QueryError(f"R={q.R} exceeds L/2={grid.L / 2}")
        ker = np.where(np.abs(x) <= q.R, ker, 0.0)
    p = 2 * model.sigma + 2
    times = np.array([s.t for s in snapshots])
    vals = np.array([grid.h * np.sum(ker * _abs_pow(_abs2(s.values), p)) for s in snapshots])
    return times, vals


def time_average(times: np.ndarray, vals: np.ndarray, T: float) -> float:
    """(1/T) * trapezoid integral of vals over [0, T], interpolating the endpoint."""
    if times[0] > 1e-12 or times[-1] < T * (1 - 1e-12):
        raise QueryError(f"trajectory covers [{times[0]}, {times[-1]}], query needs [0, {T}]")
    keep = times < T
    t = np.append(times[keep], T)
    v = np.append(vals[keep], np.interp(T, times, vals))
    return float(np.trapezoid(v, t) / T)


def morawetz_average(traj, q: MorawetzQuery, model: ModelSpec) -> float:
    snaps = traj.snapshots if hasattr(traj, "snapshots") else traj
    times, vals = morawetz_density(snaps, q, model)
    return time_average(times, vals, q.T)


def cumulative_trapezoid(times, vals) -> np.ndarray:
    vals = np.asarray(vals, dtype=float)
    if len(vals) < 2:
        return np.zeros_like(vals)
    return integrate.cumulative_trapezoid(vals, np.asarray(times, dtype=float), initial=0.0)


# ---------------------------------------------------------------------------
# random test-function suite and interpolation inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteMember:
    centers: np.ndarray
    widths: np.ndarray
    amplitudes: np.ndarray

    def evaluate(self, grid: GridSpec) -> StateField:
        x = grid.x[:, None]
        vals = np.sum(self.amplitudes * np.exp(-(((x - self.centers) / self.widths) ** 2)), axis=1)
        return StateField(grid, vals)


def gaussian_suite(L: float, count: int = 100, seed: int = SUITE_SEED, terms: int = 5) -> list[SuiteMember]:
    """Sums of Gaussians with centers in [-L/4, L/4], widths in [0.5, 2], complex amplitudes.

    Parameters are drawn independently of any grid so that the same members can
    be sampled at several resolutions.
    """
    rng = np.random.default_rng(seed)
    members = []
    for _ in range(count):
        centers = rng.uniform(-L / 4, L / 4, terms)
        widths = rng.uniform(0.5, 2.0, terms)
        amps = rng.normal(size=terms) + 1j * rng.normal(size=terms)
        members.append(SuiteMember(centers, widths, amps))
    return members


def gn_ratio(u: StateField, b: float) -> float:
    """int |x|^{-b} |u|^{6-2b} / (||u_x||^2 ||u||^{4-2b})."""
    g = u.grid
    a2 = _abs2(u.values)
    num = g.h * np.sum(np.abs(g.x) ** (-b) * _abs_pow(a2, 6 - 2 * b))
    ux2 = g.h * np.sum(_abs2(_dx(u.values, g)))
    m = g.h * np.sum(a2)
    return float(num / (ux2 * m ** (2 - b)))


def hardy_type_ratio(u: StateField, b: float) -> float:
    """int |x|^{-b} |u|^2 / ||u||_{H^1}^2."""
    g = u.grid
    a2 = _abs2(u.values)
    num = g.h * np.sum(np.abs(g.x) ** (-b) * a2)
    den = g.h * (np.sum(a2) + np.sum(_abs2(_dx(u.values, g))))
    return float(num / den)
