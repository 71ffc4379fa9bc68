"""Theorem-level scenarios: hypothesis checks, decay verdicts and Morawetz fits.

The decay results being checked are qualitative (limits without rates), so
every threshold below is a frozen regression value, not a predicted number.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import BoundaryContaminationError, ConfigurationError, QueryError, ValidationError
from .functionals import (
    MorawetzQuery,
    Probe,
    SUITE_SEED,
    cumulative_trapezoid,
    gaussian_suite,
    gn_ratio,
    hardy_type_ratio,
    morawetz_density,
    time_average,
)
from .model import (
    CoefficientFamily,
    GridSpec,
    ModelSpec,
    PotentialSpec,
    StateField,
    WeightSpec,
    default_mollified,
    gaussian,
    odd_gaussian_pair,
    odd_xgaussian,
    scale_to_h1,
)
from .operators import CoercivityReport, coercivity_sweep
from .solver import SolverConfig, Trajectory, evolve

logger = logging.getLogger(__name__)

THEOREMS = (
    "thm1_case1",
    "thm1_case2",
    "thm1_case3",
    "thm_odd_case1",
    "thm_odd_case2",
    "thm_potential_1",
    "thm_potential_2",
)
ODD_THEOREMS = ("thm_odd_case1", "thm_odd_case2", "thm_potential_1", "thm_potential_2")
# subsequence (liminf-type) conclusions versus full limits
SUBSEQUENCE_THEOREMS = ("thm1_case1", "thm1_case2", "thm1_case3", "thm_potential_1")
INITIAL_FAMILIES = ("odd_gaussian_pair", "odd_xgaussian", "gaussian", "zero")
BOUND_FORMS = ("R/T + R^-b", "R/T + R^-2")

# frozen regression thresholds
FULL_LIMIT_FACTOR = 0.2
SUBSEQUENCE_FACTOR = 0.5
TERMINAL_WINDOW = 10.0
PLATEAU_FRACTION = 0.1
SPREAD_LIMIT = 10.0
DOUBLING_LIMIT = 2.0


def coefficient_classes(fam: CoefficientFamily) -> set[str]:
    """Which of the (K1)-(K4) conditions a tagged family satisfies (constant 1).

    Every tagged family obeys |K| <= |x|^{-b}; the decaying ones also obey the
    stronger envelopes, and positive decreasing ones are (K1).
    """
    if fam.tag == "zero":
        return set()
    classes = {"K2"}
    if fam.tag in ("K3_decay", "K4_decay"):
        classes.add("K3")
    if fam.tag == "K4_decay":
        classes.add("K4")
    if fam.sign > 0:
        classes.add("K1")
    return classes


@dataclass(frozen=True)
class ScenarioConfig:
    theorem_tag: str
    model: ModelSpec
    initial_family: str = "odd_gaussian_pair"
    center: float = 1.0
    width: float = 1.0
    epsilon_small: float | None = None
    interval: tuple[float, float] = (-2.0, 2.0)
    horizons: tuple[float, ...] = ()
    radii: tuple[float, ...] = ()
    decay_factor: float | None = None

    def __post_init__(self):
        validate_hypotheses(self)

    @property
    def full_limit(self) -> bool:
        return self.theorem_tag not in SUBSEQUENCE_THEOREMS

    @property
    def odd(self) -> bool:
        return self.theorem_tag in ODD_THEOREMS

    @property
    def threshold(self) -> float:
        if self.decay_factor is not None:
            return self.decay_factor
        return FULL_LIMIT_FACTOR if self.full_limit else SUBSEQUENCE_FACTOR

    @property
    def kernel(self) -> str:
        classes = coefficient_classes(self.model.K)
        tag = self.theorem_tag
        if tag in ("thm1_case1", "thm_odd_case1"):
            return "xKprime_over_1px"
        if tag == "thm1_case2":
            return "absx_minus_b"
        if tag == "thm1_case3":
            return "absx_decay"
        if tag == "thm_odd_case2":
            return "alpha4_absx"
        if tag == "thm_potential_1":
            return "absx_minus_b" if self.model.sigma > 2 - self.model.b else "absx_decay"
        return "xKprime_over_1px" if "K1" in classes else "alpha4_absx"

    @property
    def bound_form(self) -> str:
        return "R/T + R^-b" if self.kernel == "absx_minus_b" else "R/T + R^-2"


def validate_hypotheses(cfg: ScenarioConfig) -> None:
    """Reject (theorem, sigma, b, K, V, data) combinations outside the stated ranges."""
    tag, m = cfg.theorem_tag, cfg.model
    if tag not in THEOREMS:
        raise ValidationError(f"unknown theorem tag {tag!r}; expected one of {THEOREMS}")
    if cfg.initial_family not in INITIAL_FAMILIES:
        raise ValidationError(f"unknown initial family {cfg.initial_family!r}")
    sigma, b = m.sigma, m.b
    classes = coefficient_classes(m.K)
    small = cfg.epsilon_small is not None

    def need(cond, msg):
        if not cond:
            raise ValidationError(f"{tag}: {msg}")

    if tag in ODD_THEOREMS:
        need(cfg.initial_family in ("odd_gaussian_pair", "odd_xgaussian", "zero"),
             "odd theorems need odd initial data (odd_gaussian_pair or odd_xgaussian)")
    if tag.startswith("thm_potential"):
        need(m.mu > 0, "requires mu > 0")
        need(m.V.tag != "zero", "requires a potential satisfying (V)")
        need(small, "requires small data (epsilon_small)")
    else:
        need(m.mu == 0, "requires mu = 0")

    if tag == "thm1_case1":
        need("K1" in classes, "requires K satisfying (K1)")
    elif tag == "thm1_case2":
        need("K2" in classes, "requires K satisfying (K2)")
        need(sigma > 2 - b, f"requires sigma > 2 - b (got sigma={sigma}, 2-b={2 - b})")
        need(small, "requires small data (epsilon_small)")
    elif tag == "thm1_case3":
        need("K3" in classes, "requires K satisfying (K3)")
        need(sigma <= 2 - b, f"requires sigma <= 2 - b (got sigma={sigma}, 2-b={2 - b})")
        need(small, "requires small data (epsilon_small)")
    elif tag == "thm_odd_case1":
        need("K1" in classes, "requires K satisfying (K1)")
    elif tag == "thm_odd_case2":
        need("K4" in classes, "requires K satisfying (K4)")
        need(small, "requires small data (epsilon_small)")
    elif tag == "thm_potential_1":
        need((sigma > 2 - b and "K2" in classes) or (sigma <= 2 - b and "K3" in classes),
             "requires sigma > 2 - b with (K2), or sigma <= 2 - b with (K3)")
    elif tag == "thm_potential_2":
        need(bool({"K1", "K4"} & classes), "requires K satisfying (K1) or (K4)")

    if cfg.epsilon_small is not None and not cfg.epsilon_small > 0:
        raise ValidationError(f"{tag}: epsilon_small must be positive")
    if any(T <= 0 for T in cfg.horizons) or any(R <= 0 for R in cfg.radii):
        raise ValidationError(f"{tag}: horizons and radii must be positive")


def initial_state(cfg: ScenarioConfig, grid: GridSpec) -> StateField:
    fam = cfg.initial_family
    if fam == "zero":
        return StateField.zeros(grid)
    if fam == "odd_gaussian_pair":
        u = odd_gaussian_pair(grid, cfg.center, cfg.width)
    elif fam == "odd_xgaussian":
        u = odd_xgaussian(grid, cfg.width)
    else:
        u = gaussian(grid, cfg.center, cfg.width)
    if cfg.epsilon_small is not None:
        u = scale_to_h1(u, cfg.epsilon_small)
    return u


# ---------------------------------------------------------------------------
# sequence tools
# ---------------------------------------------------------------------------


@dataclass
class SubsequenceScan:
    envelope: np.ndarray
    candidates: list[float]
    mean_spacing: float
    envelope_slope: float

    def __iter__(self):
        # unpacks as (envelope, candidates)
        return iter((self.envelope, self.candidates))


def subsequence_scan(series) -> SubsequenceScan:
    """Running minimum of a (t, value) series and the times of strict new minima.

    ``envelope_slope`` is the least-squares slope of log(envelope) against
    log(t) over the positive samples (nan when undefined).
    """
    pairs = list(series)
    if not pairs:
        raise QueryError("subsequence_scan needs a nonempty series")
    t = np.array([p[0] for p in pairs], dtype=float)
    v = np.array([p[1] for p in pairs], dtype=float)
    env = np.minimum.accumulate(v)
    candidates = [float(t[0])]
    best = v[0]
    for ti, vi in zip(t[1:], v[1:]):
        if vi < best:
            best = vi
            candidates.append(float(ti))
    spacing = float(np.mean(np.diff(candidates))) if len(candidates) > 1 else float("nan")
    ok = (t > 0) & (env > 0)
    slope = float("nan")
    if np.count_nonzero(ok) >= 2 and np.ptp(np.log(t[ok])) > 0:
        slope = float(np.polyfit(np.log(t[ok]), np.log(env[ok]), 1)[0])
    return SubsequenceScan(env, candidates, spacing, slope)


@dataclass
class FitResult:
    C: float
    ratios: list[tuple[float, float, float]]
    spread: float
    doubling_change: float
    verified: bool


def _form_value(form: str, T: float, R: float, b: float) -> float:
    if form == "R/T + R^-b":
        return R / T + R ** (-b)
    if form == "R/T + R^-2":
        return R / T + R ** (-2.0)
    raise QueryError(f"unknown bound form {form!r}; expected one of {BOUND_FORMS}")


def fit_bound(averages, form: str = "R/T + R^-b", b: float = 0.5) -> FitResult:
    """Smallest C with value <= C * form(T, R) over all (T, R, value) triples.

    ``verified`` needs at least four pairs, a finite max/min ratio spread below
    ``SPREAD_LIMIT`` and a max ratio that moves by less than ``DOUBLING_LIMIT``
    whenever T doubles at fixed R.
    """
    triples = [(float(T), float(R), float(v)) for T, R, v in averages]
    if not triples:
        raise QueryError("fit_bound needs at least one (T, R, value) triple")
    ratios = [(T, R, v / _form_value(form, T, R, b)) for T, R, v in triples]
    rs = np.array([r for _, _, r in ratios])
    C = float(np.max(rs))
    positive = rs[rs > 0]
    spread = float(np.max(positive) / np.min(positive)) if positive.size else float("nan")
    lookup = {(T, R): r for T, R, r in ratios}
    changes = []
    for (T, R), r in lookup.items():
        r2 = lookup.get((2 * T, R))
        if r2 is not None and r > 0 and r2 > 0:
            changes.append(max(r2 / r, r / r2))
    change = float(max(changes)) if changes else float("nan")
    verified = (
        len(triples) >= 4
        and math.isfinite(spread)
        and spread < SPREAD_LIMIT
        and math.isfinite(change)
        and change < DOUBLING_LIMIT
    )
    return FitResult(C, ratios, spread, change, verified)


def decade_increments(times, cumulative, span: float) -> list[float]:
    """Increments of a running integral over consecutive windows of length ``span``."""
    times = np.asarray(times)
    edges = np.arange(times[0], times[-1] + 1e-9, span)
    vals = np.interp(edges, times, cumulative)
    return [float(v) for v in np.diff(vals)]


# ---------------------------------------------------------------------------
# scenario runner
# ---------------------------------------------------------------------------


@dataclass
class DecayReport:
    theorem_tag: str
    times: np.ndarray
    l2_local: np.ndarray
    linf_local: np.ndarray
    envelope: np.ndarray
    candidates: list[float]
    h1_alpha_running: np.ndarray
    plateau_M: float
    last_window_fraction: float
    morawetz: list[tuple[float, float, float]]
    fit: FitResult | None
    morawetz_cumulative_increments: list[float]
    initial_linf: float
    initial_l2: float
    terminal_linf_max: float
    envelope_min_l2: float
    verdict: dict
    valid: bool = True
    breach_time: float | None = None
    even_norm_max: float = 0.0
    thresholds: dict = field(default_factory=dict)
    note: str = ""
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.valid and all(v for v in self.verdict.values() if v is not None)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "trajectory"}
        for k, v in d.items():
            if isinstance(v, np.ndarray):
                d[k] = v.tolist()
        d["passed"] = self.passed
        return d


def _probe_for(cfg: ScenarioConfig, grid: GridSpec) -> Probe:
    if cfg.odd and cfg.theorem_tag != "thm_potential_1":
        weight = WeightSpec("bounded")
        cutoff = None
    else:
        R = max(cfg.radii) if cfg.radii else min(8.0, grid.L / 2)
        weight = WeightSpec("cutoff_R", R)
        cutoff = R
    return Probe(weight=weight, interval=tuple(cfg.interval), cutoff_R=cutoff)


def run_scenario(cfg: ScenarioConfig, solver_cfg: SolverConfig, grid: GridSpec) -> DecayReport:
    """Evolve the scenario's initial data and grade the decay prediction.

    Odd theorems always run with ``enforce_odd``.  A tail-mass abort yields an
    invalid report built from the partial trajectory.
    """
    u0 = initial_state(cfg, grid)
    if cfg.odd and not solver_cfg.enforce_odd:
        solver_cfg = replace(solver_cfg, enforce_odd=True)
    valid, breach = True, None
    try:
        traj = evolve(u0, cfg.model, solver_cfg, _probe_for(cfg, grid))
    except BoundaryContaminationError as err:
        traj = err.trajectory
        valid, breach = False, err.t
        logger.warning("%s: invalid run, %s", cfg.theorem_tag, err)

    t = traj.times
    l2 = traj.series("l2_local")
    linf = traj.series("linf_local")
    scan = subsequence_scan(zip(t, l2))
    h1a = cumulative_trapezoid(t, traj.series("h1_alpha"))
    total = h1a[-1]
    T_end = t[-1]
    window = t >= T_end - TERMINAL_WINDOW
    k0 = int(np.argmax(window))
    last_fraction = float((total - h1a[k0]) / total) if total > 0 else 0.0
    terminal = float(np.max(linf[window]))

    # Morawetz averages over the (T, R) grid that fits inside the run
    morawetz = []
    fit = None
    increments: list[float] = []
    if traj.snapshots:
        horizons = [T for T in (cfg.horizons or (T_end,)) if T <= T_end * (1 + 1e-12)]
        radii = list(cfg.radii or (min(8.0, grid.L / 2),))
        for R in radii:
            q = MorawetzQuery(max(horizons) if horizons else T_end, R, cfg.kernel)
            times, dens = morawetz_density(traj.snapshots, q, cfg.model)
            for T in horizons:
                morawetz.append((T, R, time_average(times, dens, T)))
        if len(morawetz) >= 4 and not cfg.full_limit:
            fit = fit_bound(morawetz, cfg.bound_form, cfg.model.b)
        q = MorawetzQuery(T_end, max(radii), cfg.kernel)
        times, dens = morawetz_density(traj.snapshots, q, cfg.model)
        increments = decade_increments(times, cumulative_trapezoid(times, dens), TERMINAL_WINDOW)

    factor = cfg.threshold
    zero_run = bool(np.all(linf == 0) and np.all(l2 == 0))
    if cfg.full_limit:
        decay = zero_run or terminal < factor * linf[0]
        mode = "lim"
    else:
        decay = zero_run or float(scan.envelope[-1]) < factor * l2[0]
        mode = "liminf"
    plateau = None
    if cfg.odd:
        plateau = zero_run or last_fraction < PLATEAU_FRACTION
    verdict = {
        "decay": bool(decay),
        "plateau": plateau,
        "morawetz_fit": None if fit is None else bool(fit.verified),
    }
    note = (
        f"observed {'terminal-window decay' if mode == 'lim' else 'envelope decrease'}; "
        f"thresholds are frozen regression values, the theorem asserts only the {mode} mode"
    )
    return DecayReport(
        theorem_tag=cfg.theorem_tag,
        times=t,
        l2_local=l2,
        linf_local=linf,
        envelope=scan.envelope,
        candidates=scan.candidates,
        h1_alpha_running=h1a,
        plateau_M=float(total),
        last_window_fraction=last_fraction,
        morawetz=morawetz,
        fit=fit,
        morawetz_cumulative_increments=increments,
        initial_linf=float(linf[0]),
        initial_l2=float(l2[0]),
        terminal_linf_max=terminal,
        envelope_min_l2=float(scan.envelope[-1]),
        verdict=verdict,
        valid=valid,
        breach_time=breach,
        even_norm_max=float(np.max(traj.series("even_norm"))),
        thresholds={"decay_factor": factor, "terminal_window": TERMINAL_WINDOW,
                    "plateau_fraction": PLATEAU_FRACTION, "spread_limit": SPREAD_LIMIT,
                    "doubling_limit": DOUBLING_LIMIT},
        note=note,
        trajectory=traj,
    )


# ---------------------------------------------------------------------------
# identity residual study
# ---------------------------------------------------------------------------


@dataclass
class ResidualRow:
    dt: float
    residual: float
    tail_mass: float


@dataclass
class IdentityStudy:
    weight: str
    mu: float
    rows: list[ResidualRow]
    ratio: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def identity_residual(traj: Trajectory) -> float:
    """max_t |dI/dt + rhs_sum| / max_t |rhs_sum| with a second-order difference in t."""
    t = traj.times
    I = traj.series("I")
    S = np.array([r.rhs.total for r in traj.records])
    dI = np.gradient(I, t, edge_order=2)
    scale = np.max(np.abs(S))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(dI[1:-1] + S[1:-1])) / scale)


def identity_residual_study(
    weight: str = "bounded",
    dt: float = 1e-3,
    mu: float = 0.0,
    mollify: float = 4.0,
    grid: GridSpec | None = None,
    stride: int = 16,
    T: float = 2.0,
    R: float = 8.0,
    potential: PotentialSpec | None = None,
    tolerance: float = 1e-3,
    ratio_band: tuple[float, float] = (3.0, 5.0),
) -> IdentityStudy:
    """Check -dI/dt = rhs along runs at dt and dt/2 with mollified K1.

    The bounded weight's identity assumes odd data, so the odd Gaussian pair
    is used for both weights.  The differentiation step is stride*dt.
    """
    if grid is None:
        grid = GridSpec(40.0, 16384)
    base = ModelSpec(1.0, 0.5, mu=mu, K=CoefficientFamily("K1_pure"),
                     V=(potential or PotentialSpec("inverse_power", 0.0, 3.0)) if mu else PotentialSpec())
    model = default_mollified(base, grid, mollify) if mollify > 0 else base
    w = WeightSpec("bounded") if weight == "bounded" else WeightSpec("cutoff_R", R)
    if weight not in ("bounded", "cutoff"):
        raise ConfigurationError(f"weight must be 'bounded' or 'cutoff', got {weight!r}")
    u0 = odd_gaussian_pair(grid)
    rows = []
    for step in (dt, dt / 2):
        cfg = SolverConfig(step, T, enforce_odd=(weight == "bounded"), observer_stride=stride,
                           tail_abort_threshold=1e-6, keep_snapshots=False)
        traj = evolve(u0, model, cfg, Probe(weight=w))
        rows.append(ResidualRow(step, identity_residual(traj), traj.records[-1].tail_mass_fraction))
    ratio = rows[0].residual / rows[1].residual if rows[1].residual > 0 else float("inf")
    passed = rows[0].residual < tolerance and ratio_band[0] <= ratio <= ratio_band[1]
    return IdentityStudy(weight, mu, rows, float(ratio), bool(passed))


# ---------------------------------------------------------------------------
# interpolation inequalities and coercivity
# ---------------------------------------------------------------------------


@dataclass
class GNStudy:
    b: float
    sample_count: int
    sup_coarse: float
    sup_fine: float
    relative_change: float
    hardy_sup: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def gn_study(b: float = 0.5, sample_count: int = 100, seed: int = SUITE_SEED,
             grid: GridSpec | None = None, tolerance: float = 0.05) -> GNStudy:
    """Empirical sup of the GN ratio over the suite at N and 2N points."""
    if grid is None:
        grid = GridSpec(40.0, 4096)
    suite = gaussian_suite(grid.L, sample_count, seed)
    if not suite:
        raise QueryError("gn_study needs at least one sample")
    fine = grid.refined(2)
    coarse_vals = [gn_ratio(m.evaluate(grid), b) for m in suite]
    fine_vals = [gn_ratio(m.evaluate(fine), b) for m in suite]
    hardy = max(hardy_type_ratio(m.evaluate(grid), b) for m in suite)
    s0, s1 = max(coarse_vals), max(fine_vals)
    change = abs(s1 - s0) / s1
    passed = math.isfinite(s0) and math.isfinite(s1) and change < tolerance
    return GNStudy(b, len(suite), float(s0), float(s1), float(change), float(hardy), bool(passed))


@dataclass
class InequalityReport:
    gn: GNStudy
    coercivity: CoercivityReport
    coercivity_potential: CoercivityReport
    j_tolerance: float

    @property
    def passed(self) -> bool:
        return (self.gn.passed and self.coercivity.coercive
                and self.coercivity_potential.j_min >= -self.j_tolerance)

    def to_dict(self) -> dict:
        return {"gn": self.gn.to_dict(), "coercivity": self.coercivity.to_dict(),
                "coercivity_potential": self.coercivity_potential.to_dict(),
                "j_tolerance": self.j_tolerance, "passed": self.passed}


def inequality_suite(b: float = 0.5, sample_count: int = 100, seed: int = SUITE_SEED,
                     potential: PotentialSpec | None = None, mu: float = 0.01,
                     grid: GridSpec | None = None, j_tolerance: float = 1e-10) -> InequalityReport:
    """GN stability, coercivity of B and the sign of J in B_V over one random suite."""
    pot = potential or PotentialSpec("yukawa", 0.5, 1.0)
    return InequalityReport(
        gn=gn_study(b, sample_count, seed, grid),
        coercivity=coercivity_sweep("B", None, 0.0, sample_count, seed, grid),
        coercivity_potential=coercivity_sweep("B_V", pot, mu, sample_count, seed, grid),
        j_tolerance=j_tolerance,
    )
