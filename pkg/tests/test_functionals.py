import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import erf

from inlsdecay.errors import ConfigurationError, DegenerateInputError, QueryError, ShapeError
from inlsdecay.functionals import (
    DiagnosticsRecord,
    MorawetzQuery,
    Observer,
    Probe,
    cumulative_trapezoid,
    energy,
    energy_terms,
    even_part_norm,
    gaussian_suite,
    gn_ratio,
    hardy_type_ratio,
    local_norms,
    mass,
    morawetz_average,
    morawetz_density,
    quadrature,
    record_fields,
    spectral_derivative,
    tail_mass,
    time_average,
    virial,
    virial_rhs,
    weighted_h1,
    weighted_l2,
)
from inlsdecay.model import (
    CoefficientFamily,
    ModelSpec,
    PotentialSpec,
    StateField,
    WeightSpec,
    eval_phi,
    make_grid,
    odd_gaussian_pair,
)

FREE = ModelSpec(1.0, 0.5, K=CoefficientFamily("zero"))


def field(grid, f):
    return StateField(grid, f(grid.x))


def qinf(f, points=None):
    """Adaptive quadrature over the real line, split at the origin."""
    left = quad(f, -np.inf, 0, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    right = quad(f, 0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    return left + right


# --- quadrature and derivatives -------------------------------------------


def test_quadrature_basic(grid):
    assert quadrature(np.zeros(grid.N), grid) == 0.0
    g1 = make_grid(1.0, 64)
    assert quadrature(np.ones(64), g1) == pytest.approx(2.0, rel=1e-15)
    assert quadrature(np.exp(-2 * grid.x**2), grid) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    with pytest.raises(ShapeError):
        quadrature(np.ones(3), grid)


def test_spectral_derivative_gaussian(grid):
    u = field(grid, lambda x: np.exp(-(x**2)))
    du = spectral_derivative(u).values
    assert np.max(np.abs(du - (-2 * grid.x * np.exp(-(grid.x**2))))) < 1e-10


@pytest.mark.parametrize("m", [1, 3, -2])
def test_spectral_derivative_single_mode(grid, m):
    kx = math.pi * m / grid.L
    u = field(grid, lambda x: np.exp(1j * kx * x))
    assert np.allclose(spectral_derivative(u).values, 1j * kx * u.values, atol=1e-11)


def test_spectral_derivative_constant(grid):
    assert np.max(np.abs(spectral_derivative(StateField(grid, np.ones(grid.N))).values)) < 1e-12


# --- mass and energy ------------------------------------------------------


def test_mass(grid):
    assert mass(StateField.zeros(grid)) == 0.0
    u = field(grid, lambda x: np.exp(-(x**2)))
    assert mass(u) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    assert mass(u * (2 - 1j)) == pytest.approx(5 * mass(u), rel=1e-14)


def test_energy_zero(grid):
    assert energy(StateField.zeros(grid), ModelSpec(1.0, 0.5)) == 0.0


@pytest.mark.parametrize("m", [1, 4])
def test_energy_single_mode(grid, m):
    kx = math.pi * m / grid.L
    u = field(grid, lambda x: np.exp(1j * kx * x))
    assert energy(u, FREE) == pytest.approx(kx**2 * mass(u), rel=1e-12)


def test_energy_odd_pair_against_quad(grid):
    def f(x):
        return math.exp(-((x - 1) ** 2)) - math.exp(-((x + 1) ** 2))

    def fx(x):
        return -2 * (x - 1) * math.exp(-((x - 1) ** 2)) + 2 * (x + 1) * math.exp(-((x + 1) ** 2))

    kin = qinf(lambda x: fx(x) ** 2)
    nl = qinf(lambda x: abs(x) ** -0.5 * f(x) ** 4) / 2
    parts = energy_terms(odd_gaussian_pair(grid), ModelSpec(1.0, 0.5))
    assert parts.kinetic == pytest.approx(kin, rel=1e-10)
    assert parts.nonlinear == pytest.approx(nl, rel=1e-6)
    assert parts.potential == 0.0


def test_energy_potential_term(grid):
    pot = PotentialSpec("inverse_power", 0.0, 3.0)
    model = ModelSpec(1.0, 0.5, mu=0.3, K=CoefficientFamily("zero"), V=pot)
    u = field(grid, lambda x: np.exp(-(x**2)))
    ref = 0.3 * qinf(lambda x: (1 + abs(x)) ** -3 * math.exp(-2 * x * x))
    # rectangle rule across the kink of (1+|x|)^{-3} at 0: O(h^2) error
    assert energy_terms(u, model).potential == pytest.approx(ref, rel=3e-4)


# --- virial functional and identity terms ---------------------------------


def test_virial_real_field(grid):
    assert virial(odd_gaussian_pair(grid), WeightSpec("bounded")) == pytest.approx(0.0, abs=1e-15)


def test_virial_centered_plane_wave(grid):
    u = field(grid, lambda x: np.exp(1j * x - x**2))
    assert virial(u, WeightSpec("bounded")) == pytest.approx(0.0, abs=1e-13)


@pytest.mark.parametrize("w", [WeightSpec("bounded"), WeightSpec("cutoff_R", 2.0)])
def test_virial_shifted_plane_wave_against_quad(grid, w):
    u = field(grid, lambda x: np.exp(1j * x - (x - 1) ** 2))
    ref = -qinf(lambda x: eval_phi(w, x) * math.exp(-2 * (x - 1) ** 2))
    assert virial(u, w) == pytest.approx(ref, rel=1e-6)


def test_virial_rejects_decay_weight(grid):
    with pytest.raises(ConfigurationError):
        virial(StateField.zeros(grid), WeightSpec("alpha"))


def test_virial_rhs_zero(grid):
    assert virial_rhs(StateField.zeros(grid), ModelSpec(1.0, 0.5), WeightSpec("bounded")).total == 0.0


def test_virial_rhs_free_bounded_against_quad(grid):
    def u(x):
        return x * math.exp(-x * x)

    def ux(x):
        return (1 - 2 * x * x) * math.exp(-x * x)

    terms = virial_rhs(field(grid, lambda x: x * np.exp(-(x**2))), FREE, WeightSpec("bounded"))
    kin = 2 * qinf(lambda x: (1 + abs(x)) ** -2 * ux(x) ** 2)
    phi3 = -0.5 * qinf(lambda x: 6 * (1 + abs(x)) ** -4 * u(x) ** 2)
    assert terms.kinetic == pytest.approx(kin, rel=5e-4)
    assert terms.phi3 == pytest.approx(phi3, rel=5e-4)
    assert terms.K1 == terms.K2 == terms.V == 0.0


def test_virial_rhs_nonlinear_cutoff_against_quad(grid):
    R, b, sigma = 4.0, 0.5, 1.0
    w = WeightSpec("cutoff_R", R)

    def f(x):
        return math.exp(-((x - 1) ** 2)) - math.exp(-((x + 1) ** 2))

    model = ModelSpec(sigma, b)
    terms = virial_rhs(odd_gaussian_pair(grid), model, w)
    c = 2 / (2 * sigma + 2)
    k1 = -(c - 1) * qinf(lambda x: eval_phi(w, x, 1) * abs(x) ** -b * f(x) ** 4)
    # phi K' = phi(x) * (-b) sign(x) |x|^{-b-1}
    k2 = -c * qinf(lambda x: eval_phi(w, x) * (-b) * math.copysign(1, x) * abs(x) ** (-b - 1) * f(x) ** 4)
    assert terms.K1 == pytest.approx(k1, rel=1e-6)
    assert terms.K2 == pytest.approx(k2, rel=1e-6)


def test_virial_rhs_potential_against_quad(grid):
    pot = PotentialSpec("yukawa", 0.5, 1.0)
    mu = 0.2
    model = ModelSpec(1.0, 0.5, mu=mu, K=CoefficientFamily("zero"), V=pot)
    w = WeightSpec("bounded")
    terms = virial_rhs(odd_gaussian_pair(grid), model, w)

    def f(x):
        return math.exp(-((x - 1) ** 2)) - math.exp(-((x + 1) ** 2))

    # phi V' = x/(1+|x|) * V'(x) and x V' = -V (m + n|x|)
    def integrand(x):
        ax = abs(x)
        xvp = -(ax**-0.5) * math.exp(-ax) * (0.5 + ax)
        return xvp / (1 + ax) * f(x) ** 2

    assert terms.V == pytest.approx(-mu * qinf(integrand), rel=1e-5)


@pytest.mark.parametrize("w", [WeightSpec("bounded"), WeightSpec("cutoff_R", 6.0)])
def test_parity_half_line(grid, w):
    u = odd_gaussian_pair(grid, 1.5, 0.8, amplitude=1 + 0.5j)
    u = u.with_values(u.values * np.exp(0.7j * grid.x**2))
    model = ModelSpec(1.0, 0.5, mu=0.1, V=PotentialSpec("inverse_power", 0.0, 3.0))
    full = virial_rhs(u, model, w)
    obs = Observer(grid, model, Probe(weight=w))
    half = grid.x > 0
    # every integrand is even for odd u: the full-line sum equals twice the half-line sum
    from inlsdecay.functionals import _dx, _rhs

    v = u.values
    ux = _dx(v, grid)
    half_terms = _rhs(v[half], ux[half], grid.h, 1.0, 0.1,
                      type(obs.wa)(obs.wa.phi[half], obs.wa.phi_x[half], obs.wa.phi_xxx[half]),
                      obs.K[half], obs.Kp[half], obs.Vp[half])
    for name in ("kinetic", "phi3", "K1", "K2", "V"):
        assert getattr(full, name) == pytest.approx(2 * getattr(half_terms, name), rel=1e-12, abs=1e-15)


# --- weighted and local norms ---------------------------------------------


def test_weighted_h1_constant(grid):
    one = StateField(grid, np.ones(grid.N))
    exact = 2.0 / 3.0 * (1 - 41.0**-3)
    assert weighted_h1(one) == pytest.approx(exact, rel=5e-4)
    assert weighted_l2(one) == pytest.approx(exact, rel=5e-4)
    assert weighted_h1(one * 3) == pytest.approx(9 * weighted_h1(one), rel=1e-14)
    assert weighted_h1(StateField.zeros(grid)) == 0.0


def test_weighted_h1_against_quad(grid):
    u = field(grid, lambda x: x * np.exp(-(x**2)))
    ref = qinf(lambda x: (1 + abs(x)) ** -4 * (x * x + (1 - 2 * x * x) ** 2) * math.exp(-2 * x * x))
    assert weighted_h1(u) == pytest.approx(ref, rel=1e-3)


@pytest.mark.parametrize("N", [2048, 4096])
def test_kink_quadrature_second_order(N):
    # the only error left is the rectangle rule at the kink of (1+|x|)^{-4}
    ref = qinf(lambda x: (1 + abs(x)) ** -4 * (x * x + (1 - 2 * x * x) ** 2) * math.exp(-2 * x * x))
    errs = []
    for n in (N, 2 * N):
        g = make_grid(40.0, n)
        errs.append(abs(weighted_h1(field(g, lambda x: x * np.exp(-(x**2)))) - ref))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def test_local_norms():
    g = make_grid(32.0, 4096)  # +-1 fall on cell boundaries
    u = field(g, lambda x: np.exp(-(x**2)))
    l2, linf = local_norms(u, (-1.0, 1.0))
    assert l2 == pytest.approx(math.sqrt(math.sqrt(math.pi / 2) * erf(math.sqrt(2))), rel=1e-5)
    assert linf == pytest.approx(math.exp(-((g.h / 2) ** 2)), rel=1e-14)
    assert local_norms(StateField.zeros(g), (-1, 1)) == (0.0, 0.0)


def test_local_norms_errors(grid):
    with pytest.raises(DegenerateInputError):
        local_norms(StateField.zeros(grid), (0.001, 0.002))
    with pytest.raises(QueryError):
        local_norms(StateField.zeros(grid), (-50, 1))


def test_tail_mass(grid):
    assert tail_mass(StateField.zeros(grid)) == 0.0
    outer = np.where(np.abs(grid.x) > 37, 1.0, 0.0)
    assert tail_mass(StateField(grid, outer)) == 1.0
    assert tail_mass(field(grid, lambda x: np.exp(-(x**2)))) < 1e-100


def test_even_part_norm(grid):
    assert even_part_norm(odd_gaussian_pair(grid)) == 0.0
    g = field(grid, lambda x: np.exp(-(x**2)))
    assert even_part_norm(g) == pytest.approx(math.sqrt(mass(g)), rel=1e-14)


# --- observer -------------------------------------------------------------


def test_observer_matches_standalone(grid):
    model = ModelSpec(1.0, 0.5, mu=0.1, V=PotentialSpec("yukawa", 0.5, 1.0))
    u = odd_gaussian_pair(grid, amplitude=0.7j)
    u = u.with_values(u.values * np.exp(0.3j * grid.x))
    probe = Probe(weight=WeightSpec("bounded"), cutoff_R=8.0)
    rec = Observer(grid, model, probe).record(u.values, 0.0)
    assert rec.mass == pytest.approx(mass(u), rel=1e-14)
    assert rec.energy == pytest.approx(energy(u, model), rel=1e-13)
    assert rec.I == pytest.approx(virial(u, WeightSpec("bounded")), rel=1e-13)
    assert rec.I_cutoff == pytest.approx(virial(u, WeightSpec("cutoff_R", 8.0)), rel=1e-13)
    assert rec.rhs.total == pytest.approx(virial_rhs(u, model, WeightSpec("bounded")).total, rel=1e-13)
    assert rec.h1_alpha == pytest.approx(weighted_h1(u), rel=1e-13)
    l2, linf = local_norms(u, (-2, 2))
    assert (rec.l2_local, rec.linf_local) == pytest.approx((l2, linf), rel=1e-13)


def test_zero_record_and_fields():
    rec = DiagnosticsRecord.zero()
    assert rec.mass == 0 and rec.rhs.total == 0
    assert record_fields()[:4] == ["t", "mass", "energy", "I"]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 99), st.sampled_from([None, 3.0, 10.0]))
def test_virial_bound_property(idx, R):
    g = make_grid(40.0, 2048)
    u = gaussian_suite(40.0, 100)[idx].evaluate(g)
    u = u.with_values(u.values * np.exp(0.4j * g.x))
    w = WeightSpec("bounded") if R is None else WeightSpec("cutoff_R", R)
    ux = spectral_derivative(u)
    bound = w.sup_norm * math.sqrt(mass(u)) * math.sqrt(mass(ux))
    assert abs(virial(u, w)) <= bound + 1e-10


# --- Morawetz ---------------------------------------------------------------


def _snapshots(u, times):
    return [StateField(u.grid, u.values, t) for t in times]


def test_time_average_constant(grid):
    model = ModelSpec(2.0, 0.5, K=CoefficientFamily("K2_pure", -1))
    u = odd_gaussian_pair(grid)
    snaps = _snapshots(u, np.linspace(0, 10, 11))
    q = MorawetzQuery(7.3, 5.0)
    single = morawetz_density(snaps[:1], q, model)[1][0]
    assert morawetz_average(snaps, q, model) == pytest.approx(single, rel=1e-13)


def test_time_average_zero(grid):
    snaps = _snapshots(StateField.zeros(grid), [0.0, 1.0, 2.0])
    assert morawetz_average(snaps, MorawetzQuery(2.0, 3.0), ModelSpec(1.0, 0.5)) == 0.0


def test_time_average_linear():
    t = np.linspace(0, 4, 9)
    assert time_average(t, 3 * t, 2.5) == pytest.approx(3.75, rel=1e-14)


@pytest.mark.parametrize(
    "times,T,R",
    [([0.0, 1.0], 2.0, 3.0), ([0.5, 3.0], 2.0, 3.0), ([0.0, 5.0], 2.0, 30.0)],
)
def test_morawetz_query_errors(grid, times, T, R):
    snaps = _snapshots(odd_gaussian_pair(grid), times)
    with pytest.raises(QueryError):
        morawetz_average(snaps, MorawetzQuery(T, R), ModelSpec(1.0, 0.5))


def test_morawetz_query_validation():
    with pytest.raises(QueryError):
        MorawetzQuery(1.0, 1.0, "unknown")
    with pytest.raises(QueryError):
        MorawetzQuery(0.0, 1.0)


@pytest.mark.parametrize("kernel", ["absx_minus_b", "absx_decay", "alpha4_absx", "xKprime_over_1px"])
def test_kernel_positivity(grid, kernel):
    u = odd_gaussian_pair(grid, amplitude=0.3 + 0.2j)
    snaps = _snapshots(u, [0.0, 1.0])
    assert morawetz_average(snaps, MorawetzQuery(1.0, 5.0, kernel), ModelSpec(1.0, 0.5)) >= 0


def test_morawetz_density_against_quad(grid):
    model = ModelSpec(2.0, 0.5)
    snaps = _snapshots(odd_gaussian_pair(grid), [0.0])
    val = morawetz_density(snaps, MorawetzQuery(1.0, 5.0, "absx_minus_b"), model)[1][0]

    def f(x):
        return math.exp(-((x - 1) ** 2)) - math.exp(-((x + 1) ** 2))

    ref = 2 * quad(lambda x: x**-0.5 * f(x) ** 6, 0, 5, limit=200)[0]
    assert val == pytest.approx(ref, rel=1e-6)


def test_cumulative_trapezoid_monotone():
    t = np.linspace(0, 3, 31)
    c = cumulative_trapezoid(t, np.exp(-t))
    assert np.all(np.diff(c) >= 0)
    assert c[-1] == pytest.approx(1 - math.exp(-3), rel=1e-3)


# --- suite and inequality ratios -------------------------------------------


def test_suite_deterministic():
    a, b = gaussian_suite(40.0, 5), gaussian_suite(40.0, 5)
    for m1, m2 in zip(a, b):
        assert np.array_equal(m1.centers, m2.centers) and np.array_equal(m1.amplitudes, m2.amplitudes)
    m = a[0]
    assert np.all(np.abs(m.centers) <= 10) and np.all((m.widths >= 0.5) & (m.widths <= 2))


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_gn_ratio_dilation_invariant(lam):
    g = make_grid(40.0, 8192)
    # odd profiles keep |x|^{-b} |u|^p smooth enough for the rectangle rule
    base = gn_ratio(StateField(g, g.x * np.exp(-(g.x**2))), 0.5)
    y = lam * g.x
    scaled = gn_ratio(StateField(g, 3.0 * y * np.exp(-(y**2))), 0.5)
    assert scaled == pytest.approx(base, rel=1e-6)


def test_hardy_ratio_bounded():
    g = make_grid(40.0, 4096)
    vals = [hardy_type_ratio(m.evaluate(g), 0.5) for m in gaussian_suite(40.0, 20)]
    assert max(vals) < 2.0 and min(vals) > 0
