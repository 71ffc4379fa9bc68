import pytest

from inlsdecay.model import GridSpec, make_grid


@pytest.fixture(scope="session")
def grid():
    return make_grid(40.0, 4096)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(20.0, 512)


# Long simulations shared by the experiment and acceptance tests.  The box is
# wide enough that the tail-mass monitor stays far below 1e-8 up to T = 100.
BIG_GRID = (2048.0, 16384)


@pytest.fixture(scope="session")
def odd_k1_report():
    from inlsdecay.experiments import ScenarioConfig, run_scenario
    from inlsdecay.model import ModelSpec
    from inlsdecay.solver import SolverConfig

    cfg = ScenarioConfig("thm_odd_case1", ModelSpec(1.0, 0.5), interval=(-2.0, 2.0))
    solver = SolverConfig(0.005, 100.0, enforce_odd=True, observer_stride=50)
    return run_scenario(cfg, solver, GridSpec(*BIG_GRID))


@pytest.fixture(scope="session")
def k2_morawetz_report():
    from inlsdecay.experiments import ScenarioConfig, run_scenario
    from inlsdecay.model import CoefficientFamily, ModelSpec
    from inlsdecay.solver import SolverConfig

    model = ModelSpec(2.0, 0.5, K=CoefficientFamily("K2_pure", -1))
    cfg = ScenarioConfig("thm1_case2", model, epsilon_small=0.1,
                         horizons=(25.0, 50.0, 100.0), radii=(5.0, 10.0, 20.0))
    return run_scenario(cfg, SolverConfig(0.005, 100.0, observer_stride=50), GridSpec(*BIG_GRID))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
