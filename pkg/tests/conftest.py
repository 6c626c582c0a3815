import time

import numpy as np
import pytest

from gkslgrape.config import REFERENCE_PARAMS, STATE_PRESETS
from gkslgrape.grape import OptimizerConfig, gradient_descent, initial_guess_reference, objective_assemble
from gkslgrape.model import ModelParams, build_generators, rho_to_x

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_params():
    return ModelParams(**REFERENCE_PARAMS)


@pytest.fixture(scope="session")
def gens(ref_params):
    return {v: build_generators(ref_params, v) for v in ("V1", "V2")}


@pytest.fixture(scope="session")
def x0_A():
    return rho_to_x(STATE_PRESETS["scenario-A"])


@pytest.fixture(scope="session")
def x_bell():
    return rho_to_x(STATE_PRESETS["bell-phi"])


@pytest.fixture(scope="session")
def spec_target():
    return objective_assemble(rho_to_x(STATE_PRESETS["reference-target"]))


@pytest.fixture(scope="session")
def guess():
    return initial_guess_reference(5.0, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density_matrix(rng, rank=None, dim=4):
    rank = rank or dim
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


class _Runs:
    """Lazily computed optimization runs shared across test modules."""

    def __init__(self, gens, x0_A, x_bell, spec, guess):
        self._gens, self._x0 = gens, {"A": x0_A, "bell": x_bell}
        self._spec, self._guess = spec, guess
        self._cache = {}
        self.wall = {}

    def get(self, scenario, V, max_iters=20000):
        key = (scenario, V, max_iters)
        if key not in self._cache:
            cfg = OptimizerConfig(step=1.0, tol=1e-6, max_iters=max_iters)
            t0 = time.perf_counter()
            self._cache[key] = gradient_descent(self._gens[V], self._guess, self._x0[scenario],
                                                self._spec, cfg)
            self.wall[key] = time.perf_counter() - t0
        return self._cache[key]


@pytest.fixture(scope="session")
def runs(gens, x0_A, x_bell, spec_target, guess):
    return _Runs(gens, x0_A, x_bell, spec_target, guess)
