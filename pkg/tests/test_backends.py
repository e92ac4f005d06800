"""Compiled core vs pure-Python backend: same pair, same answers."""

import math

import numpy as np
import pytest

from cycleshift.ode import available_backends, backend_name, integrate
from cycleshift.ode.fields import augmented_initial_state, variational_field
from cycleshift.problems import circle_field, vdp_field

needs_compiled = pytest.mark.skipif(
    "compiled" not in available_backends(),
    reason="extension core not built",
)

TOL = 1e-10


def test_backend_selection_reports_available():
    assert backend_name() in available_backends()
    assert "python" in available_backends()


@needs_compiled
@pytest.mark.parametrize("field,x0,span", [
    (circle_field(), [0.0, 1.0], (0.0, 2.0 * math.pi)),
    (circle_field(0.05), [0.3, 1.2], (0.0, 4.0)),
    (vdp_field(), [2.0, 0.0], (0.0, 6.6633)),
])
def test_backends_agree_on_endpoints(field, x0, span):
    a = integrate(field, span, x0, TOL, backend="compiled")
    b = integrate(field, span, x0, TOL, backend="python")
    scale = max(1.0, np.linalg.norm(b.endpoint()))
    assert np.linalg.norm(a.endpoint() - b.endpoint()) <= 10.0 * TOL * scale


@needs_compiled
def test_backends_agree_on_dense_values():
    span = (0.0, 2.0 * math.pi)
    a = integrate(circle_field(), span, [0.0, 1.0], TOL, backend="compiled")
    b = integrate(circle_field(), span, [0.0, 1.0], TOL, backend="python")
    ts = np.linspace(0.0, span[1], 101)
    assert np.max(np.linalg.norm(a.eval(ts) - b.eval(ts), axis=1)) <= 100.0 * TOL


@needs_compiled
def test_backends_agree_on_variational_flow():
    field = variational_field(circle_field())
    u0 = augmented_initial_state(np.array([0.0, 1.0]))
    a = integrate(field, (0.0, 2.0 * math.pi), u0, TOL, backend="compiled")
    b = integrate(field, (0.0, 2.0 * math.pi), u0, TOL, backend="python")
    assert np.linalg.norm(a.endpoint() - b.endpoint()) <= 100.0 * TOL


@needs_compiled
def test_compiled_step_grid_matches_python_step_count():
    # identical control constants: accepted-step counts should be close
    a = integrate(circle_field(), (0.0, 2.0 * math.pi), [0.0, 1.0], TOL, backend="compiled")
    b = integrate(circle_field(), (0.0, 2.0 * math.pi), [0.0, 1.0], TOL, backend="python")
    assert abs(len(a.times) - len(b.times)) <= max(3, 0.02 * len(b.times))
