"""Adjoint system, Floquet eigenfunctions, structural identities."""

import math

import numpy as np
import pytest

from cycleshift.cycle import find_limit_cycle, monodromy
from cycleshift.errors import (
    DefectiveSpectrumError,
    IllConditionedBasisError,
    UnsupportedSpectrumError,
)
from cycleshift.floquet import (
    AdjointSystem,
    adjoint_fundamental,
    floquet_basis,
    floquet_diagnostics,
    floquet_relation_defect,
)
from cycleshift.ode import VectorField, flow_with_sensitivity
from cycleshift.problems import circle_field


def _paper_z0(t):
    return np.array([math.cos(t), -math.sin(t)])


def _paper_z1(t):
    return math.exp(2.0 * t) * np.array([math.sin(t), math.cos(t)])


def test_adjoint_fundamental_identity_at_zero(paper):
    assert np.array_equal(adjoint_fundamental(paper.cycle, 0.0), np.eye(2))


def test_adjoint_fundamental_eigenvalues(paper):
    Z = adjoint_fundamental(paper.cycle, 2.0 * math.pi)
    eigs = np.sort(np.linalg.eigvals(Z).real)
    assert abs(eigs[0] - 1.0) <= 1e-6
    assert abs(eigs[1] - math.exp(4.0 * math.pi)) <= 1e-6 * math.exp(4.0 * math.pi)


def test_adjoint_transpose_inverse_identity(paper):
    cyc = paper.cycle
    for t in (cyc.period / 4.0, cyc.period / 2.0, cyc.period):
        Z = adjoint_fundamental(cyc, t)
        Y = flow_with_sensitivity(cyc.field, t, 0.0, cyc.anchor, 1e-12).sensitivity
        defect = np.linalg.norm(Z.T @ Y - np.eye(2))
        assert defect <= 1e-8 * max(1.0, np.linalg.norm(Z) * np.linalg.norm(Y))


def test_basis_closed_forms(paper, paper_basis):
    # substitution residual: the closed forms solve the adjoint equation
    adj = AdjointSystem(paper.cycle)
    for t in np.linspace(0.0, 2.0 * math.pi, 17):
        dz0 = np.array([-math.sin(t), -math.cos(t)])
        resid = dz0 - adj.rhs(t, _paper_z0(t))
        assert np.linalg.norm(resid) <= 1e-10
        dz1 = math.exp(2.0 * t) * np.array([
            2.0 * math.sin(t) + math.cos(t), 2.0 * math.cos(t) - math.sin(t)])
        resid = dz1 - adj.rhs(t, _paper_z1(t))
        assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(_paper_z1(t)))

    z0 = paper_basis.periodic_entry
    z1 = paper_basis.nonperiodic_entries[0]
    assert abs(z1.multiplier - math.exp(4.0 * math.pi)) <= 1e-6 * math.exp(4.0 * math.pi)
    for t in np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False):
        assert np.linalg.norm(z0.eval(t) - _paper_z0(t)) <= 1e-6 * (1.0 + np.linalg.norm(_paper_z0(t)))
        assert np.linalg.norm(z1.eval(t) - _paper_z1(t)) <= 1e-6 * (1.0 + np.linalg.norm(_paper_z1(t)))


def test_normalizations(paper, paper_basis):
    vel0 = paper.cycle.velocity(0.0)
    z0 = paper_basis.periodic_entry
    assert z0.initial() @ vel0 == pytest.approx(1.0, abs=1e-14)
    for e in paper_basis.nonperiodic_entries:
        assert abs(e.initial() @ vel0) <= 1e-8
        assert np.linalg.norm(e.initial()) == pytest.approx(1.0, abs=1e-12)
        nz = e.initial()[np.abs(e.initial()) > 1e-8]
        assert nz[0] > 0  # sign convention


def test_floquet_relation(paper, paper_basis):
    for e in paper_basis.entries:
        assert e.trajectory is not None
        defect = np.linalg.norm(e.trajectory.eval(paper.cycle.period)
                                - e.multiplier * e.initial())
        assert defect <= 1e-8 * max(1.0, abs(e.multiplier))
        assert floquet_relation_defect(e, paper.cycle) <= 1e-8


def test_eval_extends_by_multiplier(paper_basis):
    z1 = paper_basis.nonperiodic_entries[0]
    T = z1.period
    t = 1.3
    assert np.allclose(z1.eval(t + T), z1.multiplier * z1.eval(t), rtol=1e-9)
    assert np.allclose(z1.eval(t - T), z1.eval(t) / z1.multiplier, rtol=1e-9)


def test_adjoint_multipliers_are_reciprocal_forward(paper, paper_basis):
    mono = monodromy(paper.cycle.field, paper.cycle)
    forward = sorted(m.value.real for m in mono.multipliers)
    adjoint = sorted(e.multiplier for e in paper_basis.entries)
    for rho in adjoint:
        assert min(abs(1.0 / rho - lam) / max(abs(lam), 1e-12) for lam in forward) <= 1e-6


def test_diagnostics_paper(paper, paper_basis):
    diag = floquet_diagnostics(paper_basis, paper.cycle)
    assert diag.perron_defect <= 1e-8
    assert diag.orthogonality_defect <= 1e-8
    assert diag.lemma_ei_defect <= 1e-7


def test_lemma_ei_2x2_algebra(paper, paper_basis):
    # n = 2: with z1(0) orthogonal to the velocity and <v, z0(0)> = 1 the
    # inverse-transpose last column at t = 0 is forced to be the velocity
    z1 = paper_basis.nonperiodic_entries[0].initial()
    z0 = paper_basis.periodic_entry.initial()
    B = np.column_stack([z1, z0])
    w = np.linalg.solve(B.T, np.array([0.0, 1.0]))
    assert np.linalg.norm(w - paper.cycle.velocity(0.0)) <= 1e-8


def test_circle3d_basis(circle3d, circle3d_basis):
    rhos = sorted(e.multiplier for e in circle3d_basis.entries)
    expected = sorted([1.0, math.exp(2.0 * math.pi), math.exp(4.0 * math.pi)])
    for got, want in zip(rhos, expected):
        assert abs(got - want) <= 1e-6 * want
    vel0 = circle3d.cycle.velocity(0.0)
    for e in circle3d_basis.nonperiodic_entries:
        assert abs(e.initial() @ vel0) <= 1e-8


def test_circle3d_diagnostics(circle3d, circle3d_basis):
    diag = floquet_diagnostics(circle3d_basis, circle3d.cycle, grid_size=64)
    assert diag.perron_defect <= 1e-7
    assert diag.orthogonality_defect <= 1e-8
    assert diag.lemma_ei_defect <= 1e-7


def test_complex_spectrum_rejected():
    # append a spiral block with rotation non-resonant to T = 2*pi, so the
    # multipliers e^{(-1 +/- 5.3i) T} form a genuinely complex pair
    planar = circle_field()

    def rhs(t, x):
        out = np.empty(4)
        out[:2] = planar.rhs(t, x[:2])
        out[2] = -x[2] + 5.3 * x[3]
        out[3] = -5.3 * x[2] - x[3]
        return out

    def jac(t, x):
        out = np.zeros((4, 4))
        out[:2, :2] = planar.jacobian(t, x[:2])
        out[2:, 2:] = np.array([[-1.0, 5.3], [-5.3, -1.0]])
        return out

    field = VectorField(dimension=4, rhs=rhs, jacobian=jac)
    cyc = find_limit_cycle(field, [0.0, 1.0, 0.0, 0.0], 2.0 * math.pi)
    with pytest.raises(UnsupportedSpectrumError) as err:
        floquet_basis(cyc)
    assert np.any(np.abs(np.asarray(err.value.spectrum).imag) > 1e-6)


def test_degenerate_unit_multiplier_rejected():
    # the harmonic oscillator's orbits are non-isolated: the monodromy is the
    # identity and the unit multiplier has multiplicity two
    harmonic = VectorField(
        dimension=2,
        rhs=lambda t, x: np.array([x[1], -x[0]]),
        jacobian=lambda t, x: np.array([[0.0, 1.0], [-1.0, 0.0]]),
    )
    cyc = find_limit_cycle(harmonic, [1.0, 0.0], 2.0 * math.pi)
    with pytest.raises(DefectiveSpectrumError):
        floquet_basis(cyc)


def test_singular_basis_matrix_reported_with_time(paper, paper_basis):
    import dataclasses
    from cycleshift.floquet import FloquetBasis

    z1 = paper_basis.nonperiodic_entries[0]
    fake_periodic = dataclasses.replace(z1, entry_id="z0", periodic=True, multiplier=1.0)
    broken = FloquetBasis(
        entries=(z1, fake_periodic),
        complete=True,
        initial_condition_number=np.inf,
    )
    with pytest.raises(IllConditionedBasisError) as err:
        floquet_diagnostics(broken, paper.cycle)
    assert err.value.time == 0.0
