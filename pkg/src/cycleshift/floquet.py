"""Adjoint linearization along a cycle and its Floquet eigenfunctions.

The adjoint system z' = -(f'(x0(t)))^T z has multipliers reciprocal to the
forward ones.  Eigenfunctions are reconstructed from eigenvectors of the
adjoint monodromy and stored as dense trajectories over one period; values
elsewhere come from the Floquet relation z(t + kT) = rho^k z(t), never from
long re-integration (which would blow up for rho >> 1).

Each eigenfunction is integrated in the time direction in which its own
mode dominates (forward for growing, backward for decaying or periodic
modes on a stable cycle), which keeps the contamination by faster modes at
round-off level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cycle import DEFAULT_CLUSTER_TOL, LimitCycle
from .errors import (
    DefectiveSpectrumError,
    IllConditionedBasisError,
    NormalizationImpossibleError,
    UnsupportedSpectrumError,
)
from .ode import VectorField, flow_with_sensitivity, integrate, integrate_with_sensitivity

EIGENFUNCTION_TOL = 1e-12
_IMAG_TOL = 1e-9
_BASIS_COND_CAP = 1e8


class AdjointSystem:
    """The linear system z' = -(f'(x0(t)))^T z along a cycle's dense orbit."""

    def __init__(self, cycle: LimitCycle):
        self.cycle = cycle
        n = cycle.field.dimension
        self.field = VectorField(
            dimension=n,
            rhs=self.rhs,
            jacobian=lambda t, z: self.matrix(t),
            autonomous=False,
        )

    def matrix(self, t: float) -> np.ndarray:
        x = self.cycle.state(t)
        return -self.cycle.field.jacobian_at(0.0, x).T

    def rhs(self, t: float, z: np.ndarray) -> np.ndarray:
        return self.matrix(t) @ z


@dataclass(frozen=True)
class FloquetEntry:
    """One Floquet solution of the adjoint system over [0, T]."""

    entry_id: str
    multiplier: float            # adjoint multiplier rho, z(t+T) = rho z(t)
    trajectory: object           # dense values over one period
    periodic: bool
    normalization: str           # "orient" or "unit-sign"
    period: float
    initial_vector: np.ndarray = None
    integrated_backward: bool = False

    def initial(self) -> np.ndarray:
        """z(0) as normalized (exact up to rounding, not integration error)."""
        if self.initial_vector is not None:
            return self.initial_vector
        return self.eval(0.0)

    def eval(self, t):
        """z(t) for any real t via the Floquet relation."""
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self.period)
        rem = t - k * self.period
        vals = self.trajectory.eval(rem)
        factor = self.multiplier ** k
        if vals.ndim == 1:
            return float(factor) * vals
        return np.asarray(factor)[:, None] * vals


@dataclass(frozen=True)
class FloquetBasis:
    entries: tuple[FloquetEntry, ...]   # ordered z1, ..., z_{n-1}, z0
    complete: bool
    initial_condition_number: float

    @property
    def periodic_entry(self) -> FloquetEntry:
        return self.entries[-1]

    @property
    def nonperiodic_entries(self) -> tuple[FloquetEntry, ...]:
        return self.entries[:-1]

    def initial_matrix(self) -> np.ndarray:
        return np.column_stack([e.initial() for e in self.entries])


@dataclass(frozen=True)
class FloquetDiagnostics:
    perron_defect: float
    orthogonality_defect: float
    lemma_ei_defect: float
    grid: np.ndarray
    sign_convention: str


def adjoint_fundamental(cycle: LimitCycle, t: float,
                        tol: float = EIGENFUNCTION_TOL) -> np.ndarray:
    """Z(t) with Z(0) = I, by direct integration of the matrix adjoint system.

    Cross-checked against the transpose-inverse of the forward fundamental
    matrix; a mismatch beyond integration accuracy indicates broken numerics
    and raises.
    """
    adj = AdjointSystem(cycle)
    n = cycle.field.dimension
    if t == 0.0:
        return np.eye(n)

    def rhs(s, u):
        return (adj.matrix(s) @ u.reshape(n, n)).reshape(-1)

    mat_field = VectorField(dimension=n * n, rhs=rhs, autonomous=False)
    traj = integrate(mat_field, (0.0, t), np.eye(n).reshape(-1), tol)
    Z = traj.endpoint().reshape(n, n)

    Y = flow_with_sensitivity(cycle.field, t, 0.0, cycle.anchor, tol).sensitivity
    defect = np.linalg.norm(Z.T @ Y - np.eye(n)) / max(
        1.0, np.linalg.norm(Z) * np.linalg.norm(Y)
    )
    if defect > 1e-6:
        raise RuntimeError(
            f"adjoint/forward cross-check failed: normalized defect {defect:.3e}"
        )
    return Z


def _first_nonzero_sign(v: np.ndarray) -> float:
    # the threshold must sit above eigensolver dirt (~cond * machine eps),
    # otherwise noise components decide the sign
    for comp in v:
        if abs(comp) > 1e-8 * np.linalg.norm(v):
            return 1.0 if comp > 0 else -1.0
    return 1.0


def _integrate_entry(adj: AdjointSystem, z0: np.ndarray, rho: float,
                     backward_stable: bool, tol: float):
    """Dense adjoint solution over [0, T], choosing the stable direction.

    Forward integration is stable when the entry's own mode grows at least
    as fast as everything else; otherwise integrate backward from
    z(T) = rho * z(0), where the fast modes contract.
    """
    T = adj.cycle.period
    if backward_stable:
        return integrate(adj.field, (T, 0.0), rho * z0, tol)
    return integrate(adj.field, (0.0, T), z0, tol)


def floquet_basis(cycle: LimitCycle,
                  cluster_tol: float = DEFAULT_CLUSTER_TOL,
                  tol: float = EIGENFUNCTION_TOL) -> FloquetBasis:
    """Full real Floquet basis of the adjoint system.

    Eigenvectors come from the transposed forward monodromy (Z(T) is its
    inverse-transpose, so they share eigenvectors while the multipliers are
    reciprocal).  Complex or defective spectra are rejected: the bifurcation
    functions downstream are defined per real eigenfunction.
    """
    n = cycle.field.dimension
    Y_T = flow_with_sensitivity(cycle.field, cycle.period, 0.0, cycle.anchor, tol).sensitivity
    lams, vecs = np.linalg.eig(Y_T.T)

    if np.any(np.abs(lams.imag) > _IMAG_TOL * (1.0 + np.abs(lams))):
        raise UnsupportedSpectrumError(
            f"complex multiplier pair in {np.array2string(lams, precision=6)}; "
            "real Floquet eigenfunctions required",
            spectrum=lams,
        )
    lams = lams.real
    vecs = vecs.real

    cond = float(np.linalg.cond(vecs))
    if cond > _BASIS_COND_CAP:
        raise DefectiveSpectrumError(
            f"eigenvector matrix condition number {cond:.3e}; spectrum is "
            "numerically defective"
        )

    unit_idx = np.flatnonzero(np.abs(lams - 1.0) <= cluster_tol)
    if unit_idx.size != 1:
        raise DefectiveSpectrumError(
            f"expected a simple unit multiplier, found {unit_idx.size} within "
            f"{cluster_tol:.1e} of +1 (forward spectrum "
            f"{np.array2string(lams, precision=6)})"
        )
    unit_idx = int(unit_idx[0])

    velocity0 = cycle.velocity(0.0)
    adj = AdjointSystem(cycle)
    rhos = 1.0 / lams
    # backward integration is stable for modes strictly slower than the fastest
    max_growth = max(np.max(np.abs(rhos)), 1.0)

    entries: list[FloquetEntry] = []
    nonperiodic_order = sorted(
        (i for i in range(n) if i != unit_idx),
        key=lambda i: -abs(rhos[i]),
    )
    for rank, i in enumerate(nonperiodic_order, start=1):
        v = vecs[:, i].copy()
        v /= np.linalg.norm(v)
        v *= _first_nonzero_sign(v)
        rho = float(rhos[i])
        backward = abs(rho) < max_growth * (1.0 - 1e-12)
        traj = _integrate_entry(adj, v, rho, backward, tol)
        entries.append(FloquetEntry(
            entry_id=f"z{rank}",
            multiplier=rho,
            trajectory=traj,
            periodic=False,
            normalization="unit-sign",
            period=cycle.period,
            initial_vector=v,
            integrated_backward=backward,
        ))

    v0 = vecs[:, unit_idx].copy()
    scale = float(velocity0 @ v0)
    if abs(scale) < 1e-10 * np.linalg.norm(v0) * np.linalg.norm(velocity0):
        raise NormalizationImpossibleError(
            "<x0'(0), z0(0)> vanished for the unit eigenvector; this contradicts "
            "nondegeneracy and indicates the numerics are at fault"
        )
    v0 /= scale
    backward = 1.0 < max_growth * (1.0 - 1e-12)
    traj0 = _integrate_entry(adj, v0, 1.0, backward, tol)
    entries.append(FloquetEntry(
        entry_id="z0",
        multiplier=1.0,
        trajectory=traj0,
        periodic=True,
        normalization="orient",
        period=cycle.period,
        initial_vector=v0,
        integrated_backward=backward,
    ))

    init = np.column_stack([e.initial() for e in entries])
    return FloquetBasis(
        entries=tuple(entries),
        complete=True,
        initial_condition_number=float(np.linalg.cond(init)),
    )


def floquet_diagnostics(basis: FloquetBasis, cycle: LimitCycle,
                        grid_size: int = 33) -> FloquetDiagnostics:
    """Structural identity defects on a uniform grid over [0, T].

    All defects are normalized by the product of the participating vector
    norms (floored at 1): for eigenfunctions growing like e^{ct} an absolute
    defect would be dominated by harmless round-off of the large entries.

    (a) constancy of <z_i(t), y_j(t)> for forward fundamental columns y_j;
    (b) orthogonality of non-periodic eigenfunctions to the cycle velocity;
    (c) the dual-basis identity: the last column of the inverse-transposed
        eigenfunction matrix (z_1, ..., z_{n-1}, z_0) reproduces x0'(t).
    """
    T = cycle.period
    n = cycle.field.dimension
    grid = np.linspace(0.0, T, grid_size)
    aug = integrate_with_sensitivity(cycle.field, (0.0, T), cycle.anchor, EIGENFUNCTION_TOL)

    z_vals = [e.trajectory.eval(grid) for e in basis.entries]
    z0_vals = [e.initial() for e in basis.entries]

    perron = 0.0
    for zi_vals, zi0 in zip(z_vals, z0_vals):
        const = zi0  # <z_i(0), Y(0) e_j> = z_i(0)_j
        for k, t in enumerate(grid):
            Y = aug.sensitivity(t)
            prods = zi_vals[k] @ Y
            scale = max(1.0, np.linalg.norm(zi_vals[k]) * np.linalg.norm(Y, axis=0).max())
            perron = max(perron, float(np.max(np.abs(prods - const)) / scale))

    velocities = cycle.velocity(grid)
    ortho = 0.0
    for e, zi_vals in zip(basis.nonperiodic_entries, z_vals[:-1]):
        dots = np.einsum("kj,kj->k", velocities, zi_vals)
        scales = np.maximum(
            1e-300,
            np.linalg.norm(velocities, axis=1) * np.linalg.norm(zi_vals, axis=1),
        )
        ortho = max(ortho, float(np.max(np.abs(dots) / scales)))

    lemma_ei = 0.0
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    for k, t in enumerate(grid):
        cols = [z_vals[i][k] for i in range(n)]
        # rescaling the non-periodic columns leaves the identity's last
        # column invariant but fixes the conditioning of the solve
        scaled = [c / np.linalg.norm(c) for c in cols[:-1]] + [cols[-1]]
        B = np.column_stack(scaled)
        if np.linalg.cond(B) > 1e12:
            raise IllConditionedBasisError("eigenfunction matrix numerically singular", t)
        w = np.linalg.solve(B.T, e_n)
        lemma_ei = max(lemma_ei, float(np.linalg.norm(w - velocities[k])))

    return FloquetDiagnostics(
        perron_defect=perron,
        orthogonality_defect=ortho,
        lemma_ei_defect=lemma_ei,
        grid=grid,
        sign_convention="non-periodic eigenfunctions: unit initial norm, first "
                        "nonzero component positive",
    )


def floquet_relation_defect(entry: FloquetEntry, cycle: LimitCycle,
                            grid_size: int = 17) -> float:
    """Relative defect of z(t+T) = rho z(t), with z extended by integration.

    The extension runs one further period in the entry's stable direction:
    forward from z(T) when the entry was integrated forward, else backward
    from z(0) (verifying the equivalent z(t-T) = z(t)/rho).
    """
    adj = AdjointSystem(cycle)
    T = cycle.period
    if entry.integrated_backward:
        ext = integrate(adj.field, (0.0, -T), entry.trajectory.eval(0.0), EIGENFUNCTION_TOL)
        offset, factor = -T, 1.0 / entry.multiplier
    else:
        ext = integrate(adj.field, (T, 2.0 * T), entry.trajectory.eval(T), EIGENFUNCTION_TOL)
        offset, factor = T, entry.multiplier
    worst = 0.0
    for t in np.linspace(0.0, T, grid_size):
        expected = factor * entry.trajectory.eval(t)
        got = ext.eval(t + offset)
        worst = max(worst, float(np.linalg.norm(got - expected)
                                 / max(np.linalg.norm(expected), 1e-300)))
    return worst
