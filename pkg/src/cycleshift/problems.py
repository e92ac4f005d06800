"""Built-in problem registry and JSON problem configuration.

Registry entries bundle a perturbed problem with a cycle guess and, where
they exist, closed-form oracles for the forced solution and the shift:

* paper-example - planar circular cycle with a radius-inflating forcing;
  the forced solution and the square-root shift are known in closed form.
* circle-soft   - the same geometry with contraction parameter lambda
  (default 0.05); weak contraction makes the flowed surface usable at
  desk eps.  Shares the closed-form oracles (they are lambda-independent).
* circle3d      - paper-example extended by a decoupled contracting third
  axis; exercises n = 3 and a second non-periodic eigenfunction.
* vdp-forced    - van der Pol with additive cosine forcing at the
  unperturbed period; no oracle, property-based checks only.

User-supplied problems come from a small JSON schema (named builtin or
polynomial right-hand side, named forcing); arbitrary expression parsing is
deliberately out of scope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cycle import CycleSolveOptions, LimitCycle, find_limit_cycle
from .errors import ConfigError
from .ode import VectorField
from .perturb import PerturbedProblem

# Unit-damping van der Pol period, frozen from a tol=1e-12 shooting run;
# used only as the initial guess (resolution recomputes the period).
VDP_PERIOD = 6.663286859323130

# Forcing phase for vdp-forced, calibrated so the Malkin function of the
# registered forcing has a simple zero at phase 0 (value ~3e-15, slope ~4.0
# at mu = 1): the forced branch through the cycle anchor then persists and
# Newton from the anchor converges to it.
VDP_FORCING_PHASE = 2.437610385252204


def circle_field(lam: float = 1.0) -> VectorField:
    """Rotation with radial relaxation onto the unit circle at rate lam."""

    def rhs(t, x):
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array([
            x[1] - lam * x[0] * (r2 - 1.0),
            -x[0] - lam * x[1] * (r2 - 1.0),
        ])

    def jac(t, x):
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array([
            [-lam * (r2 - 1.0) - 2.0 * lam * x[0] * x[0],
             1.0 - 2.0 * lam * x[0] * x[1]],
            [-1.0 - 2.0 * lam * x[0] * x[1],
             -lam * (r2 - 1.0) - 2.0 * lam * x[1] * x[1]],
        ])

    return VectorField(dimension=2, rhs=rhs, jacobian=jac)


def circle3d_field(lam: float = 1.0, kappa: float = 1.0) -> VectorField:
    """circle_field plus a decoupled contracting axis x3' = -kappa x3."""
    planar = circle_field(lam)

    def rhs(t, x):
        out = np.empty(3)
        out[:2] = planar.rhs(t, x[:2])
        out[2] = -kappa * x[2]
        return out

    def jac(t, x):
        out = np.zeros((3, 3))
        out[:2, :2] = planar.jacobian(t, x[:2])
        out[2, 2] = -kappa
        return out

    return VectorField(dimension=3, rhs=rhs, jacobian=jac)


def vdp_field(mu: float = 1.0) -> VectorField:
    def rhs(t, x):
        return np.array([x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]])

    def jac(t, x):
        return np.array([
            [0.0, 1.0],
            [-2.0 * mu * x[0] * x[1] - 1.0, mu * (1.0 - x[0] * x[0])],
        ])

    return VectorField(dimension=2, rhs=rhs, jacobian=jac)


def _circle_forcing(lam: float, dim: int = 2):
    """The forcing that inflates the circular cycle radius to 1 + eps.

    Derived by subtracting the lam-field from the radius-(1+eps) system with
    the phase-drifted sine drive; the closed-form forced solution is
    (1+eps) * (sin(t - sqrt(eps)), cos(t - sqrt(eps))).
    """

    def g(t, x, eps):
        out = np.zeros(dim)
        drive = (1.0 + eps) * math.sin(t - math.sqrt(eps)) if eps > 0 else math.sin(t)
        out[0] = lam * (2.0 + eps) * x[0] - x[0] + drive
        out[1] = lam * (2.0 + eps) * x[1]
        return out

    def g_jac(t, x, eps):
        out = np.zeros((dim, dim))
        out[0, 0] = lam * (2.0 + eps) - 1.0
        out[1, 1] = lam * (2.0 + eps)
        return out

    return g, g_jac


def _circle_oracles(dim: int = 2):
    def solution(t, eps):
        out = np.zeros(dim)
        s = math.sqrt(eps)
        out[0] = (1.0 + eps) * math.sin(t - s)
        out[1] = (1.0 + eps) * math.cos(t - s)
        return out

    def shift(eps):
        return math.sqrt(eps)

    return solution, shift


@dataclass(frozen=True)
class ProblemSpec:
    """A registry or config problem before the cycle has been computed."""

    name: str
    problem: PerturbedProblem
    x_guess: np.ndarray
    T_guess: float
    params: dict
    description: str = ""
    period_from_cycle: bool = False   # forcing period tied to the computed cycle


@dataclass(frozen=True)
class ResolvedProblem:
    """Problem plus its computed limit cycle."""

    spec: ProblemSpec
    problem: PerturbedProblem
    cycle: LimitCycle

    @property
    def name(self) -> str:
        return self.spec.name


def _paper_spec(params: dict) -> ProblemSpec:
    lam = float(params.get("lambda", 1.0))
    g, g_jac = _circle_forcing(lam)
    solution, shift = _circle_oracles()
    problem = PerturbedProblem(
        name="paper-example" if lam == 1.0 else f"circle-soft(lambda={lam:g})",
        base_field=circle_field(lam),
        g=g,
        period=2.0 * math.pi,
        g_jacobian=g_jac,
        solution_oracle=solution,
        shift_oracle=shift,
    )
    return ProblemSpec(
        name="paper-example" if lam == 1.0 else "circle-soft",
        problem=problem,
        x_guess=np.array([0.0, 1.0]),
        T_guess=2.0 * math.pi,
        params={"lambda": lam},
        description="circular cycle with radius-inflating forcing; full closed-form oracles",
    )


def _circle_soft_spec(params: dict) -> ProblemSpec:
    merged = {"lambda": 0.05}
    merged.update(params)
    return _paper_spec(merged)


def _circle3d_spec(params: dict) -> ProblemSpec:
    lam = float(params.get("lambda", 1.0))
    kappa = float(params.get("kappa", 1.0))
    g2, g2_jac = _circle_forcing(lam, dim=3)
    solution, shift = _circle_oracles(dim=3)
    problem = PerturbedProblem(
        name="circle3d",
        base_field=circle3d_field(lam, kappa),
        g=g2,
        period=2.0 * math.pi,
        g_jacobian=g2_jac,
        solution_oracle=solution,
        shift_oracle=shift,
    )
    return ProblemSpec(
        name="circle3d",
        problem=problem,
        x_guess=np.array([0.0, 1.0, 0.0]),
        T_guess=2.0 * math.pi,
        params={"lambda": lam, "kappa": kappa},
        description="planar example with a decoupled contracting third axis",
    )


def _vdp_spec(params: dict) -> ProblemSpec:
    mu = float(params.get("mu", 1.0))
    phase = float(params.get("phase", VDP_FORCING_PHASE))
    period = float(params.get("T", VDP_PERIOD))
    problem = _vdp_problem(mu, phase, period)
    return ProblemSpec(
        name="vdp-forced",
        problem=problem,
        x_guess=np.array([2.0, 0.0]),
        T_guess=period,
        params={"mu": mu, "phase": phase},
        description="van der Pol with additive cosine forcing at the cycle period",
        period_from_cycle=True,
    )


def _vdp_problem(mu: float, phase: float, period: float) -> PerturbedProblem:
    omega = 2.0 * math.pi / period

    def g(t, x, eps):
        return np.array([math.cos(omega * (t - phase)), 0.0])

    def g_jac(t, x, eps):
        return np.zeros((2, 2))

    return PerturbedProblem(
        name="vdp-forced",
        base_field=vdp_field(mu),
        g=g,
        period=period,
        g_jacobian=g_jac,
    )


_REGISTRY = {
    "paper-example": _paper_spec,
    "circle-soft": _circle_soft_spec,
    "circle3d": _circle3d_spec,
    "vdp-forced": _vdp_spec,
}

_RESOLVE_CACHE: dict = {}


def problem_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def build_problem(name: str, params: dict | None = None) -> ProblemSpec:
    if name not in _REGISTRY:
        raise ConfigError(
            f"unknown problem {name!r}; available: {', '.join(problem_names())}"
        )
    return _REGISTRY[name](dict(params or {}))


def resolve(name: str, params: dict | None = None) -> ResolvedProblem:
    """Build the problem and compute its limit cycle (cached per parameters)."""
    key = (name, tuple(sorted((params or {}).items())))
    if key in _RESOLVE_CACHE:
        return _RESOLVE_CACHE[key]
    spec = build_problem(name, params)
    resolved = resolve_spec(spec)
    _RESOLVE_CACHE[key] = resolved
    return resolved


def resolve_spec(spec: ProblemSpec) -> ResolvedProblem:
    cycle = find_limit_cycle(
        spec.problem.base_field, spec.x_guess, spec.T_guess, CycleSolveOptions()
    )
    problem = spec.problem
    if spec.period_from_cycle:
        # tie the forcing period exactly to the computed cycle period
        problem = _vdp_problem(
            float(spec.params.get("mu", 1.0)),
            float(spec.params.get("phase", VDP_FORCING_PHASE)),
            cycle.period,
        )
    return ResolvedProblem(spec=spec, problem=problem, cycle=cycle)


# ---------------------------------------------------------------------------
# JSON problem configuration

_CONFIG_FIELDS = {"name", "f", "g", "T", "params"}


def _config_error(field: str, message: str) -> ConfigError:
    return ConfigError(f"config field {field!r}: {message}")


def _build_polynomial_field(spec, field_name: str) -> VectorField:
    if not isinstance(spec, dict):
        raise _config_error(field_name, "polynomial spec must be an object")
    dim = spec.get("dimension")
    comps = spec.get("components")
    if not isinstance(dim, int) or dim < 1:
        raise _config_error(f"{field_name}.dimension", "must be a positive integer")
    if not isinstance(comps, list) or len(comps) != dim:
        raise _config_error(
            f"{field_name}.components", f"must be a list of {dim} term lists"
        )
    terms: list[list[tuple[float, np.ndarray]]] = []
    for i, comp in enumerate(comps):
        if not isinstance(comp, list):
            raise _config_error(f"{field_name}.components[{i}]", "must be a list of terms")
        parsed = []
        for j, term in enumerate(comp):
            where = f"{field_name}.components[{i}][{j}]"
            if not isinstance(term, dict) or "coeff" not in term or "powers" not in term:
                raise _config_error(where, "term needs 'coeff' and 'powers'")
            powers = term["powers"]
            if len(powers) != dim or any((not isinstance(p, int)) or p < 0 for p in powers):
                raise _config_error(
                    f"{where}.powers", f"must be {dim} non-negative integers"
                )
            parsed.append((float(term["coeff"]), np.asarray(powers, dtype=int)))
        terms.append(parsed)

    def rhs(t, x):
        out = np.zeros(dim)
        for i, comp in enumerate(terms):
            for coeff, powers in comp:
                out[i] += coeff * np.prod(x ** powers)
        return out

    def jac(t, x):
        out = np.zeros((dim, dim))
        for i, comp in enumerate(terms):
            for coeff, powers in comp:
                for k in range(dim):
                    if powers[k] == 0:
                        continue
                    dp = powers.copy()
                    dp[k] -= 1
                    out[i, k] += coeff * powers[k] * np.prod(x ** dp)
        return out

    return VectorField(dimension=dim, rhs=rhs, jacobian=jac)


def _build_named_field(name: str, params: dict) -> VectorField:
    if name == "circle":
        return circle_field(float(params.get("lambda", 1.0)))
    if name == "circle3d":
        return circle3d_field(
            float(params.get("lambda", 1.0)), float(params.get("kappa", 1.0))
        )
    if name == "vdp":
        return vdp_field(float(params.get("mu", 1.0)))
    raise _config_error("f", f"unknown builtin field {name!r} (circle, circle3d, vdp)")


def _build_named_forcing(name: str, params: dict, period: float, dim: int):
    if name == "none":
        return (lambda t, x, eps: np.zeros(dim)), (lambda t, x, eps: np.zeros((dim, dim)))
    if name == "paper":
        return _circle_forcing(float(params.get("lambda", 1.0)), dim)
    if name == "cosine":
        axis = int(params.get("axis", 0))
        phase = float(params.get("phase", 0.0))
        if not (0 <= axis < dim):
            raise _config_error("g.axis", f"must lie in [0, {dim})")
        omega = 2.0 * math.pi / period

        def g(t, x, eps):
            out = np.zeros(dim)
            out[axis] = math.cos(omega * (t - phase))
            return out

        return g, (lambda t, x, eps: np.zeros((dim, dim)))
    raise _config_error("g", f"unknown builtin forcing {name!r} (none, paper, cosine)")


def load_problem_config(path) -> ProblemSpec:
    """Parse and validate a JSON problem description.

    Schema: {"name"?: str, "f": str | {"polynomial": {...}}, "g": str,
    "T": number, "params"?: {object with x_guess/T_guess/field parameters}}.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    unknown = set(raw) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"config field {sorted(unknown)[0]!r}: not recognized")
    for required in ("f", "g", "T"):
        if required not in raw:
            raise _config_error(required, "missing")
    if not isinstance(raw["T"], (int, float)) or raw["T"] <= 0:
        raise _config_error("T", "must be a positive number")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise _config_error("params", "must be an object")

    f_spec = raw["f"]
    if isinstance(f_spec, str):
        field = _build_named_field(f_spec, params)
    elif isinstance(f_spec, dict) and set(f_spec) == {"polynomial"}:
        field = _build_polynomial_field(f_spec["polynomial"], "f.polynomial")
    else:
        raise _config_error("f", "must be a builtin name or {'polynomial': {...}}")

    g_spec = raw["g"]
    if not isinstance(g_spec, str):
        raise _config_error("g", "must be a builtin forcing name")
    period = float(raw["T"])
    g, g_jac = _build_named_forcing(g_spec, params, period, field.dimension)

    x_guess = params.get("x_guess")
    if x_guess is None:
        raise _config_error("params.x_guess", "missing (cycle guess required)")
    x_guess = np.asarray(x_guess, dtype=float)
    if x_guess.size != field.dimension:
        raise _config_error(
            "params.x_guess", f"needs {field.dimension} components"
        )
    T_guess = float(params.get("T_guess", period))

    name = raw.get("name", path.stem)
    problem = PerturbedProblem(
        name=name, base_field=field, g=g, period=period, g_jacobian=g_jac
    )
    return ProblemSpec(
        name=name, problem=problem, x_guess=x_guess, T_guess=T_guess,
        params=dict(params), description=f"user config {path.name}",
    )
