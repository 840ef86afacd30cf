"""Subsystem families and switched-trajectory integration.

Vector fields are closed-form specifications (linear, polynomial, or a
composite closed loop) that vanish at the origin and evaluate on single
states ``(n,)`` or batches ``(K, n)``.  Trajectories are integrated with
classical fixed-step RK4, with every inter-switch segment landing exactly
on its boundary so a switch never falls inside a step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "VectorField",
    "LinearField",
    "PolynomialField",
    "ClosedLoopField",
    "SubsystemFamily",
    "Trajectory",
    "evaluate_field",
    "integrate",
    "norm_series",
    "DEFAULT_STEP",
    "DIVERGENCE_THRESHOLD",
]

DEFAULT_STEP = 1e-3
DIVERGENCE_THRESHOLD = 1e12


class VectorField:
    """Interface: a locally Lipschitz field with ``f(0) = 0``."""

    dim: int

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"state dimension {x.shape[-1]} != field dimension {self.dim}")
        return x


@dataclass(frozen=True, eq=False)
class LinearField(VectorField):
    """f(x) = A x."""

    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def __call__(self, x):
        x = self._check_dim(x)
        return x @ self.A.T


@dataclass(frozen=True, eq=False)
class PolynomialField(VectorField):
    """Per-coordinate monomial lists ``[(exponents, coefficient), ...]``.

    ``terms[c]`` lists the monomials of coordinate ``c`` of f; exponents
    are length-n integer vectors.  Constant monomials (all-zero exponents)
    are rejected at construction so that f(0) = 0 holds structurally.
    """

    n: int
    terms: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if len(self.terms) != self.n:
            raise ValueError("need one monomial list per coordinate")
        exps, coeffs = [], []
        for c, mono_list in enumerate(self.terms):
            E = np.zeros((len(mono_list), self.n))
            a = np.zeros(len(mono_list))
            for k, (e, coeff) in enumerate(mono_list):
                e = np.asarray(e, dtype=float)
                if e.shape != (self.n,) or np.any(e < 0) or np.any(e != np.round(e)):
                    raise ValueError(f"coordinate {c}: bad exponent vector {e}")
                if coeff != 0.0 and not np.any(e > 0):
                    raise ValueError(
                        f"coordinate {c}: constant monomial breaks f(0) = 0"
                    )
                E[k] = e
                a[k] = float(coeff)
            exps.append(E)
            coeffs.append(a)
        object.__setattr__(self, "_exps", tuple(exps))
        object.__setattr__(self, "_coeffs", tuple(coeffs))

    @property
    def dim(self) -> int:
        return self.n

    def __call__(self, x):
        x = self._check_dim(x)
        out = np.zeros(x.shape)
        for c in range(self.n):
            E = self._exps[c]
            if E.shape[0] == 0:
                continue
            mono = np.prod(x[..., None, :] ** E, axis=-1)
            out[..., c] = mono @ self._coeffs[c]
        return out


@dataclass(frozen=True, eq=False)
class ClosedLoopField(VectorField):
    """Composite field f(x) + sum_j g_j(x) u_j(x) for a fixed mode.

    ``control_law`` maps states to input vectors ``(..., m)`` and is
    evaluated wherever the field is, including at RK4 stage states.
    """

    drift: VectorField
    controls: tuple
    control_law: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        for g in self.controls:
            if g.dim != self.drift.dim:
                raise ValueError("control fields must share the drift dimension")

    @property
    def dim(self) -> int:
        return self.drift.dim

    def __call__(self, x):
        x = self._check_dim(x)
        out = self.drift(x)
        if self.controls:
            u = np.asarray(self.control_law(x), dtype=float)
            for j, g in enumerate(self.controls):
                out = out + g(x) * u[..., j, None]
        return out


def evaluate_field(spec: VectorField, x) -> np.ndarray:
    """Evaluate a field spec at a state (dimension-checked)."""
    return spec(x)


@dataclass(frozen=True, eq=False)
class SubsystemFamily:
    """Indexed family of drift fields, optionally with control fields.

    ``control[i]`` lists the m control fields of mode i; all modes must
    agree on m, and every field (drift or control) vanishes at the origin
    by construction of the field specs.
    """

    n: int
    drift: tuple
    control: Optional[tuple] = None

    def __post_init__(self):
        if not self.drift:
            raise ValueError("need at least one mode")
        for f in self.drift:
            if f.dim != self.n:
                raise ValueError("drift dimension mismatch")
        if self.control is not None:
            if len(self.control) != len(self.drift):
                raise ValueError("need control fields for every mode")
            m = len(self.control[0])
            if m < 1:
                raise ValueError("control modes need at least one field")
            for gs in self.control:
                if len(gs) != m:
                    raise ValueError("all modes must share the input dimension")
                for g in gs:
                    if g.dim != self.n:
                        raise ValueError("control dimension mismatch")

    @property
    def n_modes(self) -> int:
        return len(self.drift)

    @property
    def n_inputs(self) -> int:
        return 0 if self.control is None else len(self.control[0])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Integrated switched trajectory on the grid ``times``.

    The grid contains every switching instant of the driving path exactly
    once; the state is continuous across switches.  ``diverged`` marks a
    truncated realization (norm above the divergence threshold or a
    non-finite state): meaningful output, not an error.
    """

    times: np.ndarray
    states: np.ndarray
    path: "object"
    diverged: bool = False
    divergence_time: Optional[float] = None

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]

    def norm_series(self):
        """Pairs (grid times, Euclidean norms of the state)."""
        return self.times, np.linalg.norm(self.states, axis=1)

    def mode_series(self) -> np.ndarray:
        idx = np.searchsorted(self.path.times, self.times, side="right") - 1
        return self.path.modes[idx]

    def to_csv(self, fileobj) -> None:
        """Write rows ``time,mode,x_1..x_n,norm``."""
        _, norms = self.norm_series()
        modes = self.mode_series()
        n = self.states.shape[1]
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(["time", "mode"] + [f"x_{i+1}" for i in range(n)] + ["norm"])
        for t, m, row, r in zip(self.times, modes, self.states, norms):
            writer.writerow([repr(float(t)), int(m)] + [repr(float(v)) for v in row] + [repr(float(r))])


def norm_series(traj: Trajectory):
    return traj.norm_series()


def _rk4_step(field: VectorField, x: np.ndarray, h: float) -> np.ndarray:
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def mode_fields(family: SubsystemFamily, controller=None) -> list:
    """Effective per-mode fields: plain drifts or closed loops."""
    if controller is None:
        return list(family.drift)
    if family.control is None:
        raise ValueError("controller given but the family has no control fields")
    return [
        ClosedLoopField(family.drift[i], tuple(family.control[i]), controller.mode_control(i))
        for i in range(family.n_modes)
    ]


def integrate(
    family: SubsystemFamily,
    path,
    x0,
    step: float = DEFAULT_STEP,
    controller=None,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
) -> Trajectory:
    """Integrate the switched system along a given switching path.

    Each segment ``[tau_i, tau_{i+1})`` is integrated with classical RK4 at
    fixed ``step``, the last substep of the segment shortened to land
    exactly on the boundary; the mode is held constant within the segment
    (the mode on ``[tau_i, tau_{i+1})`` is ``path.modes[i]``).  If a
    controller is present the integrated field is the closed loop
    ``f_i(x) + sum_j g_{i,j}(x) k_j(x)``, with the controller evaluated at
    the RK4 stage states.

    Blow-up (non-finite state or norm above ``divergence_threshold``) ends
    integration early and marks the trajectory as diverged.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != family.n:
        raise ValueError("x0 dimension mismatch")
    fields = mode_fields(family, controller)
    if len(fields) <= int(np.max(path.modes)):
        raise ValueError("path uses a mode outside the family")

    times = [0.0]
    states = [x.copy()]
    diverged = False
    divergence_time = None

    n_segments = path.times.size
    for i in range(n_segments):
        t0 = path.times[i]
        t1 = path.times[i + 1] if i + 1 < n_segments else path.horizon
        if t1 <= t0:
            continue
        field = fields[path.modes[i]]
        n_sub = max(1, int(np.ceil((t1 - t0) / step - 1e-9)))
        bounds = [t0 + step * k for k in range(1, n_sub)] + [t1]
        t_prev = t0
        for t_next in bounds:
            x = _rk4_step(field, x, t_next - t_prev)
            if not np.all(np.isfinite(x)):
                diverged = True
                divergence_time = t_next
                break
            times.append(t_next)
            states.append(x.copy())
            if np.linalg.norm(x) > divergence_threshold:
                diverged = True
                divergence_time = t_next
                break
            t_prev = t_next
        if diverged:
            break

    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        path=path,
        diverged=diverged,
        divergence_time=divergence_time,
    )
