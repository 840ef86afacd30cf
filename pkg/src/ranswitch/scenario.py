"""Scenario files: JSON documents describing a complete simulation setup.

Top-level sections (all matrices as nested arrays, all mode indices
0-based):

``system``
    ``dimension``, ``modes``, ``drift`` (one field spec per mode), optional
    ``control`` (per mode, a list of field specs).  A field spec is either
    ``{"linear": [[...]]}`` or ``{"polynomial": [coordinate monomial
    lists]}`` with monomials ``{"exponents": [...], "coeff": c}``.
``switching``
    ``class`` (EH | UH | GH) with ``rate``/``q``, ``T``/``q``, or
    ``holding``/``transition_matrix``; plus ``sigma0``.
``certificate`` (optional)
    ``P`` (one SPD matrix per mode), optional declared ``lambda`` (vector
    or matrix), optional ``mu`` override.
``controller`` (optional)
    ``{"kind": "universal", "rates": [...]}"`` or ``{"kind":
    "linear_gain", "K": [[...]], "rates": [...]}`` or ``{"kind":
    "polynomial", "outputs": [...], "rates": [...]}``.
``run``
    ``horizon``, ``step``, ``trials``, ``seed``, ``tail_start``, ``eps``.

Parse failures raise :class:`ScenarioError` carrying a field-anchored
diagnostic (JSON syntax errors already carry line/column).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .certificates import CertificateFamily, QuadraticLyapunov, verify_pointwise
from .dynamics import DEFAULT_STEP, LinearField, PolynomialField, SubsystemFamily
from .montecarlo import Scenario
from .switching import (
    ExponentialHolding,
    PointMassHolding,
    SwitchingLaw,
    TabulatedHolding,
    UniformHolding,
)
from .synthesis import (
    LinearGainController,
    PolynomialController,
    PolynomialMap,
    UniversalController,
)

__all__ = ["ScenarioError", "RunConfig", "ScenarioBundle", "parse_scenario_file",
           "load_scenario", "build_certificate", "build_controller"]

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Scenario-file problem, anchored to the offending field."""

    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RunConfig:
    horizon: float
    step: float
    trials: int
    seed: int
    tail_start: float
    eps: float


@dataclass(frozen=True, eq=False)
class ScenarioBundle:
    """Parsed scenario: the core objects plus the declared extras."""

    family: SubsystemFamily
    law: SwitchingLaw
    x0: np.ndarray
    run: RunConfig
    certificate_raw: Optional[dict]
    controller_raw: Optional[dict]

    def scenario(self, cert=None, controller=None) -> Scenario:
        return Scenario(
            family=self.family,
            law=self.law,
            x0=self.x0,
            horizon=self.run.horizon,
            step=self.run.step,
            cert=cert,
            controller=controller,
        )


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ScenarioError(f"{where}.{key}", "missing required field")
    return section[key]


def _as_float(value, where: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError(where, f"expected a number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ScenarioError(where, f"expected an integer, got {value!r}")
    return value


def _as_matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(where, f"not a numeric matrix: {exc}") from None
    if arr.ndim != 2:
        raise ScenarioError(where, "expected a matrix (list of rows)")
    return arr


def _parse_field(spec, n: int, where: str):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ScenarioError(where, "field spec must be {'linear': ...} or {'polynomial': ...}")
    kind, payload = next(iter(spec.items()))
    if kind == "linear":
        A = _as_matrix(payload, where)
        if A.shape != (n, n):
            raise ScenarioError(where, f"linear field must be {n}x{n}, got {A.shape}")
        return LinearField(A)
    if kind == "polynomial":
        if not isinstance(payload, list) or len(payload) != n:
            raise ScenarioError(where, f"polynomial field needs {n} coordinate lists")
        terms = []
        for c, monos in enumerate(payload):
            coord = []
            for m, mono in enumerate(monos):
                try:
                    coord.append((mono["exponents"], mono["coeff"]))
                except (TypeError, KeyError):
                    raise ScenarioError(
                        f"{where}[{c}][{m}]", "monomial needs 'exponents' and 'coeff'"
                    ) from None
            terms.append(tuple(coord))
        try:
            return PolynomialField(n, tuple(terms))
        except ValueError as exc:
            raise ScenarioError(where, str(exc)) from None
    raise ScenarioError(where, f"unknown field kind {kind!r}")


def _parse_holding(spec, where: str):
    kind = _need(spec, "kind", where)
    try:
        if kind == "exponential":
            return ExponentialHolding(_as_float(_need(spec, "rate", where), f"{where}.rate"))
        if kind == "uniform":
            return UniformHolding(_as_float(_need(spec, "T", where), f"{where}.T"))
        if kind == "point":
            return PointMassHolding(_as_float(_need(spec, "T", where), f"{where}.T"))
        if kind == "tabulated":
            return TabulatedHolding(
                np.asarray(_need(spec, "probabilities", where), dtype=float),
                np.asarray(_need(spec, "durations", where), dtype=float),
            )
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None
    raise ScenarioError(f"{where}.kind", f"unknown holding kind {kind!r}")


def parse_scenario_file(path) -> ScenarioBundle:
    """Load and validate a scenario JSON file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return load_scenario(doc)


def load_scenario(doc: dict) -> ScenarioBundle:
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario document must be a JSON object")

    system = _need(doc, "system", "<root>")
    n = _as_int(_need(system, "dimension", "system"), "system.dimension")
    n_modes = _as_int(_need(system, "modes", "system"), "system.modes")
    if n < 1 or n_modes < 1:
        raise ScenarioError("system", "dimension and modes must be positive")

    drift_spec = _need(system, "drift", "system")
    if not isinstance(drift_spec, list) or len(drift_spec) != n_modes:
        raise ScenarioError("system.drift", f"need one field spec per mode ({n_modes})")
    drift = tuple(_parse_field(s, n, f"system.drift[{i}]") for i, s in enumerate(drift_spec))

    control = None
    if system.get("control") is not None:
        ctl_spec = system["control"]
        if not isinstance(ctl_spec, list) or len(ctl_spec) != n_modes:
            raise ScenarioError("system.control", f"need one field list per mode ({n_modes})")
        control = tuple(
            tuple(_parse_field(s, n, f"system.control[{i}][{j}]") for j, s in enumerate(gs))
            for i, gs in enumerate(ctl_spec)
        )
    try:
        family = SubsystemFamily(n=n, drift=drift, control=control)
    except ValueError as exc:
        raise ScenarioError("system", str(exc)) from None

    sw = _need(doc, "switching", "<root>")
    cls = _need(sw, "class", "switching")
    sigma0 = _as_int(sw.get("sigma0", 0), "switching.sigma0")
    try:
        if cls == "EH":
            law = SwitchingLaw.eh(
                _as_float(_need(sw, "rate", "switching"), "switching.rate"),
                _need(sw, "q", "switching"),
                sigma0,
            )
        elif cls == "UH":
            law = SwitchingLaw.uh(
                _as_float(_need(sw, "T", "switching"), "switching.T"),
                _need(sw, "q", "switching"),
                sigma0,
            )
        elif cls == "GH":
            law = SwitchingLaw.gh(
                _parse_holding(_need(sw, "holding", "switching"), "switching.holding"),
                _as_matrix(_need(sw, "transition_matrix", "switching"),
                           "switching.transition_matrix"),
                sigma0,
            )
        else:
            raise ScenarioError("switching.class", f"unknown class {cls!r}")
    except ValueError as exc:
        raise ScenarioError("switching", str(exc)) from None
    if law.n_modes != n_modes:
        raise ScenarioError("switching", "mode count disagrees with system.modes")

    run = _need(doc, "run", "<root>")
    x0 = np.asarray(_need(run, "x0", "run"), dtype=float).reshape(-1)
    if x0.size != n:
        raise ScenarioError("run.x0", f"expected length {n}, got {x0.size}")
    cfg = RunConfig(
        horizon=_as_float(_need(run, "horizon", "run"), "run.horizon"),
        step=_as_float(run.get("step", DEFAULT_STEP), "run.step"),
        trials=_as_int(run.get("trials", 1000), "run.trials"),
        seed=_as_int(run.get("seed", 0), "run.seed"),
        tail_start=_as_float(run.get("tail_start", 0.0), "run.tail_start"),
        eps=_as_float(run.get("eps", 1e-2), "run.eps"),
    )
    if cfg.horizon < 0 or cfg.step <= 0 or cfg.trials < 1:
        raise ScenarioError("run", "need horizon >= 0, step > 0, trials >= 1")
    if not 0.0 <= cfg.tail_start <= cfg.horizon:
        raise ScenarioError("run.tail_start", "must lie in [0, horizon]")

    return ScenarioBundle(
        family=family,
        law=law,
        x0=x0,
        run=cfg,
        certificate_raw=doc.get("certificate"),
        controller_raw=doc.get("controller"),
    )


def build_certificate(bundle: ScenarioBundle, matrix: Optional[bool] = None,
                      verify: bool = True):
    """Turn the scenario's certificate section into a CertificateFamily.

    Rates are extracted from linear drifts when not declared; the rate
    matrix form is chosen automatically for Markov-destination laws.
    Declared constants are verified pointwise against the open-loop drifts
    (violations make the certificate inapplicable) unless ``verify`` is
    off, as in the synthesis flow where declared rates are closed-loop
    targets checked by the decrease verification instead.
    """
    raw = bundle.certificate_raw
    if raw is None:
        return None, {}
    where = "certificate"
    Pmats = _need(raw, "P", where)
    if not isinstance(Pmats, list) or len(Pmats) != bundle.family.n_modes:
        raise ScenarioError(f"{where}.P", "need one matrix per mode")
    try:
        specs = tuple(
            QuadraticLyapunov(_as_matrix(P, f"{where}.P[{i}]")) for i, P in enumerate(Pmats)
        )
    except ValueError as exc:
        raise ScenarioError(f"{where}.P", str(exc)) from None

    if matrix is None:
        matrix = bundle.law.cls == "GH"
    lam = raw.get("lambda")
    mu = raw.get("mu")
    all_linear = all(isinstance(f, LinearField) for f in bundle.family.drift)
    if lam is None and not all_linear:
        raise ScenarioError(
            f"{where}.lambda", "declared rates are required for non-linear drifts"
        )
    info: dict = {"rates_declared": lam is not None}
    try:
        cert = CertificateFamily.from_quadratic(
            specs,
            drifts=bundle.family.drift if lam is None else None,
            lam=None if lam is None else np.asarray(lam, dtype=float),
            mu=None if mu is None else float(mu),
            matrix=matrix,
        )
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None

    if verify and (lam is not None or mu is not None):
        violations = verify_pointwise(
            bundle.family,
            cert,
            samples=_default_cert_samples(bundle.family.n),
            tol=1e-7,
        )
        info["pointwise_violations"] = len(violations)
        if violations:
            worst = max(violations, key=lambda v: v.residual)
            info["worst_violation"] = {
                "condition": worst.condition,
                "i": worst.i,
                "j": worst.j,
                "residual": worst.residual,
            }
    info["mu"] = cert.mu
    info["lambda"] = cert.lam.tolist()
    return cert, info


def _default_cert_samples(n: int):
    from .certificates import default_sample_points

    return default_sample_points(n, count=1000, seed=0)


def build_controller(bundle: ScenarioBundle, cert):
    """Instantiate the controller section (defaults to the damping feedback)."""
    raw = bundle.controller_raw or {"kind": "universal"}
    kind = raw.get("kind", "universal")
    rates = raw.get("rates")
    if kind == "universal":
        if cert is None:
            raise ScenarioError("controller", "universal controller needs a certificate")
        if bundle.family.control is None:
            raise ScenarioError("controller", "universal controller needs control fields")
        ctl = UniversalController.from_certificate(
            bundle.family, cert, None if rates is None else np.asarray(rates, float)
        )
        return ctl, ctl.rates
    if kind == "linear_gain":
        K = _as_matrix(_need(raw, "K", "controller"), "controller.K")
        if K.shape[1] != bundle.family.n or K.shape[0] != bundle.family.n_inputs:
            raise ScenarioError("controller.K", "gain must be m x n for the family")
        ctl = LinearGainController(K)
    elif kind == "polynomial":
        outputs = _need(raw, "outputs", "controller")
        terms = []
        for c, monos in enumerate(outputs):
            terms.append(tuple((m["exponents"], m["coeff"]) for m in monos))
        try:
            ctl = PolynomialController(
                PolynomialMap(bundle.family.n, bundle.family.n_inputs, tuple(terms))
            )
        except ValueError as exc:
            raise ScenarioError("controller.outputs", str(exc)) from None
    else:
        raise ScenarioError("controller.kind", f"unknown controller kind {kind!r}")
    if rates is None:
        if cert is None:
            raise ScenarioError("controller.rates", "shared controllers need target rates")
        rates = cert.lambda_vector
    return ctl, np.asarray(rates, dtype=float)
