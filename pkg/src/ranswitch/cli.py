"""Command-line entry point: check / simulate / synthesize a scenario file.

Exit codes: 0 success (condition satisfied, simulation completed), 1
domain-level failure (condition unsatisfied, inapplicable certificate, CLF
or decrease violations), 2 usage or parse errors.  All randomness flows
from the scenario's seed (or the --seed override); outputs carry a
schema_version field and are written atomically.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import conditions, montecarlo, scenario as scn_mod, synthesis
from .certificates import default_sample_points
from .scenario import SCHEMA_VERSION, ScenarioBundle, ScenarioError

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _sanitize(obj):
    """Make a structure JSON-safe: plain types, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(payload: dict) -> str:
    return json.dumps(_sanitize(payload), indent=2, sort_keys=True)


def _write_atomic(path: Path, write_fn) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _apply_overrides(bundle: ScenarioBundle, args) -> ScenarioBundle:
    run = bundle.run
    updates = {}
    for name in ("trials", "seed", "horizon", "step", "tail_start", "eps"):
        val = getattr(args, name, None)
        if val is not None:
            updates[name] = val
    if updates:
        run = dataclasses.replace(run, **updates)
        if not 0.0 <= run.tail_start <= run.horizon:
            raise ScenarioError("run.tail_start", "must lie in [0, horizon]")
        bundle = ScenarioBundle(
            family=bundle.family,
            law=bundle.law,
            x0=bundle.x0,
            run=run,
            certificate_raw=bundle.certificate_raw,
            controller_raw=bundle.controller_raw,
        )
    return bundle


def _condition_verdict(bundle: ScenarioBundle, cert) -> conditions.ConditionVerdict:
    law = bundle.law
    lam_v = cert.lambda_vector
    if law.cls == "EH":
        return conditions.check_eh(lam_v, cert.mu, law.jumps.q, law.holding.rate)
    if law.cls == "UH":
        return conditions.check_uh(lam_v, cert.mu, law.jumps.q, law.holding.T)
    return conditions.check_gh(cert.lambda_matrix, cert.mu, law.jumps.P, law.holding)


def cmd_check(args) -> int:
    bundle = scn_mod.parse_scenario_file(args.scenario)
    cert, info = scn_mod.build_certificate(bundle)
    if cert is None:
        raise ScenarioError("certificate", "check requires a certificate section")
    payload = {"schema_version": SCHEMA_VERSION, "certificate": info}
    if info.get("pointwise_violations"):
        payload["verdict"] = {
            "condition": bundle.law.cls,
            "satisfied": False,
            "margin": None,
            "terms": [],
            "inapplicable_reason": "declared certificate violated pointwise",
        }
        print(_dump_json(payload))
        return EXIT_DOMAIN
    verdict = _condition_verdict(bundle, cert)
    payload["verdict"] = verdict.to_json_dict()
    print(_dump_json(payload))
    return EXIT_OK if verdict.satisfied else EXIT_DOMAIN


def _simulate_payload(bundle: ScenarioBundle, cert, controller) -> tuple[dict, object]:
    run = bundle.run
    scn = bundle.scenario(cert=cert, controller=controller)
    stats = montecarlo.run_ensemble(
        scn, trials=run.trials, master_seed=run.seed, tail_start=run.tail_start
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "ensemble": stats.summary_dict(eps=run.eps),
        "gasp": montecarlo.gasp_estimate(stats, eps=run.eps, t_star=run.tail_start).to_json_dict(),
    }
    if cert is not None:
        verdict = _condition_verdict(bundle, cert)
        payload["verdict"] = verdict.to_json_dict()
        if verdict.satisfied:
            payload["decay"] = montecarlo.decay_check(
                stats, cert, bundle.law, bundle.x0
            ).to_json_dict()
            if bundle.law.cls == "UH":
                x0_norm = float(np.linalg.norm(bundle.x0))
                payload["mean_bound"] = {
                    "bound": conditions.mean_bound_uh(cert, bundle.law, x0_norm),
                    "empirical_mean_v_sup": float(np.nanmax(stats.mean_v)),
                }
    return payload, stats


def _write_outputs(args, name: str, payload: dict, stats) -> dict:
    out_dir = Path(args.out_dir) if args.out_dir else Path(".")
    summary_path = out_dir / f"{name}_summary.json"
    csv_path = out_dir / f"{name}_trajectories.csv"
    text = _dump_json(payload)
    _write_atomic(summary_path, lambda fh: fh.write(text + "\n"))
    _write_atomic(csv_path, stats.to_csv)
    return {"summary": str(summary_path), "trajectories": str(csv_path)}


def cmd_simulate(args) -> int:
    bundle = _apply_overrides(scn_mod.parse_scenario_file(args.scenario), args)
    cert, info = scn_mod.build_certificate(bundle)
    if info.get("pointwise_violations"):
        print("certificate: declared rates violated pointwise; simulating without decay check",
              file=sys.stderr)
        cert = None
    payload, stats = _simulate_payload(bundle, cert, controller=None)
    payload["outputs"] = _write_outputs(args, Path(args.scenario).stem, payload, stats)
    print(_dump_json(payload))
    return EXIT_OK


def cmd_synthesize(args) -> int:
    bundle = _apply_overrides(scn_mod.parse_scenario_file(args.scenario), args)
    if bundle.family.control is None:
        raise ScenarioError("system.control", "synthesis requires control fields")
    # declared rates are closed-loop targets here; the decrease check below
    # replaces the open-loop pointwise verification
    cert, info = scn_mod.build_certificate(bundle, verify=False)
    if cert is None:
        raise ScenarioError("certificate", "synthesis requires a certificate section")
    controller, rates = scn_mod.build_controller(bundle, cert)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "certificate": info,
        "controller": controller.to_json_dict(),
    }
    payload["controller"]["rates"] = [float(r) for r in rates]
    if args.out_dir:
        text = _dump_json(payload["controller"])
        _write_atomic(
            Path(args.out_dir) / f"{Path(args.scenario).stem}_controller.json",
            lambda fh: fh.write(text + "\n"),
        )
    if args.emit_controller:
        print(_dump_json(payload))
        return EXIT_OK

    samples = default_sample_points(bundle.family.n, count=1000, seed=0)
    violations = synthesis.verify_closed_loop_decrease(
        bundle.family, cert, controller, samples, tol=1e-8, rates=rates
    )
    payload["decrease_check"] = {
        "samples": int(samples.shape[0]),
        "violations": [
            {"mode": v.mode, "x": v.x.tolist(), "residual": v.residual}
            for v in violations[:20]
        ],
        "violation_count": len(violations),
    }
    if violations:
        print(_dump_json(payload))
        return EXIT_DOMAIN

    law = bundle.law
    if law.cls == "EH":
        verdict = conditions.check_eh(rates, cert.mu, law.jumps.q, law.holding.rate)
    elif law.cls == "UH":
        verdict = conditions.check_uh(rates, cert.mu, law.jumps.q, law.holding.T)
    else:
        raise ScenarioError(
            "switching.class", "closed-loop certification supports EH and UH laws"
        )
    payload["verdict"] = verdict.to_json_dict()
    if not verdict.satisfied:
        print(_dump_json(payload))
        return EXIT_DOMAIN

    closed_cert = dataclasses.replace(cert, lam=np.asarray(rates, dtype=float))
    sim_payload, stats = _simulate_payload(bundle, closed_cert, controller)
    payload["simulation"] = sim_payload
    payload["outputs"] = _write_outputs(
        args, Path(args.scenario).stem + "_closedloop", sim_payload, stats
    )
    print(_dump_json(payload))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranswitch",
        description="Randomly switched systems: certificate checks, Monte Carlo "
        "simulation, and feedback synthesis from scenario files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, overrides=True):
        p.add_argument("scenario", help="path to a scenario JSON file")
        if overrides:
            p.add_argument("--trials", type=int, default=None)
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--horizon", type=float, default=None)
            p.add_argument("--step", type=float, default=None)
            p.add_argument("--tail-start", dest="tail_start", type=float, default=None)
            p.add_argument("--eps", type=float, default=None)
            p.add_argument("--out-dir", dest="out_dir", default=None)

    p_check = sub.add_parser("check", help="evaluate the stability condition")
    add_common(p_check, overrides=False)
    p_check.set_defaults(fn=cmd_check)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo ensemble")
    add_common(p_sim)
    p_sim.set_defaults(fn=cmd_simulate)

    p_syn = sub.add_parser("synthesize", help="build and verify a feedback controller")
    add_common(p_syn)
    p_syn.add_argument("--emit-controller", action="store_true",
                       help="write the controller description and stop")
    p_syn.set_defaults(fn=cmd_synthesize)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
