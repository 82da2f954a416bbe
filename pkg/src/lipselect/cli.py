"""Command-line front end.

Verbs: ``separate`` (separations and hierarchies of a space), ``select``
(run the selection iteration over a correspondence), ``plip`` (pointwise
ratio profiles of a stored table), ``bartle-graves`` (the right-inverse
pipeline), ``verify`` (re-check a stored selection sequence).

Exit status: 0 all requested checks pass, 1 a check failed, 2 input
document/schema problem, 3 numeric precondition violation, 4 internal
convergence or degeneracy failure.

Parallelism: LIPSELECT_THREADS caps worker threads (0 = sequential).  The
current implementation is sequential throughout, which satisfies any cap;
the variable is validated and recorded in reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bartle_graves as bg
from .correspondence import Correspondence, LinearSurjection
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateRadiusError,
    IdentifierError,
    InvariantViolationError,
    LipselectError,
    ParameterError,
    PreconditionError,
    RateError,
    ResolutionError,
    SchemaError,
    ShapeError,
)
from .formats import (
    dumps_canonical,
    profile_csv_text,
    selection_csv_text,
    sequence_from_dict,
    sequence_to_dict,
    write_report,
)
from .iteration import (
    IterationConfig,
    Selection,
    limit_selection,
    run_iteration,
    verify_sequence,
)
from .lipschitz import default_radii, plip_profile
from .metric import (
    SampledMetricSpace,
    build_separation_hierarchy,
    covering_radius,
    greedy_maximal_separation,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA = 2
EXIT_PRECONDITION = 3
EXIT_INTERNAL = 4

_SCHEMA_ERRORS = (SchemaError, IdentifierError, ShapeError, ConfigurationError, json.JSONDecodeError)
_INTERNAL_ERRORS = (ConvergenceError, DegenerateRadiusError, RateError, ResolutionError, InvariantViolationError)


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc


def _thread_cap() -> int:
    raw = os.environ.get("LIPSELECT_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ParameterError(f"LIPSELECT_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ParameterError("LIPSELECT_THREADS must be nonnegative")
    return cap


def _merge_config(args: argparse.Namespace, keys) -> dict:
    merged = {}
    if getattr(args, "config", None):
        doc = _load_json(args.config)
        if not isinstance(doc, dict):
            raise SchemaError("--config document must be a JSON object")
        for key, value in doc.items():
            if key not in keys:
                raise SchemaError(f"unknown config key {key!r}")
            merged[key] = value
    for key in keys:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            merged[key] = value
    return merged


def _emit(args, report: dict) -> None:
    if args.out:
        write_report(args.out, report)
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(dumps_canonical(report))


def _cmd_separate(args) -> int:
    opts = _merge_config(args, {"space", "r", "rounds", "out"})
    if "space" not in opts:
        raise SchemaError("separate requires a space document (--space)")
    space = SampledMetricSpace.from_json_dict(_load_json(opts["space"]))
    report: dict = {"command": "separate", "threads": _thread_cap()}
    if opts.get("rounds"):
        hierarchy = build_separation_hierarchy(space, int(opts["rounds"]))
        report["hierarchy"] = hierarchy.to_json_dict()
        report["covering_radii"] = [
            covering_radius(space, rd.members) for rd in hierarchy.rounds
        ]
    else:
        if "r" not in opts:
            raise ParameterError("separate needs --r or --rounds")
        members = greedy_maximal_separation(space, float(opts["r"]))
        report["r"] = float(opts["r"])
        report["B"] = list(members)
        report["covering_radius"] = covering_radius(space, members)
    _emit(args, report)
    return EXIT_OK


def _canonical_point(body) -> np.ndarray:
    from .convex import AffineFlat, Ball, Polytope

    if isinstance(body, AffineFlat):
        return body.base.copy()
    if isinstance(body, Ball):
        return body.center.copy()
    if isinstance(body, Polytope):
        return body.witness.copy()
    raise SchemaError(f"no canonical point for {type(body).__name__}")


def _cmd_select(args) -> int:
    keys = {"correspondence", "iteration", "f0", "out", "tables_dir"}
    opts = _merge_config(args, keys)
    for required in ("correspondence", "iteration"):
        if required not in opts:
            raise SchemaError(f"select requires --{required}")
    phi = Correspondence.from_json_dict(_load_json(opts["correspondence"]))
    cfg_doc = _load_json(opts["iteration"])
    if not isinstance(cfg_doc, dict) or "alpha" not in cfg_doc or "beta" not in cfg_doc:
        raise SchemaError("iteration config must carry at least alpha and beta")
    config = IterationConfig(
        alpha=cfg_doc["alpha"],
        beta=cfg_doc["beta"],
        epsilon=cfg_doc.get("epsilon"),
        rounds=cfg_doc.get("rounds", 4),
        delta_min=cfg_doc.get("delta_min", 1e-9),
        tol=cfg_doc.get("tol", 1e-9),
    )
    if "f0" in opts and opts["f0"]:
        raw = _load_json(opts["f0"])
        if not isinstance(raw, dict) or "values" not in raw:
            raise SchemaError("f0 document must carry a 'values' table")
        values = {}
        by_str = {str(a): a for a in phi.space.point_ids}
        for key, vec in raw["values"].items():
            if key not in by_str:
                raise SchemaError(f"f0 names unknown point {key}")
            values[by_str[key]] = np.asarray(vec, dtype=float)
        f0 = Selection(values=values, round_index=0)
    else:
        f0 = Selection(
            values={a: _canonical_point(phi.body(a)) for a in phi.space.point_ids},
            round_index=0,
        )
    seq = run_iteration(phi, f0, config)
    audit = verify_sequence(seq)
    limit = limit_selection(seq)
    report = {
        "command": "select",
        "threads": _thread_cap(),
        "sequence": sequence_to_dict(seq),
        "tail_bound": limit.tail_bound,
        "checks": {
            **{
                f"round_{r.n}": {
                    name: {"passed": c.passed, "worst": c.worst}
                    for name, c in r.checks.items()
                }
                for r in audit.round_reports
            },
            **{
                name: {"passed": c.passed, "worst": c.worst}
                for name, c in audit.checks.items()
            },
        },
        "passed": audit.passed,
    }
    _emit(args, report)
    if opts.get("tables_dir"):
        tables_dir = Path(opts["tables_dir"])
        tables_dir.mkdir(parents=True, exist_ok=True)
        for sel in seq.selections:
            path = tables_dir / f"f{sel.round_index}.csv"
            path.write_text(selection_csv_text(phi.space, sel), encoding="ascii")
        print(f"selection tables written to {tables_dir}")
    return EXIT_OK if audit.passed else EXIT_CHECK_FAILED


def _cmd_plip(args) -> int:
    keys = {"space", "table", "points", "radii", "out", "profiles_csv"}
    opts = _merge_config(args, keys)
    for required in ("space", "table"):
        if required not in opts:
            raise SchemaError(f"plip requires --{required}")
    space = SampledMetricSpace.from_json_dict(_load_json(opts["space"]))
    raw = _load_json(opts["table"])
    if not isinstance(raw, dict) or "values" not in raw:
        raise SchemaError("table document must carry a 'values' table")
    by_str = {str(a): a for a in space.point_ids}
    values = {}
    for key, vec in raw["values"].items():
        if key not in by_str:
            raise SchemaError(f"table names unknown point {key}")
        values[by_str[key]] = np.asarray(vec, dtype=float)
    if opts.get("radii"):
        radii = [float(x) for x in str(opts["radii"]).split(",")]
    else:
        radii = list(default_radii(space))
    if opts.get("points"):
        points = [by_str[p] for p in str(opts["points"]).split(",") if p in by_str]
        unknown = [p for p in str(opts["points"]).split(",") if p not in by_str]
        if unknown:
            raise IdentifierError(f"unknown point id(s) {unknown!r}")
    else:
        points = list(space.point_ids)
    profiles = [plip_profile(values, space, b, radii) for b in points]
    report = {
        "command": "plip",
        "threads": _thread_cap(),
        "radii": radii,
        "estimates": {str(p.point): p.estimate for p in profiles},
    }
    _emit(args, report)
    if opts.get("profiles_csv"):
        Path(opts["profiles_csv"]).write_text(profile_csv_text(profiles), encoding="ascii")
        print(f"profiles written to {opts['profiles_csv']}")
    return EXIT_OK


def _cmd_bartle_graves(args) -> int:
    keys = {"matrix", "beta", "rounds", "sphere_count", "seed", "out", "tau_csv"}
    opts = _merge_config(args, keys)
    for required in ("matrix", "beta"):
        if required not in opts:
            raise SchemaError(f"bartle-graves requires --{required}")
    T = LinearSurjection.from_json_dict(_load_json(opts["matrix"]))
    ri = bg.build_right_inverse(
        T,
        beta=float(opts["beta"]),
        sphere_count=int(opts.get("sphere_count", 64)),
        seed=int(opts.get("seed", 0)),
        rounds=int(opts.get("rounds", 4)),
    )
    report_obj = bg.verify_right_inverse(ri)
    worst_id_row = max(report_obj.identity_rows, key=lambda r: r.residual)
    worst_hom_row = max(report_obj.homogeneity_rows, key=lambda r: r.max_abs_diff)
    worst_plip_row = max(
        report_obj.plip_report.rows, key=lambda r: r.extension_estimate
    )
    report = {
        "command": "bartle-graves",
        "threads": _thread_cap(),
        "gamma": ri.gamma,
        "alpha": ri.alpha,
        "beta": ri.beta,
        "eta": ri.eta,
        "tail_bound": ri.tail_bound,
        "pinv_gap": ri.pinv_gap,
        "dense_set": list(ri.dense_set),
        "checks": {
            "right_inverse_identity": {
                "passed": report_obj.identity_passed,
                "worst_residual": worst_id_row.residual,
                "witness": {
                    "direction": worst_id_row.direction_index,
                    "scale": worst_id_row.scale,
                },
            },
            "positive_homogeneity": {
                "passed": report_obj.homogeneity_passed,
                "worst_diff": worst_hom_row.max_abs_diff,
                "witness": {
                    "direction": worst_hom_row.direction_index,
                    "scale": worst_hom_row.scale,
                },
            },
            "ray_plip": {
                "passed": report_obj.plip_report.passed,
                "bound": report_obj.plip_report.bound,
                "worst_estimate": worst_plip_row.extension_estimate,
                "witness": {
                    "direction": worst_plip_row.direction_index,
                    "scale": worst_plip_row.scale,
                },
            },
            "dense_covering": {
                "passed": report_obj.covering_passed,
                "covering_radius": report_obj.covering_radius,
                "bound": report_obj.covering_bound,
            },
        },
        "off_sample_identity_residuals": [
            {
                "direction": list(r.direction),
                "nearest_index": r.nearest_index,
                "identity_residual": r.identity_residual,
                "semantic_residual": r.semantic_residual,
            }
            for r in report_obj.off_sample_rows
        ],
        "passed": report_obj.passed,
    }
    _emit(args, report)
    if opts.get("tau_csv"):
        final = ri.sequence.final
        Path(opts["tau_csv"]).write_text(
            selection_csv_text(ri.sphere, final), encoding="ascii"
        )
        print(f"sphere table written to {opts['tau_csv']}")
    return EXIT_OK if report_obj.passed else EXIT_CHECK_FAILED


def _cmd_verify(args) -> int:
    keys = {"correspondence", "sequence", "out"}
    opts = _merge_config(args, keys)
    for required in ("correspondence", "sequence"):
        if required not in opts:
            raise SchemaError(f"verify requires --{required}")
    phi = Correspondence.from_json_dict(_load_json(opts["correspondence"]))
    seq = sequence_from_dict(_load_json(opts["sequence"]), phi)
    audit = verify_sequence(seq)
    report = {
        "command": "verify",
        "threads": _thread_cap(),
        "rounds": [
            {
                "n": r.n,
                "checks": {
                    name: {"passed": c.passed, "worst": c.worst, "detail": c.detail}
                    for name, c in r.checks.items()
                },
                "passed": r.passed,
            }
            for r in audit.round_reports
        ],
        "sequence_checks": {
            name: {"passed": c.passed, "worst": c.worst}
            for name, c in audit.checks.items()
        },
        "passed": audit.passed,
    }
    _emit(args, report)
    for r in audit.round_reports:
        print(f"round {r.n}: {'pass' if r.passed else 'FAIL'}")
    return EXIT_OK if audit.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lipselect",
        description="Pointwise-Lipschitz selections over sampled metric spaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("separate", help="maximal separations and hierarchies")
    p.add_argument("--config")
    p.add_argument("--space")
    p.add_argument("--r", type=float)
    p.add_argument("--rounds", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_separate)

    p = sub.add_parser("select", help="run the selection iteration")
    p.add_argument("--config")
    p.add_argument("--correspondence")
    p.add_argument("--iteration")
    p.add_argument("--f0")
    p.add_argument("--tables-dir", dest="tables_dir")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("plip", help="pointwise Lipschitz profiles")
    p.add_argument("--config")
    p.add_argument("--space")
    p.add_argument("--table")
    p.add_argument("--points")
    p.add_argument("--radii")
    p.add_argument("--profiles-csv", dest="profiles_csv")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plip)

    p = sub.add_parser("bartle-graves", help="homogeneous right-inverse pipeline")
    p.add_argument("--config")
    p.add_argument("--matrix")
    p.add_argument("--beta", type=float)
    p.add_argument("--rounds", type=int)
    p.add_argument("--sphere-count", dest="sphere_count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau-csv", dest="tau_csv")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bartle_graves)

    p = sub.add_parser("verify", help="re-check a stored selection sequence")
    p.add_argument("--config")
    p.add_argument("--correspondence")
    p.add_argument("--sequence")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _SCHEMA_ERRORS as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except PreconditionError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except _INTERNAL_ERRORS as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except LipselectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
