"""File-driven command line front end.

Problems arrive as JSON files; every command prints one JSON report to
stdout with fixed field order and 17-significant-digit floats, so equal
inputs give byte-identical reports.  Exit codes: 0 success, 2 property
failure, 3 input error, 4 numerical not-found/singular.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from .characterize import (
    DisconjugacyError,
    NaViolationError,
    SubsetError,
    TildeFormError,
    constant_sign_interval,
    necessary_interval,
    nonexistence_check,
    nonhomogeneous_interval,
)
from .coeffexpr import ExprError, parse_expr
from .greenfn import (
    INDETERMINATE,
    SingularOperatorError,
    build_green,
    classify_sign,
    pg_ng_bounds,
)
from .odecore import (
    DEFAULT_STEPS,
    IntegrationOverflowError,
    WronskianCollapseError,
    integrate_fundamental,
    markov_decomposition,
)
from .problem import (
    ProblemSpec,
    SpaceCollisionError,
    SpaceVariant,
    ValidationError,
    adjoint_boundary_conditions,
    build_space,
    check_na,
    derive_indices,
)
from .spectral import (
    Direction,
    EigenvalueNotFoundError,
    SearchConfig,
    SingularReferenceError,
    find_eigenvalue,
)

EXIT_OK = 0
EXIT_PROPERTY = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Deterministic JSON emission
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite float in report")
    return format(float(x), ".17g")


def _emit(obj, out: list):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _emit(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(",")
            _emit(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def render_report(report: dict) -> str:
    out: list[str] = []
    _emit(report, out)
    return "".join(out) + "\n"


def _plain(x):
    """Convert numpy containers to plain python for the emitter."""
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    return x


# ---------------------------------------------------------------------------
# Problem file loading
# ---------------------------------------------------------------------------

_TOP_KEYS = {
    "order",
    "interval",
    "coefficients",
    "m_bar",
    "sigma",
    "epsilon",
    "search",
    "grid",
    "td_hypothesis",
}
_SEARCH_KEYS = {"lambda_max", "grid_points", "refine_tol"}
_GRID_KEYS = {"n_t", "n_s"}


def _need(cond: bool, message: str):
    if not cond:
        raise InputError(message)


def _int(value, what: str) -> int:
    _need(isinstance(value, int) and not isinstance(value, bool), f"{what} must be an integer")
    return value


def _num(value, what: str) -> float:
    _need(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"{what} must be a number",
    )
    return float(value)


def _int_list(value, what: str) -> list[int]:
    _need(isinstance(value, list), f"{what} must be a list of integers")
    return [_int(v, f"{what} entry") for v in value]


def load_problem(path: str):
    """Parse and validate a problem file; returns (spec, cfg, grid, td)."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from exc
    _need(isinstance(data, dict), "problem file must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    _need(not unknown, f"unknown keys in problem file: {sorted(unknown)}")
    for key in ("order", "interval", "coefficients", "sigma", "epsilon"):
        _need(key in data, f"missing required key {key!r}")

    order = _int(data["order"], "order")
    interval = data["interval"]
    _need(isinstance(interval, list) and len(interval) == 2, "interval must be [a, b]")
    a, b = (_num(v, "interval endpoint") for v in interval)
    coeff_texts = data["coefficients"]
    _need(
        isinstance(coeff_texts, list) and all(isinstance(c, str) for c in coeff_texts),
        "coefficients must be a list of expression strings",
    )
    _need(len(coeff_texts) == order, f"expected {order} coefficients, got {len(coeff_texts)}")
    try:
        exprs = tuple(parse_expr(text) for text in coeff_texts)
    except ExprError as exc:
        raise InputError(f"bad coefficient expression: {exc}") from exc
    m_bar = _num(data.get("m_bar", 0.0), "m_bar")
    sigma = _int_list(data["sigma"], "sigma")
    epsilon = _int_list(data["epsilon"], "epsilon")

    search = data.get("search", {})
    _need(isinstance(search, dict), "search must be an object")
    unknown = set(search) - _SEARCH_KEYS
    _need(not unknown, f"unknown keys in search: {sorted(unknown)}")
    cfg_kwargs = {}
    if "lambda_max" in search:
        cfg_kwargs["lambda_max"] = _num(search["lambda_max"], "search.lambda_max")
    if "grid_points" in search:
        cfg_kwargs["grid_points"] = _int(search["grid_points"], "search.grid_points")
    if "refine_tol" in search:
        cfg_kwargs["refine_tol"] = _num(search["refine_tol"], "search.refine_tol")

    grid = data.get("grid", {})
    _need(isinstance(grid, dict), "grid must be an object")
    unknown = set(grid) - _GRID_KEYS
    _need(not unknown, f"unknown keys in grid: {sorted(unknown)}")
    n_t = _int(grid.get("n_t", 201), "grid.n_t")
    n_s = _int(grid.get("n_s", 201), "grid.n_s")
    _need(n_t >= 3 and n_s >= 3, "grid sizes must be >= 3")

    td = data.get("td_hypothesis", "check")
    _need(td in ("assert", "check"), "td_hypothesis must be 'assert' or 'check'")

    try:
        spec = ProblemSpec(
            n=order, a=a, b=b, p=exprs, m_bar=m_bar,
            sigma=tuple(sigma), epsilon=tuple(epsilon),
        )
        cfg = SearchConfig(**cfg_kwargs)
    except ValidationError as exc:
        raise InputError(str(exc)) from exc
    return spec, cfg, (n_t, n_s), td, coeff_texts


def _echo(spec: ProblemSpec, cfg: SearchConfig, grid, td, coeff_texts) -> dict:
    return {
        "order": spec.n,
        "interval": [spec.a, spec.b],
        "coefficients": list(coeff_texts),
        "m_bar": spec.m_bar,
        "sigma": list(spec.sigma),
        "epsilon": list(spec.epsilon),
        "search": {
            "lambda_max": cfg.resolved_lambda_max(spec),
            "grid_points": cfg.grid_points,
            "refine_tol": cfg.refine_tol,
        },
        "grid": {"n_t": grid[0], "n_s": grid[1]},
        "td_hypothesis": td,
        "steps": DEFAULT_STEPS,
    }


def _indices_dict(spec: ProblemSpec) -> dict:
    ind = derive_indices(spec)
    return {
        "alpha": ind.alpha,
        "beta": ind.beta,
        "eta": ind.eta,
        "gamma": ind.gamma,
        "tau": list(ind.tau),
        "delta": list(ind.delta),
        "alpha2": ind.alpha2,
        "beta2": ind.beta2,
        "mu": ind.mu,
    }


def _eigen_dict(record) -> dict:
    ev = record.eigenvalue
    space = ev.space
    if hasattr(space, "sigma_set"):
        space_out = {"sigma": list(space.sigma_set), "epsilon": list(space.epsilon_set)}
    else:
        space_out = [
            {"endpoint": f.endpoint, "coefficients": list(f.coefficients)} for f in space
        ]
    return {
        "name": record.name,
        "lambda": ev.lam,
        "space": space_out,
        "bracket": [ev.bracket[0], ev.bracket[1]],
        "residual": ev.residual,
        "simple": ev.simple,
        "warnings": list(ev.warnings),
    }


def _endpoint_dict(endpoint) -> dict:
    if endpoint.infinite:
        return {"infinite": True, "closed": endpoint.closed}
    return {"value": endpoint.value, "closed": endpoint.closed, "infinite": False}


def _interval_dict(result) -> dict:
    out = {
        "classification": result.classification,
        "rendered": result.render(),
        "lower": _endpoint_dict(result.lower),
        "upper": _endpoint_dict(result.upper),
        "hypothesis": result.hypothesis,
        "provenance": {},
    }
    if result.lower_provenance is not None:
        out["provenance"]["lower"] = _eigen_dict(result.lower_provenance)
    if result.upper_provenance is not None:
        out["provenance"]["upper"] = _eigen_dict(result.upper_provenance)
    return out


def _sample_shift(result, m_bar: float) -> float:
    if result.contains(m_bar):
        return m_bar
    if not result.lower.infinite and not result.upper.infinite:
        return 0.5 * (result.lower.value + result.upper.value)
    if result.lower.infinite:
        return result.upper.value - max(1.0, abs(result.upper.value))
    return result.lower.value + max(1.0, abs(result.lower.value))


_SPACE_FLAGS = {
    "base": SpaceVariant.BASE,
    "drop-sigma-add-beta": SpaceVariant.DROP_SIGMA_K_ADD_BETA,
    "add-alpha-drop-eps": SpaceVariant.ADD_ALPHA_DROP_EPS_LAST,
    "drop-sigma-add-alpha": SpaceVariant.DROP_SIGMA_K_ADD_ALPHA,
    "drop-eps-add-beta": SpaceVariant.DROP_EPS_LAST_ADD_BETA,
}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_check(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    na = check_na(spec.sigma, spec.epsilon, spec.n)
    conditions = [
        {"endpoint": f.endpoint, "coefficients": list(f.coefficients)}
        for f in adjoint_boundary_conditions(spec)
    ]
    report = {
        "command": "check",
        "input": _echo(spec, cfg, grid, td, texts),
        "na": na,
        "indices": _indices_dict(spec),
        "adjoint_conditions": conditions,
        "warnings": [],
    }
    return report, EXIT_OK if na else EXIT_PROPERTY


def cmd_eigen(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    space = build_space(spec, _SPACE_FLAGS[args.space])
    direction = Direction(args.direction)
    ev = find_eigenvalue(spec, space, direction, cfg)
    report = {
        "command": "eigen",
        "input": _echo(spec, cfg, grid, td, texts),
        "space_flag": args.space,
        "direction": args.direction,
        "eigenvalue": {
            "lambda": ev.lam,
            "space": {"sigma": list(space.sigma_set), "epsilon": list(space.epsilon_set)},
            "bracket": [ev.bracket[0], ev.bracket[1]],
            "residual": ev.residual,
            "simple": ev.simple,
        },
        "warnings": list(ev.warnings),
    }
    return report, EXIT_OK


def _sign_check(spec, result, grid) -> dict:
    m_sample = _sample_shift(result, spec.m_bar)
    gf = build_green(spec, m_sample, min(grid[0], 101), min(grid[1], 101))
    report = classify_sign(gf)
    return {
        "m": m_sample,
        "classification": report.classification,
        "matches": report.classification == result.classification,
    }


def cmd_interval(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    result = constant_sign_interval(spec, cfg, td)
    report = {
        "command": "interval",
        "input": _echo(spec, cfg, grid, td, texts),
        "na": True,
        "indices": _indices_dict(spec),
        "interval": _interval_dict(result),
        "sign_check": _sign_check(spec, result, grid),
        "warnings": list(result.warnings),
    }
    if td == "check":
        report["disconjugacy"] = {"window": [spec.a, spec.b], "certified": True}
    return report, EXIT_OK


def cmd_necessary(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    result = necessary_interval(spec, cfg, td)
    flags = nonexistence_check(spec)
    report = {
        "command": "necessary",
        "input": _echo(spec, cfg, grid, td, texts),
        "indices": _indices_dict(spec),
        "nonexistence": {
            "no_inverse_negative": flags.no_inverse_negative,
            "no_inverse_positive": flags.no_inverse_positive,
            "trigger": list(flags.trigger),
        },
        "necessary": None if result is None else {
            "classification": result.classification,
            "rendered": result.render(),
            "lower": _endpoint_dict(result.lower),
            "upper": _endpoint_dict(result.upper),
            "sufficient": result.sufficient,
            "provenance": {
                "lower": _eigen_dict(result.lower_provenance),
                "upper": _eigen_dict(result.upper_provenance),
            },
        },
        "warnings": [],
    }
    return report, EXIT_OK


def cmd_nonhomog(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    try:
        subsets = json.loads(args.subsets)
    except json.JSONDecodeError as exc:
        raise InputError(f"--subsets is not valid JSON: {exc}") from exc
    _need(isinstance(subsets, dict) and set(subsets) == {"sigma", "epsilon"},
          "--subsets must be an object with keys sigma and epsilon")
    sig_sub = _int_list(subsets["sigma"], "subsets.sigma")
    eps_sub = _int_list(subsets["epsilon"], "subsets.epsilon")
    result = nonhomogeneous_interval(spec, sig_sub, eps_sub, cfg, td)
    report = {
        "command": "nonhomog",
        "input": _echo(spec, cfg, grid, td, texts),
        "subsets": {"sigma": sig_sub, "epsilon": eps_sub},
        "interval": _interval_dict(result),
        "warnings": list(result.warnings),
    }
    return report, EXIT_OK


def cmd_green(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    m = spec.m_bar if args.M is None else float(args.M)
    gf = build_green(spec, m, grid[0], grid[1])
    sign = classify_sign(gf)

    lines = ["t,s,g"]
    for i, t in enumerate(gf.t_grid):
        for j, s in enumerate(gf.s_grid):
            lines.append(f"{_fmt_float(t)},{_fmt_float(s)},{_fmt_float(gf.values[i, j])}")
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    sidecar = {
        "m": m,
        "classification": sign.classification,
        "interior_sign_ok": sign.interior_sign_ok,
        "d_alpha_ok": sign.d_alpha_ok,
        "d_beta_ok": sign.d_beta_ok,
        "worst_violation": _plain(sign.worst_violation),
        "bc_residual": gf.bc_residual,
        "jump_residual": gf.jump_residual,
        "s_grid": _plain(gf.s_grid),
        "t_grid": _plain(gf.t_grid),
        "d_alpha_at_a": _plain(gf.d_alpha_at_a),
        "d_beta_at_b": _plain(gf.d_beta_at_b),
        "d_eta_at_sa": _plain(gf.d_eta_at_sa),
        "d_gamma_at_sb": _plain(gf.d_gamma_at_sb),
    }
    if sign.classification != INDETERMINATE:
        k1, k2 = pg_ng_bounds(gf)
        sidecar["k1"] = _plain(k1)
        sidecar["k2"] = _plain(k2)
    sidecar_path = args.out + ".json"
    with open(sidecar_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(render_report(sidecar))

    report = {
        "command": "green",
        "input": _echo(spec, cfg, grid, td, texts),
        "m": m,
        "csv": args.out,
        "sidecar": sidecar_path,
        "classification": sign.classification,
        "bc_residual": gf.bc_residual,
        "jump_residual": gf.jump_residual,
        "warnings": list(gf.warnings),
    }
    return report, EXIT_OK


def cmd_decompose(args) -> tuple[dict, int]:
    spec, cfg, grid, td, texts = load_problem(args.file)
    fs = integrate_fundamental(spec, spec.m_bar)
    dec = markov_decomposition(fs)
    count = dec.nodes.shape[0]
    take = np.linspace(0, count - 1, min(count, 33)).astype(int)
    report = {
        "command": "decompose",
        "input": _echo(spec, cfg, grid, td, texts),
        "window": [dec.window[0], dec.window[1]],
        "full": dec.full,
        "first_failure": None if dec.first_failure is None else {
            "t": dec.first_failure[0],
            "k": dec.first_failure[1],
        },
        "v_samples": {
            "t": _plain(dec.nodes[take]),
            "v": _plain(dec.v[:, take]),
        },
        "warnings": [],
    }
    return report, EXIT_OK if dec.full else EXIT_PROPERTY


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greensign",
        description="Constant-sign characterization of Green's functions for "
        "two-point boundary value problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn):
        p = sub.add_parser(name)
        p.add_argument("file", help="problem JSON file")
        p.set_defaults(fn=fn)
        return p

    add("check", cmd_check)
    p_eigen = add("eigen", cmd_eigen)
    p_eigen.add_argument("--space", choices=sorted(_SPACE_FLAGS), default="base")
    p_eigen.add_argument(
        "--direction",
        choices=[d.value for d in Direction],
        required=True,
    )
    add("interval", cmd_interval)
    add("necessary", cmd_necessary)
    p_nh = add("nonhomog", cmd_nonhomog)
    p_nh.add_argument("--subsets", required=True,
                      help='JSON like {"sigma": [0,2], "epsilon": [1,3]}')
    p_green = add("green", cmd_green)
    p_green.add_argument("--M", type=float, default=None)
    p_green.add_argument("--out", required=True)
    add("decompose", cmd_decompose)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        report, code = args.fn(args)
    except (InputError, ValidationError, ExprError, SubsetError, TildeFormError,
            SpaceCollisionError) as exc:
        sys.stdout.write(render_report({"error": {"type": "input", "message": str(exc)}}))
        return EXIT_INPUT
    except (NaViolationError, DisconjugacyError) as exc:
        sys.stdout.write(render_report({"error": {"type": "property", "message": str(exc)}}))
        return EXIT_PROPERTY
    except EigenvalueNotFoundError as exc:
        sys.stdout.write(
            render_report(
                {
                    "error": {
                        "type": "not-found",
                        "message": str(exc),
                        "searched": [exc.searched[0], exc.searched[1]],
                        "warnings": list(exc.warnings),
                    }
                }
            )
        )
        return EXIT_NUMERIC
    except (SingularOperatorError, SingularReferenceError, IntegrationOverflowError,
            WronskianCollapseError) as exc:
        sys.stdout.write(render_report({"error": {"type": "numerical", "message": str(exc)}}))
        return EXIT_NUMERIC
    sys.stdout.write(render_report(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
