"""Command-line driver: verification suites, evolution runs and resource reports."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import blockenc, evolution, polaron
from .models import (
    DickeParams,
    FermionLattice,
    FrohlichParams,
    HubbardHolsteinParams,
    SSHParams,
    bonds,
    hh_hamiltonian,
    hh_layout,
)
from .operators import DimensionCapError, Quantisation, unitarity_error
from .resources import Component, CostParams, complexity_table, gate_cost

__all__ = ["RunConfig", "ConfigError", "run_verify", "run_evolve", "run_resources", "run_table1", "main"]

MODEL_TYPES = {
    "HubbardHolstein": HubbardHolsteinParams,
    "Dicke": DickeParams,
    "Frohlich": FrohlichParams,
    "SSH": SSHParams,
}
CUTOFF_KEYS = ("cutoff", "Λ", "Lambda")
CHECKS = ("residual", "conjugation", "unitarity", "block_hop", "block_diagonal", "pushing")

VERIFY_COLUMNS = ["check_name", "params", "measured", "threshold", "pass", "skipped"]
EVOLVE_COLUMNS = ["t", "ε_target", "ε_measured", "r", "K", "L", "wall_time", "params"]
RESOURCE_COLUMNS = ["component", "params", "toffoli", "t_gates", "ancilla", "temp_ancilla"]
TABLE1_COLUMNS = ["row", "params", "value", "lambda_term", "lambda_ratio"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (exit code 2)."""


class EvolveOptions(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    t: float = 1.0
    eps: float = Field(1e-2, alias="ε", gt=0, le=0.1)
    h0_method: Literal["auto", "exact"] = "auto"
    fixed_plan: bool = False


class VerifyOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    low_fraction: float = Field(0.25, gt=0, le=0.25)
    dps: int | None = Field(None, ge=16)
    trials: int = Field(5, ge=1)
    tolerance: float = Field(1e-10, gt=0)


class RunConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    command: Literal["verify", "evolve", "resources", "table1"] | None = None
    model: dict | None = None
    sweep: dict[str, list] | None = None
    checks: list[str] = Field(default_factory=lambda: ["residual"])
    verify: VerifyOptions = Field(default_factory=VerifyOptions)
    evolve: EvolveOptions = Field(default_factory=EvolveOptions)
    components: list[str] = Field(default_factory=list)
    cost_params: dict = Field(default_factory=dict)
    seed: int = 0
    dimension_cap: int | None = Field(None, ge=1)

    @field_validator("sweep")
    @classmethod
    def _nonempty(cls, v):
        if v is not None:
            if not v:
                raise ValueError("sweep must name at least one parameter")
            for k, vals in v.items():
                if not vals:
                    raise ValueError(f"sweep list for {k!r} is empty")
        return v


# ---------------------------------------------------------------- helpers


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _points(cfg: RunConfig, base: dict) -> list[dict]:
    if not cfg.sweep:
        return [dict(base)]
    keys = sorted(cfg.sweep)
    return [dict(base, **dict(zip(keys, combo))) for combo in itertools.product(*(cfg.sweep[k] for k in keys))]


def _model(cfg: RunConfig, doc: dict):
    doc = dict(doc)
    kind = doc.pop("type", None)
    if kind not in MODEL_TYPES:
        raise ConfigError(f"model.type must be one of {sorted(MODEL_TYPES)}, got {kind!r}")
    if cfg.dimension_cap is not None:
        doc["max_dim"] = cfg.dimension_cap
    try:
        return MODEL_TYPES[kind].model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid model parameters: {e}") from None


def _params_doc(p) -> dict:
    doc = p.to_json_dict()
    doc.pop("max_dim", None)
    doc["type"] = next(k for k, v in MODEL_TYPES.items() if isinstance(p, v))
    return doc


def _key(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _sort_key(doc: dict) -> tuple:
    """Order rows by parameter tuple, numbers numerically."""
    out = []
    for k in sorted(doc):
        v = doc[k]
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append((k, 0, float(v), ""))
        else:
            out.append((k, 1, 0.0, _key({"v": v})))
    return tuple(out)


def _row(check: str, params: dict, measured, threshold, ok, skipped=False) -> dict:
    return {
        "check_name": check,
        "params": params,
        "measured": None if measured is None else float(measured),
        "threshold": threshold,
        "pass": ok,
        "skipped": skipped,
    }


def _require_hh(p, check: str):
    if not isinstance(p, HubbardHolsteinParams):
        raise ConfigError(f"check {check!r} needs a HubbardHolstein model")


# ---------------------------------------------------------------- verify


def _check(check: str, p, cfg: RunConfig, rng) -> tuple[float, float | None]:
    """Return (measured, threshold); threshold None means informational."""
    tol = cfg.verify.tolerance
    if check == "residual":
        return polaron.diagonalization_residual(p, cfg.verify.low_fraction, dps=cfg.verify.dps), None
    _require_hh(p, check)
    if check == "conjugation":
        if p.quantisation is not Quantisation.FirstQ:
            raise ConfigError("conjugation check needs quantisation FirstQ")
        d = polaron.build_polaron_hh(p).unitary
        lhs = polaron.conjugate(hh_hamiltonian(p)["H_f_hop"], d).matrix
        return float(np.max(np.abs(lhs - polaron.transformed_v_hh(p).matrix))), tol
    if check == "unitarity":
        return unitarity_error(polaron.build_polaron_hh(p).unitary), 1e-12
    if check == "block_hop":
        be = blockenc.be_hop(p)
        lat = FermionLattice(p.N, 2, p.max_dim)
        return blockenc.verify_block(be, lat.hubbard_hopping(bonds(p.N, p.boundary))), tol
    if check == "block_diagonal":
        eps = 2**-6
        dim = FermionLattice(p.N, 2, p.max_dim).dim
        worst = 0.0
        for _ in range(cfg.verify.trials):
            d = rng.random(dim)
            be = blockenc.be_diagonal(d, dim, eps)
            worst = max(worst, blockenc.verify_block(be, np.diag(d)) / be.alpha)
        return worst, 1 / blockenc.sample_space_size(eps)
    if check == "pushing":
        dim = hh_layout(p).total_dim
        worst = 0.0
        for _ in range(cfg.verify.trials):
            psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            lhs, rhs = evolution.expectation_pushing_check(p, 1.0, psi / np.linalg.norm(psi), a + a.conj().T)
            worst = max(worst, abs(lhs - rhs))
        return worst, tol
    raise ConfigError(f"unknown check {check!r}; known: {', '.join(CHECKS)}")


def _monotone_rows(rows: list[dict]) -> list[dict]:
    groups: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r["check_name"] != "residual" or r["skipped"]:
            continue
        key_name = next((k for k in CUTOFF_KEYS if k in r["params"]), None)
        if key_name is None:
            continue
        rest = {k: v for k, v in r["params"].items() if k != key_name}
        groups.setdefault(_key(rest), []).append((r["params"][key_name], r["measured"]))
    out = []
    for rest, pts in groups.items():
        pts.sort()
        if len(pts) < 2:
            continue
        vals = [v for _, v in pts]
        ok = all(b < a for a, b in zip(vals, vals[1:]))
        params = dict(json.loads(rest), cutoffs=[c for c, _ in pts])
        out.append(_row("residual_monotone", params, None, None, ok))
    return out


def run_verify(cfg: RunConfig) -> dict:
    if cfg.model is None:
        raise ConfigError("verify needs a model document")
    unknown = [c for c in cfg.checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    rng = _rng(cfg.seed)
    rows = []
    for doc in _points(cfg, cfg.model):
        p = _model(cfg, doc)
        params = _params_doc(p)
        for check in cfg.checks:
            try:
                measured, thr = _check(check, p, cfg, rng)
            except DimensionCapError:
                rows.append(_row(check, params, None, None, None, skipped=True))
                continue
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(f"{check}: {e}") from None
            ok = bool(np.isfinite(measured)) if thr is None else bool(measured <= thr)
            rows.append(_row(check, params, measured, thr, ok))
    rows += _monotone_rows(rows)
    rows.sort(key=lambda r: (_sort_key(r["params"]), r["check_name"]))
    return _report("verify", rows)


def _report(command: str, rows: list[dict]) -> dict:
    ok = all(r["pass"] for r in rows if not r.get("skipped"))
    return {"command": command, "pass": ok, "rows": rows}


# ---------------------------------------------------------------- evolve


def run_evolve(cfg: RunConfig) -> dict:
    if cfg.model is None:
        raise ConfigError("evolve needs a model document")
    base = dict(cfg.model)
    base.setdefault("t", cfg.evolve.t)
    base.setdefault("ε", cfg.evolve.eps)
    rows = []
    plans: dict[str, evolution.DysonPlan] = {}
    points = _points(cfg, base)
    for doc in points:
        doc = dict(doc)
        t = float(doc.pop("t"))
        eps = float(doc.pop("ε"))
        p = _model(cfg, doc)
        _require_hh(p, "evolve")
        params = dict(_params_doc(p), t=t, ε=eps, h0_method=cfg.evolve.h0_method)
        row = {"t": t, "ε_target": eps, "params": params, "wall_time": None}
        try:
            plan = None
            if cfg.evolve.fixed_plan and t != 0:
                # one plan per model, taken from the shortest nonzero time
                gkey = _key(dict(_params_doc(p), ε=eps))
                if gkey not in plans:
                    t_min = min(abs(float(q["t"])) for q in points if float(q["t"]) != 0)
                    plans[gkey] = evolution.interaction_picture_evolution(
                        p, t_min, eps, h0_method=cfg.evolve.h0_method, return_details=True
                    ).plan
                plan = plans[gkey]
            res = evolution.interaction_picture_evolution(
                p, t, eps, h0_method=cfg.evolve.h0_method, return_details=True, plan=plan
            )
            oracle = evolution.exact_evolution(evolution.effective_hamiltonian_hh(p), t).matrix
        except ValueError as e:
            if isinstance(e, DimensionCapError):
                row.update({"ε_measured": None, "r": None, "K": None, "L": None, "pass": None, "skipped": True})
                rows.append(row)
                continue
            raise ConfigError(str(e)) from None
        err = float(np.linalg.norm(res.propagator.matrix - oracle, 2))
        plan = res.plan
        row.update(
            {
                "ε_measured": err,
                "r": None if plan is None else plan.r,
                "K": None if plan is None else plan.K,
                "L": None if plan is None else plan.L,
                "pass": err <= eps,
                "skipped": False,
            }
        )
        rows.append(row)
    rows.sort(key=lambda r: _sort_key(r["params"]))
    return _report("evolve", rows)


# ---------------------------------------------------------------- resources


def _cost_params(doc: dict) -> CostParams:
    try:
        return CostParams.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid cost parameters: {e}") from None


def run_resources(cfg: RunConfig) -> dict:
    if not cfg.components:
        raise ConfigError("resources needs a nonempty components list")
    unknown = [c for c in cfg.components if c not in Component.__members__]
    if unknown:
        raise ConfigError(f"unknown components: {', '.join(unknown)}")
    rows = []
    for doc in _points(cfg, cfg.cost_params):
        cp = _cost_params(doc)
        params = cp.to_json_dict()
        for comp in cfg.components:
            gc = gate_cost(comp, cp)
            rows.append(
                {
                    "component": comp,
                    "params": params,
                    "toffoli": gc.toffoli,
                    "t_gates": gc.t_gates,
                    "ancilla": gc.persistent_ancilla,
                    "temp_ancilla": gc.temporary_ancilla,
                    "kind": gc.kind,
                    "pass": True,
                }
            )
    rows.sort(key=lambda r: (_sort_key(r["params"]), r["component"]))
    return _report("resources", rows)


def run_table1(cfg: RunConfig) -> dict:
    doc = dict(cfg.cost_params)
    lambdas = (cfg.sweep or {}).get("Λ") or (cfg.sweep or {}).get("Lambda") or [2**10, 2**20]
    doc.pop("Λ", None)
    doc.pop("Lambda", None)
    cp = _cost_params(doc)
    try:
        table = complexity_table(cp, lambdas)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    params = cp.to_json_dict()
    params.pop("Λ", None)
    rows = []
    for r in table["rows"]:
        for lam, val, term in zip(table["lambdas"], r["values"], r["lambda_terms"]):
            rows.append(
                {
                    "row": r["row"],
                    "params": dict(params, Λ=lam),
                    "value": val,
                    "lambda_term": term,
                    "lambda_ratio": r["lambda_ratio"],
                    "kind": r["kind"],
                    "pass": r["ratio_matches"],
                }
            )
    out = _report("table1", rows)
    out["pass"] = bool(out["pass"] and table["ordering_holds"])
    out["ordering_holds"] = table["ordering_holds"]
    return out


# ---------------------------------------------------------------- output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, dict):
        return _key(v)
    return repr(v) if isinstance(v, float) else str(v)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, ensure_ascii=False, indent=2) + "\n"
    columns = {
        "verify": VERIFY_COLUMNS,
        "evolve": EVOLVE_COLUMNS,
        "resources": RESOURCE_COLUMNS,
        "table1": TABLE1_COLUMNS,
    }[report["command"]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in report["rows"]:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


RUNNERS = {"verify": run_verify, "evolve": run_evolve, "resources": run_resources, "table1": run_table1}


def load_config(path: str, command: str, seed: int | None, max_dim: int | None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("command") not in (None, command):
        raise ConfigError(f"config command {doc['command']!r} does not match {command!r}")
    doc["command"] = command
    if seed is not None:
        doc["seed"] = seed
    if max_dim is not None:
        doc["dimension_cap"] = max_dim
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(str(e)) from None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="polaronsim")
    ap.add_argument("command", choices=sorted(RUNNERS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--output")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--max-dim", type=int, dest="max_dim")
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        cfg = load_config(args.config, args.command, args.seed, args.max_dim)
        report = RUNNERS[args.command](cfg)
    except ConfigError as e:
        print(f"polaronsim: config error: {e}", file=sys.stderr)
        return 2
    text = render(report, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
