"""Scenario definitions, sweep execution, and the figure presets.

A scenario is a JSON document (or an equivalent dict) with a versioned
schema::

    {
      "schema_version": 1,
      "name": "my-sweep",
      "engine": "markov",                  # or closed-form | simulation |
                                           #   attack | hierarchical-simulation
      "base": { ...chain fields... },      # hierarchical engines take
                                           #   {"primary": {...}, "secondary": {...}}
      "sweep": [ {"path": "intensity", "values": [0.2, 0.5, 0.8]},
                 {"path": "block_capacity", "values": [1, 3, 6]} ],
      "replication": {"seed": 7, "target_served": 100000, "trials": 1000000},
      "attack": {"relative_power": 0.3, "giveup_threshold": 8, "method": "auto"},
      "output": {"path": "out.csv", "format": "csv"}
    }

Unknown fields are rejected so sweep-path typos surface immediately.  Sweep
paths name real configuration fields; the pseudo-field ``intensity`` (or
``secondary.intensity`` etc.) sets the arrival rate to hit a service-stage
utilisation and is applied after any other swept field of the same point.

Sweeps evaluate in row-major grid order.  Points whose materialised
configuration fails validation are emitted with ``status=skipped-unstable``
instead of aborting the run.  Per-point seeds derive from
``sha256("<master_seed>:<point_index>")``, so extending a value list never
perturbs existing points.  Output rows echo the full materialised
configuration, making every row self-describing and re-runnable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from . import attack as attack_mod
from . import des, markov, queueing
from .config import (
    ChainConfig,
    ConfigValidationError,
    HierarchicalConfig,
    intensity_of,
    validate,
    with_intensity,
)

SCHEMA_VERSION = 1
ENGINES = ("markov", "closed-form", "simulation", "attack", "hierarchical-simulation")
_HIER_ENGINES = ("hierarchical-simulation",)
_ATTACK_METHODS = ("auto", "closed-form", "direct-sum", "monte-carlo")

_CHAIN_FIELDS = (
    "arrival_rate", "mining_rate", "rejection_rate", "service_rate",
    "servers", "block_capacity", "rejection_batch", "confirmations",
)
_INT_FIELDS = {"servers", "block_capacity", "rejection_batch", "confirmations"}


class MalformedSpecError(ValueError):
    """Scenario document violates the schema; message carries the field path."""


@dataclass(frozen=True)
class SweepParam:
    path: str
    values: tuple


@dataclass(frozen=True)
class Replication:
    seed: int = 0
    target_served: int = 100_000
    trials: int = 1_000_000


@dataclass(frozen=True)
class AttackSection:
    relative_power: float
    giveup_threshold: int
    method: str = "auto"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    engine: str
    base: ChainConfig | HierarchicalConfig
    sweep: tuple[SweepParam, ...]
    replication: Replication
    attack: AttackSection | None = None
    output_path: str | None = None
    output_format: str = "csv"

    @property
    def point_count(self) -> int:
        count = 1
        for param in self.sweep:
            count *= len(param.values)
        return count


@dataclass(frozen=True)
class RunSummary:
    points_total: int
    points_ok: int
    points_skipped: int
    out_path: str


# --------------------------------------------------------------------------
# parsing


def _require_keys(section: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise MalformedSpecError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise MalformedSpecError(f"{where}: missing required field(s) {sorted(missing)}")


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedSpecError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool):
        raise MalformedSpecError(f"{where}: expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise MalformedSpecError(f"{where}: expected an integer, got {value!r}")


def _parse_chain(section, where: str) -> ChainConfig:
    if not isinstance(section, dict):
        raise MalformedSpecError(f"{where}: expected an object with chain fields")
    _require_keys(section, set(_CHAIN_FIELDS), set(_CHAIN_FIELDS), where)
    kwargs = {}
    for name in _CHAIN_FIELDS:
        if name in _INT_FIELDS:
            kwargs[name] = _as_int(section[name], f"{where}.{name}")
        else:
            kwargs[name] = _as_number(section[name], f"{where}.{name}")
    return ChainConfig(**kwargs)


def _sweep_paths_for(engine: str, has_attack: bool) -> set[str]:
    if engine in _HIER_ENGINES:
        paths = set()
        for prefix in ("primary", "secondary"):
            paths.update(f"{prefix}.{f}" for f in _CHAIN_FIELDS)
            paths.add(f"{prefix}.intensity")
        return paths
    paths = set(_CHAIN_FIELDS) | {"intensity"}
    if has_attack:
        paths |= {"attack.relative_power", "attack.giveup_threshold"}
    return paths


def _path_is_int(path: str) -> bool:
    leaf = path.rsplit(".", 1)[-1]
    return leaf in _INT_FIELDS or path == "attack.giveup_threshold"


def parse_scenario(source) -> ScenarioSpec:
    """Parse and strictly validate a scenario from a dict, JSON string, or path."""
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise MalformedSpecError(f"cannot read scenario file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedSpecError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise MalformedSpecError("scenario root must be a JSON object")

    _require_keys(
        doc,
        {"schema_version", "name", "engine", "base", "sweep", "replication", "attack", "output"},
        {"schema_version", "name", "engine", "base", "sweep"},
        "scenario",
    )
    if doc["schema_version"] != SCHEMA_VERSION:
        raise MalformedSpecError(
            f"schema_version: expected {SCHEMA_VERSION}, got {doc['schema_version']!r}"
        )
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise MalformedSpecError("name: expected a nonempty string")
    engine = doc["engine"]
    if engine not in ENGINES:
        raise MalformedSpecError(f"engine: expected one of {ENGINES}, got {engine!r}")

    if engine in _HIER_ENGINES:
        base_doc = doc["base"]
        if not isinstance(base_doc, dict):
            raise MalformedSpecError("base: expected an object")
        _require_keys(base_doc, {"primary", "secondary"}, {"primary", "secondary"}, "base")
        base: ChainConfig | HierarchicalConfig = HierarchicalConfig(
            primary=_parse_chain(base_doc["primary"], "base.primary"),
            secondary=_parse_chain(base_doc["secondary"], "base.secondary"),
        )
    else:
        base = _parse_chain(doc["base"], "base")

    attack_section = None
    if "attack" in doc:
        if engine not in ("attack", "markov"):
            raise MalformedSpecError(f"attack: not allowed for engine {engine!r}")
        sec = doc["attack"]
        if not isinstance(sec, dict):
            raise MalformedSpecError("attack: expected an object")
        _require_keys(
            sec,
            {"relative_power", "giveup_threshold", "method"},
            {"relative_power", "giveup_threshold"},
            "attack",
        )
        method = sec.get("method", "auto")
        if method not in _ATTACK_METHODS:
            raise MalformedSpecError(
                f"attack.method: expected one of {_ATTACK_METHODS}, got {method!r}"
            )
        if engine == "markov" and method == "monte-carlo":
            raise MalformedSpecError(
                "attack.method: monte-carlo is only available with the attack engine"
            )
        attack_section = AttackSection(
            relative_power=_as_number(sec["relative_power"], "attack.relative_power"),
            giveup_threshold=_as_int(sec["giveup_threshold"], "attack.giveup_threshold"),
            method=method,
        )
    elif engine == "attack":
        raise MalformedSpecError("attack: required for the attack engine")

    sweep_doc = doc["sweep"]
    if not isinstance(sweep_doc, list) or not (1 <= len(sweep_doc) <= 2):
        raise MalformedSpecError("sweep: expected a list of one or two swept parameters")
    allowed_paths = _sweep_paths_for(engine, attack_section is not None)
    sweep: list[SweepParam] = []
    for pos, entry in enumerate(sweep_doc):
        where = f"sweep[{pos}]"
        if not isinstance(entry, dict):
            raise MalformedSpecError(f"{where}: expected an object")
        _require_keys(entry, {"path", "values"}, {"path", "values"}, where)
        path = entry["path"]
        if path not in allowed_paths:
            raise MalformedSpecError(
                f"{where}.path: {path!r} is not a sweepable field for this scenario"
            )
        values = entry["values"]
        if not isinstance(values, list) or not values:
            raise MalformedSpecError(f"{where}.values: expected a nonempty list")
        if _path_is_int(path):
            values = [_as_int(v, f"{where}.values[{i}]") for i, v in enumerate(values)]
        else:
            values = [_as_number(v, f"{where}.values[{i}]") for i, v in enumerate(values)]
        sweep.append(SweepParam(path=path, values=tuple(values)))
    if len({p.path for p in sweep}) != len(sweep):
        raise MalformedSpecError("sweep: the two parameters must target distinct paths")

    repl_doc = doc.get("replication", {})
    if not isinstance(repl_doc, dict):
        raise MalformedSpecError("replication: expected an object")
    _require_keys(repl_doc, {"seed", "target_served", "trials"}, set(), "replication")
    replication = Replication(
        seed=_as_int(repl_doc.get("seed", 0), "replication.seed"),
        target_served=_as_int(repl_doc.get("target_served", 100_000), "replication.target_served"),
        trials=_as_int(repl_doc.get("trials", 1_000_000), "replication.trials"),
    )
    if replication.target_served < 1:
        raise MalformedSpecError("replication.target_served: must be >= 1")
    if replication.trials < 1:
        raise MalformedSpecError("replication.trials: must be >= 1")

    out_path = None
    out_format = "csv"
    if "output" in doc:
        out = doc["output"]
        if not isinstance(out, dict):
            raise MalformedSpecError("output: expected an object")
        _require_keys(out, {"path", "format"}, set(), "output")
        out_path = out.get("path")
        out_format = out.get("format", "csv")
        if out_format not in ("csv", "jsonl"):
            raise MalformedSpecError(f"output.format: expected csv or jsonl, got {out_format!r}")

    return ScenarioSpec(
        name=name,
        engine=engine,
        base=base,
        sweep=tuple(sweep),
        replication=replication,
        attack=attack_section,
        output_path=out_path,
        output_format=out_format,
    )


# --------------------------------------------------------------------------
# materialisation and evaluation


def point_seed(master_seed: int, point_index: int) -> int:
    """Stable per-point RNG seed; independent of every other point."""
    digest = hashlib.sha256(f"{master_seed}:{point_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _grid_values(spec: ScenarioSpec, index: int) -> tuple:
    if len(spec.sweep) == 1:
        return (spec.sweep[0].values[index],)
    inner = len(spec.sweep[1].values)
    return (spec.sweep[0].values[index // inner], spec.sweep[1].values[index % inner])


def _set_chain_field(cfg: ChainConfig, field: str, value) -> ChainConfig:
    return replace(cfg, **{field: value})


def _materialize(spec: ScenarioSpec, values: tuple):
    base = spec.base
    attack_section = spec.attack
    deferred: list[tuple[str, float]] = []
    for param, value in zip(spec.sweep, values):
        path = param.path
        if path.startswith("attack."):
            attack_section = replace(attack_section, **{path.split(".", 1)[1]: value})
        elif path.endswith("intensity"):
            deferred.append((path, value))
        elif "." in path:
            side, field = path.split(".", 1)
            base = replace(base, **{side: _set_chain_field(getattr(base, side), field, value)})
        else:
            base = _set_chain_field(base, path, value)
    for path, rho in deferred:
        if "." in path:
            side = path.split(".", 1)[0]
            base = replace(base, **{side: with_intensity(getattr(base, side), rho)})
        else:
            base = with_intensity(base, rho)
    return base, attack_section


def _chain_echo(cfg: ChainConfig, prefix: str = "") -> dict:
    row = {f"{prefix}{name}": getattr(cfg, name) for name in _CHAIN_FIELDS}
    row[f"{prefix}intensity"] = intensity_of(cfg)
    return row


def _echo_columns(spec: ScenarioSpec) -> list[str]:
    if isinstance(spec.base, HierarchicalConfig):
        cols = [f"primary_{n}" for n in (*_CHAIN_FIELDS, "intensity")]
        cols += [f"secondary_{n}" for n in (*_CHAIN_FIELDS, "intensity")]
    else:
        cols = list(_CHAIN_FIELDS) + ["intensity"]
    if spec.attack is not None:
        cols += ["attack_relative_power", "attack_giveup_threshold"]
    return cols


_OUTPUT_COLUMNS = {
    "markov": ["latency", "mean_queue_length", "frontier_mass", "box_i_max", "box_j_max", "std_error"],
    "closed-form": ["latency", "block_wait", "service_stage", "confirmation_wait", "sojourn", "approximate", "std_error"],
    "attack": ["attack_probability", "attack_method", "std_error", "trials"],
    "simulation": ["latency", "variance", "ci_low", "ci_high", "served", "rejected", "generated", "in_flight", "point_seed"],
    "hierarchical-simulation": [
        "e2e_latency", "e2e_ci_low", "e2e_ci_high",
        "secondary_latency", "secondary_ci_low", "secondary_ci_high",
        "primary_latency", "primary_ci_low", "primary_ci_high",
        "served", "rejected", "generated", "in_flight", "point_seed",
    ],
}

_BASE_COLUMNS = ["scenario", "engine", "point_index", "status", "param_1", "value_1", "param_2", "value_2"]


def scenario_header(spec: ScenarioSpec) -> list[str]:
    cols = list(_BASE_COLUMNS) + _echo_columns(spec) + list(_OUTPUT_COLUMNS[spec.engine])
    if spec.engine == "markov" and spec.attack is not None:
        cols += ["attack_probability", "attack_method"]
    return cols


def _analytic_attack(params: attack_mod.AttackParams, method: str) -> attack_mod.AttackResult:
    if method == "closed-form":
        return attack_mod.attack_success_closed(params)
    if method == "direct-sum":
        return attack_mod.attack_success_direct(params)
    return attack_mod.attack_success(params)


def _evaluate_point(spec: ScenarioSpec, index: int) -> dict:
    values = _grid_values(spec, index)
    row: dict = {
        "scenario": spec.name,
        "engine": spec.engine,
        "point_index": index,
        "status": "ok",
        "param_1": spec.sweep[0].path,
        "value_1": values[0],
        "param_2": spec.sweep[1].path if len(spec.sweep) > 1 else "",
        "value_2": values[1] if len(spec.sweep) > 1 else "",
    }
    try:
        config, attack_section = _materialize(spec, values)
    except (ValueError, ConfigValidationError):
        # Intensity or range violations during materialisation: report, skip.
        row["status"] = "skipped-unstable"
        return row

    if isinstance(config, HierarchicalConfig):
        row.update(_chain_echo(config.primary, "primary_"))
        row.update(_chain_echo(config.secondary, "secondary_"))
    else:
        row.update(_chain_echo(config))
    if attack_section is not None:
        row["attack_relative_power"] = attack_section.relative_power
        row["attack_giveup_threshold"] = attack_section.giveup_threshold

    try:
        validate(config)
    except ConfigValidationError:
        row["status"] = "skipped-unstable"
        return row

    seed = point_seed(spec.replication.seed, index)
    if spec.engine == "markov":
        solution = markov.stationary_solution(config)
        row["latency"] = markov.latency(config)
        row["mean_queue_length"] = solution.mean_queue_length
        row["frontier_mass"] = solution.distribution.truncation_mass_bound
        row["box_i_max"] = solution.space.i_max
        row["box_j_max"] = solution.space.j_max
        row["std_error"] = 0.0
        if attack_section is not None:
            params = attack_mod.AttackParams(
                confirmations=config.confirmations,
                relative_power=attack_section.relative_power,
                giveup_threshold=attack_section.giveup_threshold,
            )
            result = _analytic_attack(params, attack_section.method)
            row["attack_probability"] = result.probability
            row["attack_method"] = result.method
    elif spec.engine == "closed-form":
        breakdown = queueing.closed_form_latency(config, approximate=True)
        row["latency"] = breakdown.total
        row["block_wait"] = breakdown.block_wait
        row["service_stage"] = breakdown.service_stage
        row["confirmation_wait"] = breakdown.confirmation_wait
        row["sojourn"] = breakdown.sojourn
        row["approximate"] = breakdown.approximate
        row["std_error"] = 0.0
    elif spec.engine == "attack":
        params = attack_mod.AttackParams(
            confirmations=config.confirmations,
            relative_power=attack_section.relative_power,
            giveup_threshold=attack_section.giveup_threshold,
        )
        if attack_section.method == "monte-carlo":
            result = attack_mod.attack_success_montecarlo(
                params, spec.replication.trials, seed
            )
        else:
            result = _analytic_attack(params, attack_section.method)
        row["attack_probability"] = result.probability
        row["attack_method"] = result.method
        row["std_error"] = result.std_error
        row["trials"] = result.trials if result.trials is not None else ""
    elif spec.engine == "simulation":
        sim = des.simulate_chain(config, spec.replication.target_served, seed)
        row["latency"] = sim.mean
        row["variance"] = sim.variance
        row["ci_low"], row["ci_high"] = sim.confidence_interval_95
        row["served"] = sim.served_count
        row["rejected"] = sim.rejected_count
        row["generated"] = sim.generated_count
        row["in_flight"] = sim.in_flight_count
        row["point_seed"] = seed
    else:  # hierarchical-simulation
        sim = des.simulate_hierarchical(config, spec.replication.target_served, seed)
        for key in ("e2e", "secondary", "primary"):
            stats = sim.breakdown[key]
            row[f"{key}_latency"] = stats.mean
            row[f"{key}_ci_low"], row[f"{key}_ci_high"] = stats.confidence_interval_95
        row["served"] = sim.served_count
        row["rejected"] = sim.rejected_count
        row["generated"] = sim.generated_count
        row["in_flight"] = sim.in_flight_count
        row["point_seed"] = seed
    return row


# --------------------------------------------------------------------------
# output


def _format_cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_output(
    path, fmt: str, header: list[str], rows: list[dict], include_timestamp: bool
) -> None:
    buffer = io.StringIO()
    if fmt == "csv":
        if include_timestamp:
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            buffer.write(f"# generated {stamp}\n")
        writer = csv.writer(buffer)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(row.get(col, "")) for col in header])
    else:
        if include_timestamp:
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            buffer.write(json.dumps({"meta": {"generated": stamp}}) + "\n")
        for row in rows:
            ordered = {col: row.get(col, "") for col in header}
            buffer.write(json.dumps(ordered) + "\n")
    with open(path, "w", newline="") as handle:
        handle.write(buffer.getvalue())


def _compute_rows(spec: ScenarioSpec, jobs: int) -> list[dict]:
    indices = range(spec.point_count)
    if jobs <= 1:
        return [_evaluate_point(spec, i) for i in indices]
    # Results are buffered and emitted in grid order whatever the completion order.
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate_point, [spec] * spec.point_count, indices))


def run_scenario(
    spec: ScenarioSpec,
    out_path=None,
    fmt: str | None = None,
    seed: int | None = None,
    jobs: int = 1,
    include_timestamp: bool = True,
) -> RunSummary:
    """Evaluate every sweep point of ``spec`` and persist one row per point."""
    if seed is not None:
        spec = replace(spec, replication=replace(spec.replication, seed=seed))
    resolved_out = out_path or spec.output_path
    if resolved_out is None:
        raise MalformedSpecError("no output path: pass out_path or set output.path")
    resolved_fmt = fmt or spec.output_format
    rows = _compute_rows(spec, jobs)
    _write_output(resolved_out, resolved_fmt, scenario_header(spec), rows, include_timestamp)
    ok = sum(1 for row in rows if row["status"] == "ok")
    return RunSummary(
        points_total=len(rows),
        points_ok=ok,
        points_skipped=len(rows) - ok,
        out_path=str(resolved_out),
    )


# --------------------------------------------------------------------------
# presets mirroring the reference experiment sweeps


_PRESET_SEED = 20240801


def _chain_doc(
    arrival_rate, mining_rate, rejection_rate, service_rate,
    servers=1, block_capacity=1, rejection_batch=1, confirmations=1,
) -> dict:
    return {
        "arrival_rate": arrival_rate,
        "mining_rate": mining_rate,
        "rejection_rate": rejection_rate,
        "service_rate": service_rate,
        "servers": servers,
        "block_capacity": block_capacity,
        "rejection_batch": rejection_batch,
        "confirmations": confirmations,
    }


# Reference single chain used by the latency presets: one access link of unit
# rate, blocks mined at 2.5 per unit time.  Rejections are disabled here so
# the block-capacity series isolate the batching effect; the fig7 preset
# contrasts a rejecting chain explicitly.
def _reference_chain(arrival_rate=0.5, **overrides) -> dict:
    doc = _chain_doc(arrival_rate, 2.5, 0.0, 1.0)
    doc.update(overrides)
    return doc


def _fig9_primary() -> dict:
    # Generously provisioned uplink chain: the injected secondary traffic is
    # small against its drain capacity, so its latency stays flat.
    return _chain_doc(10.0, 200.0, 0.0, 10.0, servers=10, block_capacity=3)


def _preset_fig6() -> list[dict]:
    return [
        {
            "schema_version": 1,
            "name": f"fig6/rho-{rho}",
            "engine": "markov",
            "base": _reference_chain(arrival_rate=rho),
            "sweep": [
                {"path": "block_capacity", "values": [1, 3, 6]},
                {"path": "confirmations", "values": [1, 2, 3, 4, 5, 6, 7, 8]},
            ],
        }
        for rho in (0.8, 0.2)
    ]


def _preset_fig7() -> list[dict]:
    variants = [
        ("conventional", _reference_chain(block_capacity=1)),
        ("batched", _reference_chain(block_capacity=3, rejection_rate=0.25)),
    ]
    return [
        {
            "schema_version": 1,
            "name": f"fig7/{label}",
            "engine": "markov",
            "base": base,
            "sweep": [
                {"path": "intensity", "values": [0.2, 0.5, 0.8]},
                {"path": "confirmations", "values": [1, 2, 3, 4, 5, 6, 7, 8]},
            ],
        }
        for label, base in variants
    ]


def _preset_fig8() -> list[dict]:
    return [
        {
            "schema_version": 1,
            "name": "fig8",
            "engine": "markov",
            "base": _reference_chain(),
            "sweep": [
                {"path": "intensity", "values": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]},
                {"path": "block_capacity", "values": [1, 3, 6]},
            ],
        }
    ]


def _preset_fig9() -> list[dict]:
    return [
        {
            "schema_version": 1,
            "name": "fig9",
            "engine": "hierarchical-simulation",
            "base": {
                "primary": _fig9_primary(),
                "secondary": _chain_doc(1.0, 10.0, 0.0, 5.0),
            },
            "sweep": [{"path": "secondary.intensity", "values": [0.2, 0.5, 0.8]}],
            "replication": {"seed": _PRESET_SEED, "target_served": 20000},
        }
    ]


def _preset_fig10() -> list[dict]:
    betas = [round(0.05 * k, 2) for k in range(1, 21)]
    specs = []
    for confirmations in (1, 3):
        for giveup in (4, 8):
            specs.append(
                {
                    "schema_version": 1,
                    "name": f"fig10/N-{confirmations}-Ng-{giveup}",
                    "engine": "attack",
                    "base": _chain_doc(0.5, 1.0, 0.0, 1.0, confirmations=confirmations),
                    "sweep": [{"path": "attack.relative_power", "values": betas}],
                    "attack": {"relative_power": 0.5, "giveup_threshold": giveup},
                }
            )
    return specs


def _preset_fig11() -> list[dict]:
    return [
        {
            "schema_version": 1,
            "name": "fig11",
            "engine": "hierarchical-simulation",
            "base": {
                "primary": _fig9_primary(),
                "secondary": _chain_doc(3.2, 4.0, 0.0, 1.0, servers=4),
            },
            "sweep": [
                {"path": "secondary.servers", "values": [4, 6, 8, 12, 16]},
                {"path": "secondary.block_capacity", "values": [1, 3]},
            ],
            "replication": {"seed": _PRESET_SEED, "target_served": 20000},
        }
    ]


def _preset_fig12() -> list[dict]:
    # A fixed-capability attacker faces chains provisioned in proportion to
    # their link pool, so better-provisioned chains see a lower relative
    # mining power and win on both latency and security.
    attacker_rate = 3.75
    specs = []
    for servers in (10, 25):
        mining_rate = 1.25 * servers
        for capacity in (1, 2, 3):
            specs.append(
                {
                    "schema_version": 1,
                    "name": f"fig12/s-{servers}-k-{capacity}",
                    "engine": "markov",
                    "base": _chain_doc(
                        0.5 * servers, mining_rate, 0.0, 1.0,
                        servers=servers, block_capacity=capacity,
                    ),
                    "sweep": [{"path": "confirmations", "values": [1, 2, 3, 4, 5, 6]}],
                    "attack": {
                        "relative_power": attacker_rate / mining_rate,
                        "giveup_threshold": 8,
                    },
                }
            )
    return specs


_PRESETS: dict[str, tuple[str, callable]] = {
    "fig6": ("latency vs confirmations for block capacities 1/3/6 at intensities 0.8 and 0.2, single chain", _preset_fig6),
    "fig7": ("latency vs confirmations, conventional (capacity 1, no rejection) vs batched chain, at three intensities", _preset_fig7),
    "fig8": ("latency vs traffic intensity, single chain, block capacity in {1,3,6}", _preset_fig8),
    "fig9": ("hierarchical latency vs secondary traffic intensity, primary held fixed", _preset_fig9),
    "fig10": ("attack success probability vs relative mining power for confirmation/give-up combinations", _preset_fig10),
    "fig11": ("hierarchical latency vs secondary link count for block capacities 1 and 3", _preset_fig11),
    "fig12": ("security vs latency frontier across link pools and block capacities as confirmations grow", _preset_fig12),
}


def list_presets() -> list[tuple[str, str]]:
    """Preset names and one-line descriptions, in a fixed order."""
    return [(name, desc) for name, (desc, _) in _PRESETS.items()]


def preset_specs(name: str) -> list[ScenarioSpec]:
    """Parsed sub-scenarios of a preset (a preset may bundle several sweeps)."""
    if name not in _PRESETS:
        known = ", ".join(_PRESETS)
        raise KeyError(f"unknown preset {name!r}; available: {known}")
    return [parse_scenario(doc) for doc in _PRESETS[name][1]()]


def run_preset(
    name: str,
    out_path,
    fmt: str = "csv",
    seed: int | None = None,
    jobs: int = 1,
    include_timestamp: bool = True,
) -> RunSummary:
    """Run every sub-scenario of a preset into a single output file."""
    specs = preset_specs(name)
    if seed is not None:
        specs = [replace(s, replication=replace(s.replication, seed=seed)) for s in specs]
    header = scenario_header(specs[0])
    rows: list[dict] = []
    for spec in specs:
        rows.extend(_compute_rows(spec, jobs))
    _write_output(out_path, fmt, header, rows, include_timestamp)
    ok = sum(1 for row in rows if row["status"] == "ok")
    return RunSummary(
        points_total=len(rows),
        points_ok=ok,
        points_skipped=len(rows) - ok,
        out_path=str(out_path),
    )


def preset_rows(name: str, seed: int | None = None, jobs: int = 1) -> list[dict]:
    """Evaluate a preset and return its rows without touching the filesystem."""
    specs = preset_specs(name)
    if seed is not None:
        specs = [replace(s, replication=replace(s.replication, seed=seed)) for s in specs]
    rows: list[dict] = []
    for spec in specs:
        rows.extend(_compute_rows(spec, jobs))
    return rows


def default_jobs() -> int:
    """Worker count from the BRANLAB_JOBS environment variable, else one."""
    raw = os.environ.get("BRANLAB_JOBS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
