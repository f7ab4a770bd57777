"""Config-driven experiment runner: `run`, `eval`, and `compare` commands.

A YAML config has four sections (workload, model, hardware, search) plus an
output_dir; see README for the key reference. `run` performs the grid search
and writes best_mapping.txt, result.json, timeline.csv, convergence.csv and
grid.csv into the output directory. `eval` scores a previously emitted
mapping without searching. `compare` tabulates normalized validation EDP
across run directories that share a scenario.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import evaluator, hw, mapping, modelgraph, search, trace


class ConfigError(ValueError):
    pass


@dataclass
class WorkloadSpec:
    trace_path: str
    strategy: trace.Strategy
    prefill_batch: int = 1
    decode_batch: int = 8
    chunk_budget: int = 256
    num_batches: int = 2
    search_seed: int = 1
    validation_seed: int = 2


@dataclass
class ModelSpec:
    kind: str  # "gpt" | "toy"
    arch: modelgraph.LlmArch | None = None
    toy_gemms: int = 4
    toy_dim: int = 16
    toy_instance_rows: tuple[int, ...] = ()


@dataclass
class SearchSpec:
    mb_candidates: tuple[int, ...]
    tp_candidates: tuple[int, ...]
    ga: search.GaConfig
    restricted: bool = False


@dataclass
class ExperimentConfig:
    model: ModelSpec
    accel: hw.AcceleratorConfig
    searchspec: SearchSpec
    output_dir: Path
    workload: WorkloadSpec | None = None
    hardware_label: str = "inline"
    scenario: dict = field(default_factory=dict)


def _section(data: dict, name: str, required: bool = True) -> dict:
    value = data.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing config section: {name}")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {name} must be a mapping")
    return value


def _load_workload(data: dict) -> WorkloadSpec | None:
    if not data:
        return None
    try:
        strategy = trace.Strategy(data.get("strategy", "chunked"))
    except ValueError:
        raise ConfigError(f"unknown strategy: {data.get('strategy')!r}") from None
    try:
        return WorkloadSpec(
            trace_path=str(data["trace"]),
            strategy=strategy,
            prefill_batch=int(data.get("prefill_batch", 1)),
            decode_batch=int(data.get("decode_batch", 8)),
            chunk_budget=int(data.get("chunk_budget", 256)),
            num_batches=int(data.get("num_batches", 2)),
            search_seed=int(data.get("search_seed", 1)),
            validation_seed=int(data.get("validation_seed", 2)),
        )
    except KeyError as exc:
        raise ConfigError(f"workload section missing key: {exc}") from None


def _load_model(data: dict) -> ModelSpec:
    kind = data.get("kind", "gpt")
    if kind == "toy":
        rows = data.get("instance_rows")
        if not rows:
            raise ConfigError("toy model needs instance_rows")
        return ModelSpec(
            kind="toy",
            toy_gemms=int(data.get("gemms", 4)),
            toy_dim=int(data.get("dim", 16)),
            toy_instance_rows=tuple(int(r) for r in rows),
        )
    if kind != "gpt":
        raise ConfigError(f"unknown model kind: {kind!r}")
    name = data.get("name")
    if name:
        arch = modelgraph.NAMED_ARCHS.get(str(name).lower())
        if arch is None:
            raise ConfigError(f"unknown model name: {name!r}")
        return ModelSpec(kind="gpt", arch=arch)
    try:
        hidden = int(data["hidden"])
        heads = int(data["heads"])
        arch = modelgraph.LlmArch(
            num_blocks=int(data["blocks"]),
            hidden=hidden,
            num_heads=heads,
            head_dim=int(data.get("head_dim", hidden // heads)),
            ffn_mult=int(data.get("ffn_mult", 4)),
            bytes_per_element=int(data.get("bytes_per_element", 2)),
        )
    except KeyError as exc:
        raise ConfigError(f"model section missing key: {exc}") from None
    except modelgraph.GraphError as exc:
        raise ConfigError(f"bad model: {exc}") from None
    return ModelSpec(kind="gpt", arch=arch)


def _load_hardware(data: dict) -> tuple[hw.AcceleratorConfig, str]:
    preset = data.get("preset")
    if preset:
        table = hw.presets()
        if preset not in table:
            raise ConfigError(f"unknown preset {preset!r}, expected {sorted(table)}")
        return table[preset], str(preset)
    try:
        dataflow = hw.Dataflow(data.get("dataflow", "WS"))
        chiplet_keys = ("mac_count", "array_rows", "array_cols", "glb_bytes",
                        "freq_hz", "vector_ops_per_cycle")
        spec_kwargs = {k: data[k] for k in chiplet_keys if k in data}
        spec = hw.ChipletSpec(dataflow=dataflow, **spec_kwargs)
        accel_keys = ("nop_link_bw", "nop_hop_latency", "dram_dies", "dram_bw_per_die")
        kwargs = {k: data[k] for k in accel_keys if k in data}
        if "energy" in data:
            kwargs["energy"] = hw.EnergyCoefficients(**data["energy"])
        accel = hw.uniform_accel(int(data["grid_w"]), int(data["grid_h"]),
                                 dataflow, spec=spec, **kwargs)
    except KeyError as exc:
        raise ConfigError(f"hardware section missing key: {exc}") from None
    except (hw.HardwareError, TypeError) as exc:
        raise ConfigError(f"bad hardware: {exc}") from None
    return accel, "inline"


def _load_search(data: dict) -> SearchSpec:
    mb = tuple(int(x) for x in data.get("micro_batch_candidates", [1]))
    tp = tuple(int(x) for x in data.get("tensor_parallel_candidates", [1]))
    if not mb or not tp:
        raise ConfigError("candidate lists must be non-empty")
    try:
        ga = search.GaConfig(
            population=int(data.get("population", 120)),
            generations=int(data.get("generations", 200)),
            tournament_size=int(data.get("tournament_size", 4)),
            crossover_rate=float(data.get("crossover_rate", 0.9)),
            seed=int(data.get("seed", 0)),
        )
    except search.SearchError as exc:
        raise ConfigError(f"bad search settings: {exc}") from None
    return SearchSpec(mb, tp, ga, restricted=bool(data.get("restricted", False)))


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    overrides = overrides or {}

    workload_data = _section(data, "workload", required=False)
    if "strategy" in overrides and workload_data:
        workload_data = dict(workload_data, strategy=overrides["strategy"])
    hardware_data = _section(data, "hardware")
    if "preset" in overrides:
        hardware_data = {"preset": overrides["preset"]}
    search_data = _section(data, "search")
    if "seed" in overrides:
        search_data = dict(search_data, seed=overrides["seed"])

    model = _load_model(_section(data, "model"))
    workload = _load_workload(workload_data)
    if model.kind == "gpt" and workload is None:
        raise ConfigError("gpt models need a workload section")
    accel, label = _load_hardware(hardware_data)
    searchspec = _load_search(search_data)
    out_dir = Path(overrides.get("output_dir") or data.get("output_dir", "out"))

    scenario = {
        "model": {k: v for k, v in _section(data, "model").items()},
        "workload": {k: v for k, v in workload_data.items()},
    }
    return ExperimentConfig(
        model=model,
        accel=accel,
        searchspec=searchspec,
        output_dir=out_dir,
        workload=workload,
        hardware_label=label,
        scenario=scenario,
    )


def _build_batches(cfg: ExperimentConfig) -> tuple[list, list]:
    w = cfg.workload
    entries = trace.load_trace(w.trace_path)
    make = lambda seed: trace.form_batches(
        entries, w.strategy, w.prefill_batch, w.decode_batch,
        w.chunk_budget, w.num_batches, seed)
    return make(w.search_seed), make(w.validation_seed)


def _graphs_for_tp_factory(cfg: ExperimentConfig, batches: list):
    if cfg.model.kind == "toy":
        graph = modelgraph.toy_model(cfg.model.toy_gemms, cfg.model.toy_instance_rows,
                                     dim=cfg.model.toy_dim)
        return lambda tp: [graph]
    return lambda tp: [modelgraph.instantiate(cfg.model.arch, b, tp) for b in batches]


def _metrics_dict(result: evaluator.ExpectedResult) -> dict:
    return {"latency": result.latency, "energy": result.energy, "edp": result.edp}


def _write_artifacts(cfg, enc, tp, search_metrics, val_metrics, grid_result=None):
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "best_mapping.txt").write_text(
        mapping.to_text(enc) + "\n" + f"tp={tp}\n")
    payload = {
        "scenario": cfg.scenario,
        "hardware": cfg.hardware_label,
        "best": {
            "micro_batch": enc.micro_batch_size,
            "tensor_parallel": tp,
            "mapping": mapping.to_text(enc),
        },
        "search": _metrics_dict(search_metrics),
        "validation": _metrics_dict(val_metrics),
    }
    (out / "result.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    timeline = search_metrics.results[0]
    (out / "timeline.csv").write_text(
        "\n".join(evaluator.timeline_csv_rows(timeline)) + "\n")
    if grid_result is not None:
        grid_lines = ["mb,tp,edp"]
        conv_lines = ["mb,tp,generation,best_edp"]
        for entry in grid_result.table:
            grid_lines.append(f"{entry.micro_batch},{entry.tensor_parallel},{entry.edp!r}")
            for gen, edp in enumerate(entry.history):
                conv_lines.append(
                    f"{entry.micro_batch},{entry.tensor_parallel},{gen},{edp!r}")
        (out / "grid.csv").write_text("\n".join(grid_lines) + "\n")
        (out / "convergence.csv").write_text("\n".join(conv_lines) + "\n")
    return payload


def _expected_metrics(cfg, batches, enc, tp) -> evaluator.ExpectedResult:
    if cfg.model.kind == "toy":
        graph = _graphs_for_tp_factory(cfg, [])(tp)[0]
        return evaluator.expected_over_graphs([graph], enc, cfg.accel)
    return evaluator.evaluate_expectation(batches, enc, cfg.model.arch, tp, cfg.accel)


def run_experiment(cfg: ExperimentConfig) -> dict:
    if cfg.model.kind == "toy":
        search_batches = val_batches = []
    else:
        search_batches, val_batches = _build_batches(cfg)
    graphs_for_tp = _graphs_for_tp_factory(cfg, search_batches)
    spec = cfg.searchspec
    tp_candidates = spec.tp_candidates if cfg.model.kind == "gpt" else (1,)
    grid_result = search.grid_search(
        spec.mb_candidates, tp_candidates, graphs_for_tp, cfg.accel, spec.ga,
        restricted=spec.restricted)
    enc = grid_result.best.encoding
    tp = grid_result.best_tensor_parallel
    search_metrics = _expected_metrics(cfg, search_batches, enc, tp)
    val_metrics = _expected_metrics(cfg, val_batches, enc, tp)
    return _write_artifacts(cfg, enc, tp, search_metrics, val_metrics, grid_result)


def parse_mapping_file(path) -> tuple[mapping.MappingEncoding, int]:
    """best_mapping.txt format: the mapping line, then an optional `tp=<k>` line."""
    enc = None
    tp = 1
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("tp="):
            tp = int(line[3:])
        else:
            enc = mapping.from_text(line)
    if enc is None:
        raise mapping.MappingError(f"no mapping line found in {path}")
    return enc, tp


def eval_experiment(cfg: ExperimentConfig, mapping_path) -> dict:
    enc, tp = parse_mapping_file(mapping_path)
    if cfg.model.kind == "toy":
        search_batches = val_batches = []
        graph = _graphs_for_tp_factory(cfg, [])(tp)[0]
        violations = evaluator.check_encoding(enc, graph, cfg.accel)
    else:
        search_batches, val_batches = _build_batches(cfg)
        violations = []
        for b in search_batches + val_batches:
            graph = modelgraph.instantiate(cfg.model.arch, b, tp)
            violations.extend(evaluator.check_encoding(enc, graph, cfg.accel))
    if violations:
        raise ConfigError("mapping invalid for this scenario: "
                          + "; ".join(sorted(set(violations))))
    search_metrics = _expected_metrics(cfg, search_batches, enc, tp)
    val_metrics = _expected_metrics(cfg, val_batches, enc, tp)
    return _write_artifacts(cfg, enc, tp, search_metrics, val_metrics)


def compare_runs(run_dirs, out_path=None) -> list[str]:
    """Normalized validation-EDP table across runs of one scenario (min = 1.0)."""
    if len(run_dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    rows = []
    scenario = None
    for run_dir in run_dirs:
        result_path = Path(run_dir) / "result.json"
        try:
            payload = json.loads(result_path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"missing result.json under {run_dir}") from None
        if scenario is None:
            scenario = payload.get("scenario")
        elif payload.get("scenario") != scenario:
            raise ConfigError(f"scenario mismatch in {run_dir}")
        rows.append((Path(run_dir).name, payload["validation"]["edp"]))
    floor = min(edp for _, edp in rows)
    lines = ["run,edp,normalized_edp"]
    for name, edp in rows:
        lines.append(f"{name},{edp!r},{edp / floor!r}")
    if out_path is not None:
        Path(out_path).write_text("\n".join(lines) + "\n")
    return lines


def _overrides_from_args(args) -> dict:
    overrides = {}
    if getattr(args, "preset", None):
        overrides["preset"] = args.preset
    if getattr(args, "strategy", None):
        overrides["strategy"] = args.strategy
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = args.output_dir
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chipmap",
        description="Mapping-space exploration for multi-chiplet LLM-serving accelerators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--preset", choices=["WS", "OS", "HE"],
                       help="override the hardware preset")
        p.add_argument("--strategy", choices=[s.value for s in trace.Strategy],
                       help="override the serving strategy")
        p.add_argument("--seed", type=int, help="override the search seed")
        p.add_argument("--output-dir", help="override the output directory")

    run_p = sub.add_parser("run", help="search mappings and write artifacts")
    add_common(run_p)

    eval_p = sub.add_parser("eval", help="evaluate a fixed mapping without searching")
    add_common(eval_p)
    eval_p.add_argument("--mapping", required=True, help="best_mapping.txt to evaluate")

    cmp_p = sub.add_parser("compare", help="normalized-EDP table across run directories")
    cmp_p.add_argument("dirs", nargs="+", help="run output directories")
    cmp_p.add_argument("--out", help="also write the CSV here")

    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            for line in compare_runs(args.dirs, args.out):
                print(line)
            return 0
        cfg = load_config(args.config, _overrides_from_args(args))
        if args.command == "run":
            payload = run_experiment(cfg)
        else:
            payload = eval_experiment(cfg, args.mapping)
        best = payload["best"]
        print(f"best mapping: mb={best['micro_batch']} tp={best['tensor_parallel']} "
              f"validation EDP={payload['validation']['edp']:.6g} J*s "
              f"-> {cfg.output_dir}")
        return 0
    except (ConfigError, trace.TraceError, mapping.MappingError,
            modelgraph.GraphError, hw.HardwareError, search.SearchError,
            evaluator.EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
