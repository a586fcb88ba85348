"""Experiment pipelines: training-fraction sweep, solver comparison sweep,
and the bad-data-ratio sweep, each emitting a CSV, a gnuplot script and a
replayable run manifest."""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import offload_config, parse_kv_text, split_scenario, train_config, default_config_text
from .errors import ConfigError, EdgeOffloadError
from .model import generate_instances
from .mtl import evaluate, solver_metrics, train
from .solvers import LabeledDataset, SbbConfig, label_instances, solve_sbb
from .split import eta_sweep

EXPERIMENT_KINDS = ("fig5a-training-fraction", "fig5b-n-avs", "fig6-eta")

# documented default node budget that makes the sBB baseline measurably
# suboptimal in the solver-comparison sweep
DEFAULT_SBB_BUDGET = 16

_EXPERIMENT_KEYS = {
    "samples", "test_samples", "fractions", "n_list", "sbb_max_nodes",
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    out_dir: Path
    seed: int = 0
    config_text: str = ""  # prefixed overrides: offload.*, train.*, split.*, experiment.*

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {EXPERIMENT_KINDS}")
        object.__setattr__(self, "out_dir", Path(self.out_dir))


@dataclass
class RunManifest:
    tool_version: str
    kind: str
    seed: int
    config_text: str
    stage_seconds: dict[str, float] = field(default_factory=dict)
    digests: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(**{k: data[k] for k in
                      ("tool_version", "kind", "seed", "config_text", "stage_seconds", "digests")})


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _split_families(config_text: str) -> dict[str, dict[str, str]]:
    kv = parse_kv_text(config_text, "<experiment config>")
    fams: dict[str, dict[str, str]] = {"offload": {}, "train": {}, "split": {}, "experiment": {}}
    for key, value in kv.items():
        fam, _, rest = key.partition(".")
        if fam not in fams or not rest:
            raise ConfigError(
                f"experiment config keys must be prefixed with one of {sorted(fams)}: {key!r}"
            )
        fams[fam][rest] = value
    unknown = set(fams["experiment"]) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown experiment.* keys: {sorted(unknown)}")
    return fams


def _merged_split_kv(overrides: dict[str, str]) -> dict[str, str]:
    kv = parse_kv_text(default_config_text("split"), "<split defaults>")
    kv.update(overrides)
    return kv


def _merged_train_kv(overrides: dict[str, str]) -> dict[str, str]:
    kv = parse_kv_text(default_config_text("train"), "<train defaults>")
    kv.update(overrides)
    return kv


def _float_list(text: str, key: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {key} list {text!r}") from exc


class _Stages:
    """Stage timing plus cleanup of partial outputs on failure."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.seconds: dict[str, float] = {}
        self.files: list[Path] = []
        self._current: str | None = None

    def run(self, name: str, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            for path in self.files:
                path.unlink(missing_ok=True)
            # keep the error class so the CLI exit-code mapping still applies
            cls = type(exc) if isinstance(exc, EdgeOffloadError) else EdgeOffloadError
            raise cls(f"experiment stage {name!r} failed: {exc}") from exc
        self.seconds[name] = time.perf_counter() - t0
        return result

    def emit(self, name: str, content: str) -> Path:
        path = self.out_dir / name
        path.write_text(content, encoding="utf-8")
        self.files.append(path)
        return path


def _gnuplot(csv_name: str, ylabel: str, columns: list[tuple[int, str]]) -> str:
    plots = ", ".join(
        f"'{csv_name}' using 1:{col} with linespoints title '{title}'" for col, title in columns
    )
    return (
        "set datafile separator ','\n"
        "set key outside\n"
        f"set ylabel '{ylabel}'\n"
        "set xlabel 'x'\n"
        f"plot {plots}\n"
    )


# ---------------------------------------------------------------------------
# the three pipelines
# ---------------------------------------------------------------------------

def _run_fig5a(spec: ExperimentSpec, fams, stages: _Stages) -> None:
    exp = fams["experiment"]
    n_samples = int(float(exp.get("samples", "40000")))
    n_test = int(float(exp.get("test_samples", "4000")))
    fractions = _float_list(exp.get("fractions", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"),
                            "fractions")
    n_vehicles, ranges = offload_config(fams["offload"])

    def make_data():
        train_insts = generate_instances(n_vehicles, n_samples, ranges, seed=spec.seed)
        test_insts = generate_instances(n_vehicles, n_test, ranges, seed=spec.seed + 1)
        return label_instances(train_insts), label_instances(test_insts)

    ds, test_ds = stages.run("label", make_data)

    rows = []
    for frac in fractions:
        cfg = train_config(_merged_train_kv(fams["train"]),
                           train_fraction=frac, seed=spec.seed)
        model, _ = stages.run(f"train@{frac}", lambda: train(ds, cfg))
        metrics = evaluate(model, test_ds)
        rows.append((frac, metrics.class_accuracy, metrics.reg_mse))

    csv = "fraction,accuracy,mse\n" + "".join(
        f"{f!r},{a!r},{m!r}\n" for f, a, m in rows
    )
    stages.emit("fig5a.csv", csv)
    stages.emit("fig5a.gp", _gnuplot("fig5a.csv", "accuracy / mse",
                                     [(2, "accuracy"), (3, "alloc MSE")]))


def _run_fig5b(spec: ExperimentSpec, fams, stages: _Stages) -> None:
    exp = fams["experiment"]
    n_samples = int(float(exp.get("samples", "40000")))
    n_test = int(float(exp.get("test_samples", "2000")))
    n_list = [int(x) for x in _float_list(exp.get("n_list", "2,3,4,5,6,7,8"), "n_list")]
    budget = int(float(exp.get("sbb_max_nodes", str(DEFAULT_SBB_BUDGET))))
    _, ranges = offload_config(fams["offload"])
    sbb_cfg = SbbConfig(max_nodes=budget)

    rows = []
    for n in n_list:
        def make_data(n=n):
            train_insts = generate_instances(n, n_samples, ranges, seed=spec.seed)
            test_insts = generate_instances(n, n_test, ranges, seed=spec.seed + 1)
            return train_insts, test_insts, label_instances(train_insts), label_instances(test_insts)

        train_insts, test_insts, ds, test_ds = stages.run(f"label@N={n}", make_data)
        # past 5 vehicles the classifier target is dropped and decisions come
        # from thresholding the regression head
        chi_c = 0.0 if n > 5 else 1.0
        source = "reg" if n > 5 else "class"
        hidden = (64, 64) if n > 5 else (32, 32)
        cfg = train_config(_merged_train_kv(fams["train"]),
                           chi_c=chi_c, chi_r=1.0, seed=spec.seed, hidden_sizes=hidden)
        model, _ = stages.run(f"train@N={n}", lambda: train(ds, cfg))
        mtl_metrics = evaluate(model, test_ds, decision_source=source)
        sbb_reports = stages.run(
            f"sbb@N={n}", lambda: [solve_sbb(inst, sbb_cfg) for inst in test_insts]
        )
        sbb_metrics = solver_metrics(sbb_reports, test_ds)
        rows.append((n, mtl_metrics.class_accuracy, sbb_metrics.class_accuracy,
                     mtl_metrics.reg_mse, sbb_metrics.reg_mse,
                     mtl_metrics.mean_inference_time, sbb_metrics.mean_inference_time))

    csv = "n,acc_mtl,acc_sbb,mse_mtl,mse_sbb,time_mtl,time_sbb\n" + "".join(
        f"{n},{am!r},{asb!r},{mm!r},{msb!r},{tm!r},{tsb!r}\n"
        for n, am, asb, mm, msb, tm, tsb in rows
    )
    stages.emit("fig5b.csv", csv)
    stages.emit("fig5b.gp", _gnuplot("fig5b.csv", "accuracy",
                                     [(2, "MTL"), (3, "budgeted sBB")]))


def _run_fig6(spec: ExperimentSpec, fams, stages: _Stages) -> None:
    scenario, eta_step = stages.run(
        "config", lambda: split_scenario(_merged_split_kv(fams["split"]))
    )
    n_steps = int(round(1.0 / eta_step))
    etas = [min(1.0, i * eta_step) for i in range(n_steps + 1)]
    records = stages.run("sweep", lambda: eta_sweep(scenario, etas))
    csv = "eta,cost_local,cost_edge,cost_joint\n" + "".join(
        f"{r.eta!r},{r.cost_local!r},{r.cost_edge!r},{r.cost_joint!r}\n" for r in records
    )
    stages.emit("fig6.csv", csv)
    stages.emit("fig6.gp", _gnuplot("fig6.csv", "expected weighted-sum cost",
                                    [(2, "local"), (3, "edge"), (4, "joint")]))


_RUNNERS = {
    "fig5a-training-fraction": _run_fig5a,
    "fig5b-n-avs": _run_fig5b,
    "fig6-eta": _run_fig6,
}


def run_experiment(spec: ExperimentSpec) -> RunManifest:
    """Run one experiment pipeline and write CSV + plot script + manifest."""
    fams = _split_families(spec.config_text) if spec.config_text else _split_families("")
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    stages = _Stages(spec.out_dir)
    _RUNNERS[spec.kind](spec, fams, stages)
    manifest = RunManifest(
        tool_version=__version__,
        kind=spec.kind,
        seed=spec.seed,
        config_text=spec.config_text,
        stage_seconds=stages.seconds,
        digests={p.name: sha256_file(p) for p in stages.files},
    )
    (spec.out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def replay_manifest(manifest_path, out_dir) -> tuple[RunManifest, RunManifest, bool]:
    """Re-run an experiment from its manifest; returns (old, new, identical)."""
    old = RunManifest.from_json(Path(manifest_path).read_text(encoding="utf-8"))
    spec = ExperimentSpec(kind=old.kind, out_dir=Path(out_dir), seed=old.seed,
                          config_text=old.config_text)
    new = run_experiment(spec)
    identical = old.digests == new.digests
    return old, new, identical
