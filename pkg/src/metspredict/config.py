"""Experiment configuration: a single JSON file drives the whole pipeline.

Every default of the library is overridable here; unknown keys are rejected
so typos fail loudly at validation time rather than silently running with
defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .balance import BalancerSpec
from .models import MODEL_KINDS
from .counterfactual import POPULATIONS


class ConfigError(ValueError):
    pass


_TOP_KEYS = {
    "dataset",
    "seed",
    "test_fraction",
    "balance",
    "sweep",
    "model",
    "evaluate",
    "counterfactual",
    "thresholds",
    "out",
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    seed: int = 42
    test_fraction: float = 0.33
    balance_methods: tuple[str, ...] = ("smote",)
    balance_weights: tuple[float, ...] | None = None
    balance_k: int = 5
    balance_source: str | None = None
    sweep_methods: tuple[str, ...] = ("adasyn", "generative")
    sweep_step: float = 0.05
    sweep_n_runs: int = 3
    sweep_n_jobs: int = 1
    model_kind: str = "gbt"
    model_params: dict = field(default_factory=dict)
    eval_n_runs: int = 3
    cf_lam: float = 8.0
    cf_population: str = "all"
    cf_grid_resolution: int = 200
    thresholds: str | None = None
    out: str = "runs"
    raw: dict = field(default_factory=dict)  # byte-exact snapshot source

    def balancer_specs(self) -> list[BalancerSpec]:
        return [
            BalancerSpec(method=m, k=self.balance_k, source=self.balance_source)
            for m in self.balance_methods
        ]

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_config(path: str | Path, seed_override: int | None = None, out_override: str | None = None) -> ExperimentConfig:
    path = Path(path)
    _require(path.exists(), f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw, seed_override=seed_override, out_override=out_override, base_dir=path.parent)


def parse_config(
    raw: dict,
    seed_override: int | None = None,
    out_override: str | None = None,
    base_dir: Path | None = None,
) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown config key(s): {sorted(unknown)}")
    _require("dataset" in raw, "config must name a dataset path")

    if seed_override is not None:
        raw = {**raw, "seed": int(seed_override)}
    if out_override is not None:
        raw = {**raw, "out": str(out_override)}

    dataset = str(raw["dataset"])
    if base_dir is not None and not Path(dataset).is_absolute():
        dataset = str((base_dir / dataset).resolve())

    balance = raw.get("balance", {})
    sweep = raw.get("sweep", {})
    model = raw.get("model", {})
    evaluate = raw.get("evaluate", {})
    cf = raw.get("counterfactual", {})

    methods = tuple(balance.get("methods", ("smote",)))
    for m in methods:
        _require(
            m in ("ros", "none", "smote", "adasyn", "generative"),
            f"unknown balancing method {m!r}",
        )
    weights = balance.get("weights")
    if weights is not None:
        weights = tuple(float(w) for w in weights)
        _require(len(weights) == len(methods), "balance weights must match methods")

    kind = model.get("kind", "gbt")
    _require(kind in MODEL_KINDS, f"unknown model kind {kind!r}")
    population = cf.get("population", "all")
    _require(population in POPULATIONS, f"unknown counterfactual population {population!r}")

    test_fraction = float(raw.get("test_fraction", 0.33))
    _require(0.0 < test_fraction < 1.0, "test_fraction must be in (0, 1)")

    cfg = ExperimentConfig(
        dataset=dataset,
        seed=int(raw.get("seed", 42)),
        test_fraction=test_fraction,
        balance_methods=methods,
        balance_weights=weights,
        balance_k=int(balance.get("k", 5)),
        balance_source=balance.get("source"),
        sweep_methods=tuple(sweep.get("methods", ("adasyn", "generative"))),
        sweep_step=float(sweep.get("step", 0.05)),
        sweep_n_runs=int(sweep.get("n_runs", 3)),
        sweep_n_jobs=int(sweep.get("n_jobs", 1)),
        model_kind=kind,
        model_params=dict(model.get("params", {})),
        eval_n_runs=int(evaluate.get("n_runs", 3)),
        cf_lam=float(cf.get("lam", 8.0)),
        cf_population=population,
        cf_grid_resolution=int(cf.get("grid_resolution", 200)),
        thresholds=raw.get("thresholds"),
        out=str(raw.get("out", "runs")),
        raw=raw,
    )
    _require(len(cfg.sweep_methods) in (2, 3), "sweep needs 2 or 3 methods")
    return cfg
