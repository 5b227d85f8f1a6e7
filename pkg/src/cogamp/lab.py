"""Multi-seed experiments: regime x configuration sweeps and the atrophy search.

Every run's seed derives only from its cell key, so sweeps give identical
results in any execution order and at any worker count.
"""

from __future__ import annotations

import concurrent.futures
import logging
import multiprocessing
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .agents import ConfigError, RegimeName, RegimeSpec
from .engine import RunResult, SimConfig, run
from .metrics import stable_mean

log = logging.getLogger(__name__)

METRICS = ("cai_star", "d", "hri", "hcdr", "q_h", "q_ha", "skill_mean", "ai_use_rate")
EXTRAS = ("q_h_pert", "q_h_novel", "dependency_mean")
REPORT_COLUMNS = ("label", "regime", "delta", "sensitivity") + tuple(
    f"{m}_{stat}" for m in METRICS for stat in ("mean", "std")
)
DEFAULT_DELTA_GRID = (0.0040, 0.0035, 0.0030, 0.0025, 0.0020, 0.0015, 0.0010, 0.0005, 0.0000)
DEFAULT_CONFIGS = (("P0", 0.2, 0.004), ("P1", 0.6, 0.003), ("P2", 0.4, 0.002))
STD_NOTE = "std over seeds uses the population denominator (ddof=0)"


class LabError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParamConfig:
    label: str
    sensitivity: float
    delta: float


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig = field(default_factory=SimConfig)
    regimes: tuple[RegimeSpec, ...] = tuple(RegimeSpec(r) for r in RegimeName)
    configs: tuple[ParamConfig, ...] = tuple(ParamConfig(*c) for c in DEFAULT_CONFIGS)
    seeds: tuple[int, ...] = tuple(range(1, 21))

    def __post_init__(self) -> None:
        if not (self.regimes and self.configs and self.seeds):
            raise ConfigError("sweep needs at least one regime, config and seed")


@dataclass(frozen=True)
class OptSpec:
    base: SimConfig = field(default_factory=SimConfig)
    delta_grid: tuple[float, ...] = DEFAULT_DELTA_GRID
    seeds: tuple[int, ...] = tuple(range(1, 21))

    def __post_init__(self) -> None:
        if not self.delta_grid or any(d < 0 for d in self.delta_grid):
            raise ConfigError("optimize.delta_grid must be a nonempty list of nonnegative values")
        if not self.seeds:
            raise ConfigError("optimize needs at least one seed")


@dataclass
class CellSummary:
    label: str
    regime: str
    delta: float
    sensitivity: float
    mean: dict[str, float]
    std: dict[str, float]
    seeds: list[int] = field(default_factory=list)
    runs: list[dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label, "regime": self.regime, "delta": self.delta,
            "sensitivity": self.sensitivity, "mean": self.mean, "std": self.std,
            "seeds": self.seeds, "runs": self.runs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CellSummary":
        return cls(**data)


@dataclass
class OptResult:
    candidates: list[CellSummary]
    best_delta: float | None
    feasible: bool
    amplification_achieved: bool
    verdict: str

    @property
    def best(self) -> CellSummary | None:
        for c in self.candidates:
            if self.best_delta is not None and c.delta == self.best_delta:
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "best_delta": self.best_delta,
            "feasible": self.feasible,
            "amplification_achieved": self.amplification_achieved,
            "verdict": self.verdict,
            "std_note": STD_NOTE,
            "candidates": [c.to_dict() for c in self.candidates],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OptResult":
        return cls(
            [CellSummary.from_dict(c) for c in data["candidates"]],
            data["best_delta"], data["feasible"], data["amplification_achieved"], data["verdict"],
        )


def derive_seed(seed: int, regime_index: int, config_index: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(regime_index, config_index))
    return int(ss.generate_state(1, np.uint64)[0])


def run_values(result: RunResult) -> dict[str, float]:
    s = result.summary
    out = {m: getattr(s.metrics, m) for m in ("cai_star", "d", "hri", "hcdr")}
    out.update({m: getattr(s, m) for m in ("q_h", "q_ha", "skill_mean", "ai_use_rate") + EXTRAS})
    return out


def aggregate(
    label: str, regime: str, delta: float, sensitivity: float,
    seeds: Sequence[int], runs: Sequence[dict[str, float]],
) -> CellSummary:
    mean, std = {}, {}
    for name in METRICS + EXTRAS:
        vals = np.array([r[name] for r in runs])
        mu = stable_mean(vals)
        mean[name] = mu
        std[name] = float(np.sqrt(np.mean((vals - mu) ** 2)))
    return CellSummary(label, regime, delta, sensitivity, mean, std, list(seeds), list(runs))


def _pool(workers: int):
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    return concurrent.futures.ProcessPoolExecutor(max_workers=workers, mp_context=ctx)


def _run_labeled(item: tuple[str, SimConfig]) -> RunResult:
    label, cfg = item
    try:
        return run(cfg)
    except Exception as exc:
        raise LabError(f"{label}: {type(exc).__name__}: {exc}") from exc


def run_many(
    configs: Sequence[SimConfig], workers: int = 1, labels: Sequence[str] | None = None
) -> list[RunResult]:
    """Run configs, returning results in input order regardless of ``workers``.

    A failing run is re-raised as :class:`LabError` prefixed with its label.
    """
    if labels is None:
        labels = [f"run {i} (seed={c.seed})" for i, c in enumerate(configs)]
    items = list(zip(labels, configs))
    out = []
    if workers <= 1 or len(items) <= 1:
        for i, item in enumerate(items):
            out.append(_run_labeled(item))
            log.info("run %d/%d done: %s", i + 1, len(items), item[0])
        return out
    with _pool(workers) as pool:
        for i, res in enumerate(pool.map(_run_labeled, items)):
            out.append(res)
            log.info("run %d/%d done: %s", i + 1, len(items), items[i][0])
    return out


def sweep_configs(spec: SweepSpec) -> list[tuple[tuple[int, int, int], SimConfig]]:
    keyed = []
    for ri, regime in enumerate(spec.regimes):
        for ci, pc in enumerate(spec.configs):
            dyn = replace(spec.base.dynamics, sensitivity=pc.sensitivity, delta=pc.delta)
            for seed in spec.seeds:
                cfg = replace(
                    spec.base, regime=regime, dynamics=dyn, seed=derive_seed(seed, ri, ci)
                )
                keyed.append(((ri, ci, seed), cfg))
    return keyed


def run_sweep_results(spec: SweepSpec, workers: int = 1) -> list[tuple[tuple[int, int, int], RunResult]]:
    keyed = sweep_configs(spec)
    labels = [
        f"regime={spec.regimes[ri].name.value} config={spec.configs[ci].label} seed={seed}"
        for (ri, ci, seed), _ in keyed
    ]
    results = run_many([cfg for _, cfg in keyed], workers, labels)
    return [(key, res) for (key, _), res in zip(keyed, results)]


def summarize_sweep(spec: SweepSpec, results: Iterable[tuple[tuple[int, int, int], RunResult]]) -> list[CellSummary]:
    by_cell: dict[tuple[int, int], list[tuple[int, dict]]] = {}
    for (ri, ci, seed), res in results:
        by_cell.setdefault((ri, ci), []).append((seed, run_values(res)))
    cells = []
    for (ri, ci), rows in sorted(by_cell.items()):
        pc = spec.configs[ci]
        cells.append(aggregate(
            pc.label, spec.regimes[ri].name.value, pc.delta, pc.sensitivity,
            [s for s, _ in rows], [v for _, v in rows],
        ))
    return cells


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[CellSummary]:
    return summarize_sweep(spec, run_sweep_results(spec, workers))


def select_best(cells: Sequence[CellSummary]) -> OptResult:
    """Constrained argmax of mean CAI* subject to mean HCDR >= 0.

    Ties go to the smallest delta. With no feasible candidate the full table is
    still returned and ``best_delta`` is None.
    """
    if not cells:
        raise LabError("select_best needs at least one candidate")
    feasible = [c for c in cells if c.mean["hcdr"] >= 0.0]
    if not feasible:
        return OptResult(list(cells), None, False, False, "best attainable compromise")
    best = max(feasible, key=lambda c: (c.mean["cai_star"], -c.delta))
    amplified = best.mean["cai_star"] > 0.0
    verdict = "genuine amplification" if amplified else "best attainable compromise"
    return OptResult(list(cells), best.delta, True, amplified, verdict)


def optimize_labels(spec: OptSpec) -> list[str]:
    return [f"delta={d:.4f} seed={s}" for d in spec.delta_grid for s in spec.seeds]


def optimize_configs(spec: OptSpec) -> list[SimConfig]:
    """One config per (delta, seed); every delta reuses the same run seeds."""
    base = replace(spec.base, regime=RegimeSpec(RegimeName.MIXED))
    configs = []
    for delta in spec.delta_grid:
        dyn = replace(base.dynamics, delta=delta)
        for seed in spec.seeds:
            configs.append(replace(base, dynamics=dyn, seed=derive_seed(seed, 0, 0)))
    return configs


def group_by_delta(spec: OptSpec, results: Sequence[RunResult]) -> list[tuple[float, list[RunResult]]]:
    n = len(spec.seeds)
    return [(d, list(results[i * n:(i + 1) * n])) for i, d in enumerate(spec.delta_grid)]


def summarize_optimize(spec: OptSpec, results: Sequence[RunResult]) -> list[CellSummary]:
    return [
        aggregate(
            f"delta={delta:.4f}", RegimeName.MIXED.value, delta,
            spec.base.dynamics.sensitivity, spec.seeds, [run_values(r) for r in chunk],
        )
        for delta, chunk in group_by_delta(spec, results)
    ]


def optimize_atrophy(spec: OptSpec, workers: int = 1) -> OptResult:
    results = run_many(optimize_configs(spec), workers, optimize_labels(spec))
    return select_best(summarize_optimize(spec, results))
