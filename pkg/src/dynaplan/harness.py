"""Batch evaluation harness: seeded trial batteries, plan/success rates, reports.

Runs N seeded trials per scenario (seeds ``base_seed .. base_seed+N-1``),
separates plan feasibility (did the first policy parse and validate) from
execution success (did the episode reach its goal), and breaks failures down
by class. Reports render as JSON, CSV (fixed column set), or aligned text,
all deterministically.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .executor import ExecutorConfig, run_episode
from .scenarios import ScenarioSpec, parse_scenario

CSV_COLUMNS = (
    "scenario_id",
    "trials",
    "plan_rate",
    "success_rate",
    "fail_planning",
    "fail_perception",
    "fail_execution",
    "mean_replans",
)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioRow:
    scenario_id: str
    family: str
    trials: int
    plan_rate: float
    success_rate: float
    #: Fractions of *failed* trials per class; all zero when nothing failed.
    fail_planning: float
    fail_perception: float
    fail_execution: float
    mean_replans: float
    mean_steps: float

    def to_doc(self) -> dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "family": self.family,
            "trials": self.trials,
            "plan_rate": self.plan_rate,
            "success_rate": self.success_rate,
            "fail_planning": self.fail_planning,
            "fail_perception": self.fail_perception,
            "fail_execution": self.fail_execution,
            "mean_replans": self.mean_replans,
            "mean_steps": self.mean_steps,
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "ScenarioRow":
        return ScenarioRow(
            scenario_id=doc["scenario_id"],
            family=doc["family"],
            trials=int(doc["trials"]),
            plan_rate=float(doc["plan_rate"]),
            success_rate=float(doc["success_rate"]),
            fail_planning=float(doc["fail_planning"]),
            fail_perception=float(doc["fail_perception"]),
            fail_execution=float(doc["fail_execution"]),
            mean_replans=float(doc["mean_replans"]),
            mean_steps=float(doc["mean_steps"]),
        )


@dataclass(frozen=True)
class BatchReport:
    planner: str
    base_seed: int
    trials_per_scenario: int
    rows: tuple[ScenarioRow, ...]
    family_rows: tuple[ScenarioRow, ...] = ()

    def to_doc(self) -> dict[str, Any]:
        return {
            "planner": self.planner,
            "base_seed": self.base_seed,
            "trials_per_scenario": self.trials_per_scenario,
            "rows": [row.to_doc() for row in self.rows],
            "family_rows": [row.to_doc() for row in self.family_rows],
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "BatchReport":
        return BatchReport(
            planner=doc["planner"],
            base_seed=int(doc["base_seed"]),
            trials_per_scenario=int(doc["trials_per_scenario"]),
            rows=tuple(ScenarioRow.from_doc(r) for r in doc["rows"]),
            family_rows=tuple(ScenarioRow.from_doc(r) for r in doc["family_rows"]),
        )


@dataclass(frozen=True)
class _TrialStats:
    plan_valid: bool
    succeeded: bool
    failure_class: Optional[str]
    replans: int
    steps: int


def _aggregate(key_id: str, family: str, trials: Sequence[_TrialStats]) -> ScenarioRow:
    n = len(trials)
    failures = [t for t in trials if not t.succeeded]
    nf = len(failures)

    def frac(cls: str) -> float:
        return sum(1 for t in failures if t.failure_class == cls) / nf if nf else 0.0

    return ScenarioRow(
        scenario_id=key_id,
        family=family,
        trials=n,
        plan_rate=sum(1 for t in trials if t.plan_valid) / n,
        success_rate=sum(1 for t in trials if t.succeeded) / n,
        fail_planning=frac("planning"),
        fail_perception=frac("perception"),
        fail_execution=frac("execution"),
        mean_replans=sum(t.replans for t in trials) / n,
        mean_steps=sum(t.steps for t in trials) / n,
    )


def run_batch(
    corpus: Sequence[ScenarioSpec],
    planner,
    trials_per_scenario: int = 20,
    base_seed: int = 0,
    config: Optional[ExecutorConfig] = None,
    workers: int = 1,
) -> BatchReport:
    """Run the battery and aggregate per scenario and per task family.

    Trials use sequential seeds for auditability; the reduction is a
    deterministic fold independent of completion order, so ``workers > 1``
    changes wall time, never the report.
    """
    if not corpus:
        raise CorpusError("corpus is empty")
    if trials_per_scenario < 1:
        raise CorpusError("trials_per_scenario must be >= 1")
    config = config or ExecutorConfig()

    jobs = [
        (scenario, base_seed + trial)
        for scenario in corpus
        for trial in range(trials_per_scenario)
    ]

    def one(job: tuple[ScenarioSpec, int]) -> tuple[str, _TrialStats]:
        scenario, seed = job
        result = run_episode(scenario, planner, seed=seed, config=config)
        return scenario.id, _TrialStats(
            plan_valid=result.plan_valid,
            succeeded=result.succeeded,
            failure_class=result.failure_class,
            replans=result.replans,
            steps=result.steps_executed,
        )

    per_scenario: dict[str, list[_TrialStats]] = {s.id: [] for s in corpus}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for scenario_id, stats in pool.map(one, jobs):
                per_scenario[scenario_id].append(stats)
    else:
        for job in jobs:
            scenario_id, stats = one(job)
            per_scenario[scenario_id].append(stats)

    families: dict[str, list[_TrialStats]] = {}
    rows = []
    for scenario in corpus:
        trials = per_scenario[scenario.id]
        rows.append(_aggregate(scenario.id, scenario.family, trials))
        families.setdefault(scenario.family, []).extend(trials)
    family_rows = tuple(
        _aggregate(family, family, trials) for family, trials in sorted(families.items())
    )
    return BatchReport(
        planner=getattr(planner, "name", "unknown"),
        base_seed=base_seed,
        trials_per_scenario=trials_per_scenario,
        rows=tuple(rows),
        family_rows=family_rows,
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def emit_report(report: BatchReport, format: str = "table") -> str:
    """Render a report as ``json``, ``csv`` (fixed columns), or ``table`` text."""
    if format == "json":
        return json.dumps(report.to_doc(), indent=2, sort_keys=False) + "\n"
    if format == "csv":
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for row in report.rows:
            doc = row.to_doc()
            out.write(
                ",".join(
                    f"{doc[col]:.4f}" if isinstance(doc[col], float) else str(doc[col])
                    for col in CSV_COLUMNS
                )
                + "\n"
            )
        return out.getvalue()
    if format in ("table", "table-text"):
        header = (
            f"{'scenario':<28} {'family':<15} {'trials':>6} {'plan':>6} {'succ':>6} "
            f"{'f.plan':>7} {'f.perc':>7} {'f.exec':>7} {'replans':>8}"
        )
        lines = [
            f"batch report: planner={report.planner} seed={report.base_seed} "
            f"trials/scenario={report.trials_per_scenario}",
            header,
            "-" * len(header),
        ]

        def fmt(row: ScenarioRow) -> str:
            return (
                f"{row.scenario_id:<28} {row.family:<15} {row.trials:>6} "
                f"{row.plan_rate:>6.2f} {row.success_rate:>6.2f} "
                f"{row.fail_planning:>7.2f} {row.fail_perception:>7.2f} "
                f"{row.fail_execution:>7.2f} {row.mean_replans:>8.2f}"
            )

        lines.extend(fmt(row) for row in report.rows)
        if report.family_rows:
            lines.append("-" * len(header))
            lines.append("per task family:")
            lines.extend(fmt(row) for row in report.family_rows)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


# ---------------------------------------------------------------------------
# Corpus loading
# ---------------------------------------------------------------------------


def load_corpus(directory: str | Path) -> tuple[ScenarioSpec, ...]:
    """Load every ``*.json`` scenario file in a directory (sorted by name)."""
    path = Path(directory)
    if not path.is_dir():
        raise CorpusError(f"{path} is not a directory")
    scenarios = []
    for file in sorted(path.glob("*.json")):
        try:
            scenarios.append(parse_scenario(file.read_text(encoding="utf-8")))
        except Exception as exc:
            raise CorpusError(f"{file.name}: {exc}") from exc
    if not scenarios:
        raise CorpusError(f"no scenario files found in {path}")
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate scenario ids in corpus")
    return tuple(scenarios)
