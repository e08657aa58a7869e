"""
Existence-frequency experiments over generated instances.

A cell is one (culture, weight range, n) combination. Each trial draws an
instance from its own generator, derived from (seed, culture index, weight
range index, n, trial), and asks the exact oracle which of SEF/AEF/SAEF
allocations (or house allocations) exist. Counts are commutative, so the
result does not depend on the number of worker processes.

Per trial:
    - a budget refusal is counted and marks the cell incomplete;
    - an instance where SEF or AEF exists but SAEF does not aborts the run;
    - when the preference class admits a polynomial solver its verdict is
      compared with the oracle; a disagreement writes a repro document and
      aborts the run.

Called by: cli._cmd_experiment().
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from pydantic import BaseModel, Field, model_validator
from tqdm import tqdm

from fairalloc.errors import BudgetExceededError, SolverDisagreementError
from fairalloc.exact import (
    DEFAULT_LEAF_BUDGET,
    ExistenceProfile,
    existence_profile,
    house_leaf_count,
    surjection_count,
)
from fairalloc.gen import Culture, GenConfig, derive_rng, gen_instance
from fairalloc.model import ALL_CONCEPTS, Allocation, FairnessConcept, Instance, ProblemKind
from fairalloc.serialization import serialize_instance
from fairalloc.specialized import (
    aef_identical01,
    classify_preferences,
    saef_house_01,
    saef_house_identical_dp,
    saef_identical01_dp,
    sef_identical01,
)

# Published existence ratios for complete allocations, m = 8: n -> (SEF, AEF, SAEF).
REFERENCE_RATIOS: dict[int, tuple[float, float, float]] = {
    5: (0.1963, 0.1012, 0.9802),
    6: (0.0212, 0.0052, 0.9059),
    7: (0.0045, 0.0001, 0.6981),
    8: (0.0032, 0.0, 0.2790),
}
REFERENCE_M = 8
# Tolerances (absolute) for the n = 5 row: SEF, AEF, SAEF.
BAND_N5 = (0.03, 0.03, 0.02)

INTERPRETATION_NOTE = (
    "utility values are drawn uniformly from the value range, sorted descending and "
    "assigned along each agent's preference order; the published setup does not state "
    "how values are matched to orders, nor which culture and weight range its table uses"
)

CSV_COLUMNS = (
    "culture", "weight_range", "kind", "n", "m", "trials",
    "sef_ratio", "aef_ratio", "saef_ratio", "seed",
    "sef_count", "aef_count", "saef_count", "refused",
)


class ExperimentConfig(BaseModel):
    """Grid and budgets of one experiment run."""

    n_values: list[int] = Field(default_factory=lambda: [5, 6, 7, 8], min_length=1)
    m: int = Field(8, ge=1)
    trials: int = Field(2000, ge=1)
    cultures: list[Culture] = Field(default_factory=lambda: [Culture.IC, Culture.SPUP], min_length=1)
    weight_ranges: list[tuple[int, int]] = Field(default_factory=lambda: [(1, 100), (101, 200)], min_length=1)
    value_range: tuple[int, int] = (1, 10_000)
    concepts: list[FairnessConcept] = Field(default_factory=lambda: list(ALL_CONCEPTS), min_length=1)
    kind: ProblemKind = ProblemKind.ALLOCATION
    seed: int = Field(0, ge=0, lt=2**64)
    jobs: int = Field(1, ge=1)
    leaf_budget: int = Field(DEFAULT_LEAF_BUDGET, ge=1)
    cross_check: bool = True
    repro_dir: Path = Path("fairalloc-repro")

    @model_validator(mode="after")
    def _check_grid(self) -> ExperimentConfig:
        if any(n < 1 for n in self.n_values):
            raise ValueError("every n must be at least 1")
        if self.kind is ProblemKind.HOUSE and any(n > self.m for n in self.n_values):
            raise ValueError(f"house experiments need n <= m (m = {self.m}), got n values {self.n_values}")
        for lo, hi in [*self.weight_ranges, self.value_range]:
            if lo < 1 or hi < lo:
                raise ValueError(f"ranges must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
        return self


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialSpec:
    culture_index: int
    culture: Culture
    weight_index: int
    weight_range: tuple[int, int]
    n: int
    m: int
    trial: int
    value_range: tuple[int, int]
    seed: int
    kind: ProblemKind
    leaf_budget: int
    cross_check: bool
    repro_dir: Path

    @property
    def keys(self) -> tuple[int, int, int, int]:
        return self.culture_index, self.weight_index, self.n, self.trial


@dataclass(frozen=True)
class TrialOutcome:
    """Existence flags in SEF, AEF, SAEF order, or None when the oracle refused."""

    flags: tuple[bool, bool, bool] | None


def trial_instance(spec: TrialSpec) -> Instance:
    config = GenConfig(
        n=spec.n,
        m=spec.m,
        culture=spec.culture,
        value_range=spec.value_range,
        weight_range=spec.weight_range,
        seed=spec.seed,
    )
    return gen_instance(config, derive_rng(spec.seed, *spec.keys))


def _write_repro(spec: TrialSpec, instance: Instance, reason: str) -> Path:
    spec.repro_dir.mkdir(parents=True, exist_ok=True)
    path = spec.repro_dir / f"repro_{spec.culture.value}_w{spec.weight_index}_n{spec.n}_t{spec.trial}.json"
    meta = {
        "reason": reason,
        "seed": spec.seed,
        "keys": list(spec.keys),
        "culture": spec.culture.value,
        "weight_range": list(spec.weight_range),
        "value_range": list(spec.value_range),
        "kind": spec.kind.value,
    }
    path.write_text(serialize_instance(instance, meta=meta), encoding="utf-8")
    return path


def _specialized_checks(instance: Instance, kind: ProblemKind) -> list[tuple[FairnessConcept, Callable[[Instance], Allocation | None]]]:
    pc = classify_preferences(instance)
    checks: list[tuple[FairnessConcept, Callable[[Instance], Allocation | None]]] = []
    if kind is ProblemKind.ALLOCATION and pc.is_identical and pc.is_01:
        checks += [
            (FairnessConcept.SEF, sef_identical01),
            (FairnessConcept.AEF, aef_identical01),
            (FairnessConcept.SAEF, saef_identical01_dp),
        ]
    if kind is ProblemKind.HOUSE and instance.n <= instance.m:
        if pc.is_01:
            checks.append((FairnessConcept.SAEF, saef_house_01))
        if pc.is_identical:
            checks.append((FairnessConcept.SAEF, saef_house_identical_dp))
    return checks


def _cross_check(spec: TrialSpec, instance: Instance, profile: ExistenceProfile) -> None:
    for concept, solver in _specialized_checks(instance, spec.kind):
        fast = solver(instance) is not None
        slow = profile.exists(concept, spec.kind)
        if fast != slow:
            reason = f"{solver.__name__} says {fast}, exact oracle says {slow} ({concept.name})"
            path = _write_repro(spec, instance, reason)
            raise SolverDisagreementError(f"{reason}; repro written to {path}")


def run_trial(spec: TrialSpec) -> TrialOutcome:
    instance = trial_instance(spec)
    try:
        profile = existence_profile(instance, kinds=(spec.kind,), leaf_budget=spec.leaf_budget)
    except BudgetExceededError as exc:
        logging.debug("Trial %s refused: %s", spec.keys, exc)
        return TrialOutcome(None)
    if not profile.inheritability_holds():
        path = _write_repro(spec, instance, "SEF or AEF exists without SAEF")
        raise RuntimeError(f"internal error: inheritability violated; repro written to {path}")
    if spec.cross_check:
        _cross_check(spec, instance, profile)
    return TrialOutcome(tuple(profile.exists(c, spec.kind) for c in ALL_CONCEPTS))


# ---------------------------------------------------------------------------
# Cells and report
# ---------------------------------------------------------------------------

@dataclass
class CellResult:
    culture: Culture
    weight_range: tuple[int, int]
    kind: ProblemKind
    n: int
    m: int
    trials: int
    counts: dict[FairnessConcept, int] = field(default_factory=lambda: {c: 0 for c in ALL_CONCEPTS})
    refused: int = 0
    elapsed: float = 0.0

    @property
    def complete(self) -> bool:
        return self.refused == 0

    @property
    def setting(self) -> tuple[Culture, tuple[int, int]]:
        return self.culture, self.weight_range

    def add(self, outcome: TrialOutcome) -> None:
        if outcome.flags is None:
            self.refused += 1
            return
        for concept, exists in zip(ALL_CONCEPTS, outcome.flags):
            self.counts[concept] += int(exists)

    def ratio(self, concept: FairnessConcept) -> float:
        evaluated = self.trials - self.refused
        return self.counts[concept] / evaluated if evaluated else 0.0

    def ratios(self) -> tuple[float, float, float]:
        return tuple(self.ratio(c) for c in ALL_CONCEPTS)


def _weight_label(weight_range: tuple[int, int]) -> str:
    return f"{weight_range[0]}-{weight_range[1]}"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list[CellResult]
    started: datetime
    elapsed: float

    def to_csv(self) -> str:
        """Deterministic table; the timestamp sits alone on a trailing '#' line."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        wanted = set(self.config.concepts)
        for cell in self.cells:
            ratios = [f"{cell.ratio(c):.4f}" if c in wanted else "" for c in ALL_CONCEPTS]
            counts = [str(cell.counts[c]) if c in wanted else "" for c in ALL_CONCEPTS]
            writer.writerow([
                cell.culture.value, _weight_label(cell.weight_range), cell.kind.value,
                cell.n, cell.m, cell.trials, *ratios, self.config.seed, *counts, cell.refused,
            ])
        buf.write(f"# generated {self.started.isoformat(timespec='seconds')} elapsed {self.elapsed:.1f}s\n")
        return buf.getvalue()

    def settings(self) -> list[tuple[Culture, tuple[int, int]]]:
        seen: list[tuple[Culture, tuple[int, int]]] = []
        for cell in self.cells:
            if cell.setting not in seen:
                seen.append(cell.setting)
        return seen

    def cells_of(self, setting: tuple[Culture, tuple[int, int]]) -> list[CellResult]:
        return sorted((c for c in self.cells if c.setting == setting), key=lambda c: c.n)

    def deviation(self, setting: tuple[Culture, tuple[int, int]]) -> float | None:
        """Total absolute deviation from the reference ratios over the shared n values."""
        cells = [c for c in self.cells_of(setting) if c.n in REFERENCE_RATIOS]
        if not cells or self.config.kind is not ProblemKind.ALLOCATION or self.config.m != REFERENCE_M:
            return None
        return sum(abs(r - ref) for c in cells for r, ref in zip(c.ratios(), REFERENCE_RATIOS[c.n]))

    def best_setting(self) -> tuple[Culture, tuple[int, int]] | None:
        scored = [(d, s) for s in self.settings() if (d := self.deviation(s)) is not None]
        return min(scored, key=lambda pair: pair[0])[1] if scored else None

    def ordering_holds(self, setting: tuple[Culture, tuple[int, int]]) -> bool:
        """SAEF > SEF > AEF in every cell (AEF may be 0 alongside SEF), each ratio non-increasing in n."""
        cells = self.cells_of(setting)
        for cell in cells:
            sef, aef, saef = cell.ratios()
            if not (saef > sef and (sef > aef or aef == 0)):
                return False
        for a, b in zip(cells, cells[1:]):
            if any(rb > ra for ra, rb in zip(a.ratios(), b.ratios())):
                return False
        return True

    def hits_band(self, setting: tuple[Culture, tuple[int, int]]) -> bool:
        cell = next((c for c in self.cells_of(setting) if c.n == 5), None)
        if cell is None or self.deviation(setting) is None:
            return False
        return all(abs(r - ref) <= tol for r, ref, tol in zip(cell.ratios(), REFERENCE_RATIOS[5], BAND_N5))

    def comparison(self) -> str:
        lines = ["Comparison with the published existence ratios (complete allocations, m = 8):"]
        if self.best_setting() is None:
            lines.append("  not applicable to this grid (needs allocation kind, m = 8, n in 5..8)")
        else:
            for setting in self.settings():
                culture, weights = setting
                lines.append(f"  setting {culture.value} / weights {_weight_label(weights)}:"
                             f" total deviation {self.deviation(setting):.4f},"
                             f" ordering {'ok' if self.ordering_holds(setting) else 'VIOLATED'},"
                             f" n=5 band {'hit' if self.hits_band(setting) else 'missed'}")
                for cell in self.cells_of(setting):
                    if cell.n not in REFERENCE_RATIOS:
                        continue
                    devs = ", ".join(
                        f"{c.label} {r:.4f} (ref {ref:.4f}, dev {abs(r - ref):.4f})"
                        for c, r, ref in zip(ALL_CONCEPTS, cell.ratios(), REFERENCE_RATIOS[cell.n])
                    )
                    lines.append(f"    n={cell.n}: {devs}")
            best = self.best_setting()
            lines.append(f"  best match: {best[0].value} / weights {_weight_label(best[1])}")
        incomplete = [c for c in self.cells if not c.complete]
        if incomplete:
            lines.append(f"  INCOMPLETE cells (budget refusals): {len(incomplete)}")
            lines += [f"    {c.culture.value} / {_weight_label(c.weight_range)} n={c.n}: {c.refused} refused"
                      for c in incomplete]
        lines.append(f"  interpretation: {INTERPRETATION_NOTE}")
        lines.append("  trend comparison is qualitative (ordering and monotonicity in n only)")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def estimate_leaves(config: ExperimentConfig, n: int) -> int:
    """Rows the oracle enumerates for one trial (surjections: every generated utility is positive)."""
    if config.kind is ProblemKind.HOUSE:
        return house_leaf_count(n, config.m)
    return surjection_count(n, config.m)


def _specs(config: ExperimentConfig) -> Iterable[tuple[tuple[int, int, int], list[TrialSpec]]]:
    for ci, culture in enumerate(config.cultures):
        for wi, weight_range in enumerate(config.weight_ranges):
            for n in config.n_values:
                specs = [
                    TrialSpec(ci, culture, wi, weight_range, n, config.m, t, config.value_range,
                              config.seed, config.kind, config.leaf_budget, config.cross_check,
                              config.repro_dir)
                    for t in range(config.trials)
                ]
                yield (ci, wi, n), specs


def run_experiment(config: ExperimentConfig, *, progress: bool = True) -> ExperimentReport:
    """
    Evaluate every cell of config.

    Raises:
        SolverDisagreementError: if a polynomial solver disagrees with the oracle.
        RuntimeError: if an instance violates inheritability.
    """
    for n in config.n_values:
        leaves = estimate_leaves(config, n)
        if leaves > config.leaf_budget:
            logging.warning("n=%d needs %d leaves per trial, over the budget of %d; its cells will be refused.",
                            n, leaves, config.leaf_budget)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    total = len(config.cultures) * len(config.weight_ranges) * len(config.n_values) * config.trials
    cells: list[CellResult] = []
    pool = ProcessPoolExecutor(max_workers=config.jobs) if config.jobs > 1 else None
    try:
        with tqdm(total=total, unit="inst", desc="experiment", disable=not progress) as bar:
            for (ci, wi, n), specs in _specs(config):
                cell = CellResult(config.cultures[ci], config.weight_ranges[wi], config.kind, n, config.m, config.trials)
                t_cell = time.perf_counter()
                if pool is None:
                    outcomes = map(run_trial, specs)
                else:
                    outcomes = pool.map(run_trial, specs, chunksize=max(1, len(specs) // (config.jobs * 8)))
                for outcome in outcomes:
                    cell.add(outcome)
                    bar.update(1)
                cell.elapsed = time.perf_counter() - t_cell
                logging.info(
                    "Cell %s/%s n=%d: SEF %d, AEF %d, SAEF %d of %d (%d refused) in %.1fs.",
                    cell.culture.value, _weight_label(cell.weight_range), n,
                    cell.counts[FairnessConcept.SEF], cell.counts[FairnessConcept.AEF],
                    cell.counts[FairnessConcept.SAEF], cell.trials, cell.refused, cell.elapsed,
                )
                cells.append(cell)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return ExperimentReport(config, cells, started, time.perf_counter() - t0)
