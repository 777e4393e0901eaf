"""Sweep enumeration, timed and memory-accounted fusion runs, grouped reports.

Timing uses the wall clock around the fuse call only; peak allocation comes
from tracemalloc scoped to a single extra run so the hook cannot distort the
timed samples. Everything here is single-threaded by design: runtimes of
different methods must be comparable.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import statistics
import time
import tracemalloc
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    ConfigurationError,
    FuseBenchError,
    InvalidInputError,
    MeasurementError,
)
from .fusion import FusionConfig, FusionMethod, StackingMethod, fuse
from .imgcore import Image, load_ground_truth, load_scene
from .metrics import evaluate
from .weights import WeightConfig, WeightKind

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("scene", "method", "weights", "n_positive", "stacking",
               "ms_ssim", "psnr_db", "ergas", "runtime_s", "peak_alloc_bytes")

WEIGHT_POLICIES = ("exclude-one", "full")


def _sig6(value: float) -> float:
    """Round to 6 significant digits, the CSV storage precision."""
    return float(f"{value:.6g}")


@dataclass
class SweepSpace:
    """Which slice of the benchmark variable space to enumerate."""

    methods: Sequence[FusionMethod] = tuple(FusionMethod)
    n_positive_values: Sequence[int] = (1, 2, 3, 4, 5)
    stackings: Sequence[StackingMethod] = tuple(StackingMethod)
    weight_policy: str = "exclude-one"

    def __post_init__(self) -> None:
        methods = tuple(m for m in FusionMethod if m in set(self.methods))
        if not methods:
            raise InvalidInputError("sweep space selects no method")
        ns = tuple(sorted(set(self.n_positive_values)))
        if not ns:
            raise InvalidInputError("sweep space selects no frame count")
        for n in ns:
            if not 1 <= n <= 5:
                raise ConfigurationError(
                    f"n_positive values must be in 1..5, got {n}")
        stackings = tuple(s for s in StackingMethod
                          if s in set(self.stackings))
        if not stackings:
            raise InvalidInputError("sweep space selects no stacking method")
        if self.weight_policy not in WEIGHT_POLICIES:
            raise ConfigurationError(
                f"weight_policy must be one of {WEIGHT_POLICIES}, "
                f"got {self.weight_policy!r}")
        self.methods = methods
        self.n_positive_values = ns
        self.stackings = stackings


def weight_sets_for(method: FusionMethod,
                    policy: str = "exclude-one") -> tuple[WeightConfig, ...]:
    """The weight combinations a method is benchmarked with.

    "exclude-one" is the benchmark protocol: the full set plus every
    leave-one-out subset. "full" expands to every non-empty legal subset.
    """
    allowed = [k for k in (WeightKind.CONTRAST, WeightKind.SATURATION,
                           WeightKind.EXPOSURE) if k in method.allowed_kinds]
    if policy == "exclude-one":
        sets = [tuple(allowed)]
        for dropped in allowed:
            sets.append(tuple(k for k in allowed if k is not dropped))
    elif policy == "full":
        sets = []
        for size in range(len(allowed), 0, -1):
            sets.extend(itertools.combinations(allowed, size))
    else:
        raise ConfigurationError(f"unknown weight policy {policy!r}")
    return tuple(WeightConfig(frozenset(s)) for s in sets)


def enumerate_configs(space: SweepSpace) -> list[FusionConfig]:
    """Every legal config in the space, ordered (method, weights, n, stacking).

    n_positive=1 leaves nothing to stack, so it pairs only with stacking
    'none'.
    """
    configs: list[FusionConfig] = []
    for method in space.methods:
        for wcfg in weight_sets_for(method, space.weight_policy):
            for n in space.n_positive_values:
                if n == 1:
                    if StackingMethod.NONE in space.stackings:
                        configs.append(FusionConfig(
                            method, wcfg, 1, StackingMethod.NONE))
                else:
                    for stacking in space.stackings:
                        configs.append(FusionConfig(method, wcfg, n, stacking))
    if not configs:
        raise InvalidInputError("sweep space contains no legal configuration")
    return configs


def record_key(scene: str, cfg: FusionConfig) -> tuple:
    return (scene, cfg.method.value, cfg.weights.letters(),
            cfg.n_positive, cfg.stacking.value)


@dataclass
class BenchRecord:
    """One measured (scene, config) cell.

    Metric and runtime floats are stored at the CSV precision of 6
    significant digits so that written and re-parsed records compare equal.
    """

    scene: str
    config: FusionConfig
    ms_ssim: float
    psnr_db: float
    ergas: float
    runtime_s: float
    peak_alloc_bytes: int

    def __post_init__(self) -> None:
        for name in ("ms_ssim", "psnr_db", "ergas", "runtime_s"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} is not finite: {value!r}")
            setattr(self, name, _sig6(value))
        if self.runtime_s <= 0:
            raise InvalidInputError(f"runtime_s must be > 0: {self.runtime_s}")
        self.peak_alloc_bytes = int(self.peak_alloc_bytes)
        if self.peak_alloc_bytes <= 0:
            raise InvalidInputError(
                f"peak_alloc_bytes must be > 0: {self.peak_alloc_bytes}")

    @property
    def key(self) -> tuple:
        return record_key(self.scene, self.config)

    def to_row(self) -> list[str]:
        return [self.scene,
                self.config.method.value,
                self.config.weights.letters(),
                str(self.config.n_positive),
                self.config.stacking.value,
                f"{self.ms_ssim:.6g}",
                f"{self.psnr_db:.6g}",
                f"{self.ergas:.6g}",
                f"{self.runtime_s:.6g}",
                str(self.peak_alloc_bytes)]

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "BenchRecord":
        if len(row) != len(CSV_COLUMNS):
            raise InvalidInputError(
                f"expected {len(CSV_COLUMNS)} CSV fields, got {len(row)}")
        cfg = FusionConfig(method=FusionMethod(row[1]),
                           weights=WeightConfig.from_letters(row[2]),
                           n_positive=int(row[3]),
                           stacking=StackingMethod(row[4]))
        return cls(scene=row[0], config=cfg,
                   ms_ssim=float(row[5]), psnr_db=float(row[6]),
                   ergas=float(row[7]), runtime_s=float(row[8]),
                   peak_alloc_bytes=int(row[9]))


def measure_fuse(seq, cfg: FusionConfig,
                 repeats: int = 10) -> tuple[Image, float, int]:
    """Fuse with timing and allocation accounting.

    One untimed warm-up, `repeats` timed runs (median wall clock), then one
    final run under tracemalloc for the peak. The traced run is separate
    because allocation tracking slows execution; determinism of fuse makes
    its image identical to the timed runs' images.
    """
    if repeats < 1:
        raise ConfigurationError(f"repeats must be >= 1, got {repeats}")
    fuse(seq, cfg)
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fuse(seq, cfg)
        samples.append(time.perf_counter() - start)
    runtime = statistics.median(samples)
    if not math.isfinite(runtime) or runtime <= 0:
        raise MeasurementError(f"unusable timing samples: {samples!r}")
    was_tracing = tracemalloc.is_tracing()
    if not was_tracing:
        tracemalloc.start()
    try:
        base = tracemalloc.get_traced_memory()[0]
        tracemalloc.reset_peak()
        image = fuse(seq, cfg)
        peak = tracemalloc.get_traced_memory()[1]
    finally:
        if not was_tracing:
            tracemalloc.stop()
    return image, runtime, max(peak - base, 1)


def discover_scenes(dataset_dir) -> list[tuple[str, Path]]:
    """Scene subdirectories (they must hold a gt.png), sorted by name."""
    root = Path(dataset_dir)
    if not root.is_dir():
        raise InvalidInputError(f"dataset directory not found: {root}")
    dirs = sorted(p for p in root.iterdir()
                  if p.is_dir() and (p / "gt.png").is_file())
    if not dirs:
        raise InvalidInputError(f"no scene directories with gt.png in {root}")
    return [(p.name, p) for p in dirs]


def read_records_csv(path) -> list[BenchRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return records
        if tuple(header) != CSV_COLUMNS:
            raise InvalidInputError(f"unexpected CSV header in {path}")
        for row in reader:
            if row:
                records.append(BenchRecord.from_row(row))
    return records


def run_sweep(dataset_dir, space: SweepSpace, repeats: int = 10,
              csv_path=None) -> list[BenchRecord]:
    """Measure every (scene, config) cell, streaming rows to an append-only CSV.

    A pre-existing CSV acts as the resume state: cells already present are
    reused, not re-measured, and never duplicated. Per-cell failures are
    logged and skipped so a long sweep survives individual bad scenes.
    """
    scenes = discover_scenes(dataset_dir)
    configs = enumerate_configs(space)
    done: dict[tuple, BenchRecord] = {}
    fresh = True
    if csv_path is not None:
        csv_path = Path(csv_path)
        if csv_path.is_file() and csv_path.stat().st_size > 0:
            fresh = False
            for record in read_records_csv(csv_path):
                done[record.key] = record
    records: list[BenchRecord] = []
    fh = None
    writer = None
    if csv_path is not None:
        fh = open(csv_path, "a", newline="", encoding="utf-8")
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(CSV_COLUMNS)
            fh.flush()
    try:
        for scene_id, scene_dir in scenes:
            try:
                seq = load_scene(scene_dir)
                gt = load_ground_truth(scene_dir)
            except FuseBenchError as exc:
                logger.warning("scene %s unreadable, skipping: %s",
                               scene_id, exc)
                continue
            n_available = sum(1 for f in seq if f.ev >= 0)
            for cfg in configs:
                key = record_key(scene_id, cfg)
                if key in done:
                    records.append(done[key])
                    continue
                if n_available < cfg.n_positive:
                    logger.warning(
                        "scene %s has %d EV>=0 frames, config needs %d, "
                        "skipping", scene_id, n_available, cfg.n_positive)
                    continue
                try:
                    image, runtime, peak = measure_fuse(seq, cfg, repeats)
                    report = evaluate(image, gt)
                except FuseBenchError as exc:
                    logger.warning("scene %s config %s failed: %s",
                                   scene_id, key[1:], exc)
                    continue
                record = BenchRecord(scene=scene_id, config=cfg,
                                     ms_ssim=report.ms_ssim,
                                     psnr_db=report.psnr,
                                     ergas=report.ergas,
                                     runtime_s=runtime,
                                     peak_alloc_bytes=peak)
                records.append(record)
                if writer is not None:
                    writer.writerow(record.to_row())
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    return records


GROUP_MODES = ("method_weights", "frames_stacking", "full")
METRIC_COLUMNS = ("ms_ssim", "psnr_db", "ergas", "runtime_s",
                  "peak_alloc_bytes")
# which direction wins the per-column best marker
HIGHER_BETTER = {"ms_ssim": True, "psnr_db": True, "ergas": False,
                 "runtime_s": False, "peak_alloc_bytes": False}

TABLE_NOTE = "# best per column: *, worst: _; ms_ssim computed on luma"


@dataclass(frozen=True)
class GroupedRow:
    key: tuple
    label: str
    count: int
    means: Mapping[str, float]


def _group_key(record: BenchRecord, group_by: str) -> tuple:
    cfg = record.config
    if group_by == "method_weights":
        return (cfg.method.value, cfg.weights.letters())
    if group_by == "frames_stacking":
        return (cfg.n_positive, cfg.stacking.value)
    return (cfg.method.value, cfg.weights.letters(),
            cfg.n_positive, cfg.stacking.value)


def _group_label(key: tuple, group_by: str) -> str:
    if group_by == "method_weights":
        return f"{key[0]} {key[1]}"
    if group_by == "frames_stacking":
        return f"n={key[0]} {key[1]}"
    return f"{key[0]} {key[1]} n={key[2]} {key[3]}"


def group_report(records: Iterable[BenchRecord],
                 group_by: str = "method_weights"
                 ) -> tuple[list[GroupedRow], str]:
    """Per-group metric means plus a rendered text table.

    Groups appear in first-record order, which for sweep output follows the
    enumeration order.
    """
    if group_by not in GROUP_MODES:
        raise ConfigurationError(
            f"group_by must be one of {GROUP_MODES}, got {group_by!r}")
    records = list(records)
    if not records:
        raise InvalidInputError("no records to group")
    groups: dict[tuple, list[BenchRecord]] = {}
    for record in records:
        groups.setdefault(_group_key(record, group_by), []).append(record)
    rows = []
    for key, members in groups.items():
        means = {column: statistics.fmean(getattr(r, column) for r in members)
                 for column in METRIC_COLUMNS}
        rows.append(GroupedRow(key=key, label=_group_label(key, group_by),
                               count=len(members), means=means))
    return rows, render_group_table(rows)


def render_group_table(rows: Sequence[GroupedRow]) -> str:
    """Aligned text table with best (*) and worst (_) markers per column.

    Ties share the marker; when an entire column is one value it is marked
    best only.
    """
    if not rows:
        raise InvalidInputError("no rows to render")
    cells: list[list[str]] = []
    for row in rows:
        cells.append([row.label, str(row.count)])
    for column in METRIC_COLUMNS:
        values = [row.means[column] for row in rows]
        best = max(values) if HIGHER_BETTER[column] else min(values)
        worst = min(values) if HIGHER_BETTER[column] else max(values)
        for line, value in zip(cells, values):
            text = f"{value:.6g}"
            if value == best:
                text += "*"
            elif value == worst:
                text += "_"
            line.append(text)
    headers = ["group", "count", *METRIC_COLUMNS]
    widths = [max(len(headers[i]), max(len(c[i]) for c in cells))
              for i in range(len(headers))]
    out = [TABLE_NOTE]
    out.append("  ".join(h.ljust(widths[i]) if i == 0 else h.rjust(widths[i])
                         for i, h in enumerate(headers)))
    for line in cells:
        out.append("  ".join(
            line[i].ljust(widths[i]) if i == 0 else line[i].rjust(widths[i])
            for i in range(len(headers))))
    return "\n".join(out)


def write_grouped_csv(rows: Sequence[GroupedRow], path) -> None:
    """Grouped means as plain CSV, no best/worst markers."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "count", *METRIC_COLUMNS])
        for row in rows:
            writer.writerow([row.label, row.count,
                             *(f"{row.means[c]:.6g}" for c in METRIC_COLUMNS)])
