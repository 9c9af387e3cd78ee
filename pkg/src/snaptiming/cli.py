"""Command-line entry point for the snap-timing pipeline.

Each subcommand runs one stage against an output directory::

    snaptiming ingest --tracking data/ --charting charting.csv --out run/
    snaptiming detect --out run/
    snaptiming all --config run.toml

Stages read the artifacts of earlier stages from the output directory. A
manifest records a content hash of every stage's inputs and settings, so a
stage whose inputs are unchanged is skipped. Exit codes: 0 success, 2 usage,
3 data validation, 4 numerical failure, 5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np
import tomli
from filelock import FileLock, Timeout

from . import __version__
from .analysis import (
    DIRECTIONS,
    board_means,
    correlation_report,
    fixed_effects_table,
    havoc_rates,
    motion_rates,
    qb_leaderboard,
    qb_mean_board,
    receiver_board,
    sd_table,
    write_correlation_json,
    write_havoc_scatter,
    write_leaderboard,
    write_summary_table,
)
from .clustering import (
    FAMILIES,
    GmmModel,
    extract_all,
    read_assignments,
    read_features,
    select_model,
    write_assignments,
    write_features,
    write_model_json,
)
from .detection import (
    DEFAULT_RATIO_THRESHOLD,
    calibrate_ratio,
    detect_all,
    read_snap_timings,
    write_snap_timings,
)
from .errors import CalibrationError, SamplerError, SelectionError, SnapTimingError
from .inference.hmc import PosteriorDraws, SamplerConfig
from .ingest import ValidationReport, filter_analysis_plays, parse_tracking, read_play_store, write_play_store
from .model import (
    Design,
    ModelConfig,
    ParameterLayout,
    build_design,
    fit,
    read_design,
    write_design_csv,
    write_design_maps,
)
from .synthetic import CorpusConfig, ModelTruth, generate_model_dataset, generate_tracking_corpus, recovery_experiment

log = logging.getLogger("snaptiming")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

STAGES = ("ingest", "detect", "features", "cluster", "fit", "report")
MANIFEST = "manifest.json"


class UsageError(Exception):
    """Bad configuration or flags."""


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.cause = exc


# ------------------------------------------------------------------ config


@dataclass
class PipelineConfig:
    tracking: str | None = None
    charting: str | None = None
    output_dir: str = "snaptiming_out"
    seed: int = 0
    ratio_threshold: float | None = None
    mirror: bool = True
    g_min: int = 1
    g_max: int = 9
    families: tuple[str, ...] = FAMILIES
    n_restarts: int = 5
    center_play_clock: bool = False
    prior_scale_sd: float = 2.5
    prior_sd_fixed: float = 10.0
    prior_dof: float = 3.0
    chains: int = 4
    iterations: int = 2000
    warmup: int = 1000
    leapfrog_steps: int = 32
    target_accept: float = 0.8
    min_attempts: int = 50
    min_motions: int = 20
    leaderboard_direction: str = "paper"
    level: float = 0.95
    n_plays: int = 500
    simulate_kind: str = "tracking"
    replicates: int = 20
    recovery_level: float = 0.9

    def validate(self) -> "PipelineConfig":
        checks = [
            (self.ratio_threshold is None or 0.0 < self.ratio_threshold <= 1.0, "ratio_threshold must lie in (0, 1]"),
            (1 <= self.g_min <= self.g_max, "need 1 <= g_min <= g_max"),
            (bool(self.families) and set(self.families) <= set(FAMILIES), f"families must be drawn from {FAMILIES}"),
            (self.n_restarts >= 1, "n_restarts must be >= 1"),
            (self.prior_scale_sd > 0 and self.prior_sd_fixed > 0 and self.prior_dof > 0, "prior settings must be positive"),
            (self.chains >= 1 and 0 <= self.warmup < self.iterations, "need chains >= 1 and 0 <= warmup < iterations"),
            (self.leapfrog_steps >= 1 and 0.0 < self.target_accept < 1.0, "bad leapfrog_steps or target_accept"),
            (self.min_attempts >= 0 and self.min_motions >= 0, "minimum counts must be non-negative"),
            (self.leaderboard_direction in DIRECTIONS, f"leaderboard_direction must be one of {DIRECTIONS}"),
            (0.0 < self.level < 1.0 and 0.0 < self.recovery_level < 1.0, "interval levels must lie in (0, 1)"),
            (self.n_plays >= 1 and self.replicates >= 0, "need n_plays >= 1 and replicates >= 0"),
            (self.simulate_kind in ("tracking", "model"), "simulate_kind must be 'tracking' or 'model'"),
        ]
        for ok, message in checks:
            if not ok:
                raise UsageError(message)
        return self

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(
            n_chains=self.chains, n_iterations=self.iterations, n_warmup=self.warmup,
            leapfrog_steps=self.leapfrog_steps, target_accept=self.target_accept, seed=self.seed,
        )

    def model(self) -> ModelConfig:
        return ModelConfig(self.prior_scale_sd, self.prior_sd_fixed, self.prior_dof)

    def subset(self, names) -> dict:
        d = asdict(self)
        return {k: (list(d[k]) if isinstance(d[k], tuple) else d[k]) for k in names}

    def digest(self) -> str:
        return _hash_obj(self.subset(f.name for f in fields(self)))


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    try:
        if kind.startswith("tuple"):
            items = value.split(",") if isinstance(value, str) else value
            return tuple(str(v).strip() for v in items if str(v).strip())
        if kind.startswith("bool"):
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return value.lower() in ("true", "1", "yes")
            return bool(value)
        if kind.startswith("int"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind.startswith("float"):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise UsageError(f"config key '{name}': cannot interpret {value!r}") from None


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    """Config file values, then command-line overrides, then validation."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from None
        for key, value in raw.items():
            if isinstance(value, dict):
                raise UsageError(f"{path}: tables are not supported (key '{key}'); use flat keys")
            if key not in _FIELD_TYPES:
                raise UsageError(f"{path}: unknown config key '{key}'")
            values[key] = _coerce(key, value)
    for key, value in overrides.items():
        if value is not None:
            values[key] = _coerce(key, value)
    return PipelineConfig(**values).validate()


# ---------------------------------------------------------------- hashing


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _versions() -> dict:
    import numba

    return {"snaptiming": __version__, "python": platform.python_version(), "numpy": np.__version__, "numba": numba.__version__}


# ---------------------------------------------------------------- context


class RunContext:
    """Output directory, manifest and provenance for one invocation."""

    def __init__(self, cfg: PipelineConfig, force: bool = False, echo: Callable[[str], None] = print):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.force = force
        self.echo = echo
        self.config_hash = cfg.digest()
        self.manifest = self._load_manifest()
        self.executed: list[str] = []

    def path(self, name: str) -> Path:
        return self.out / name

    def provenance(self, stage: str) -> dict:
        return {"stage": stage, "config_hash": self.config_hash, "seed": self.cfg.seed, "version": __version__}

    def _load_manifest(self) -> dict:
        p = self.out / MANIFEST
        if p.exists():
            try:
                return json.loads(p.read_text())
            except json.JSONDecodeError:
                log.warning("ignoring unreadable manifest %s", p)
        return {"stages": {}}

    def save_manifest(self) -> None:
        self.manifest.update({"config_hash": self.config_hash, "versions": _versions(), "config": self.cfg.subset(_FIELD_TYPES)})
        tmp = self.out / (MANIFEST + ".tmp")
        tmp.write_text(json.dumps(self.manifest, indent=2, sort_keys=True))
        tmp.replace(self.out / MANIFEST)

    def run_stage(self, stage: "Stage") -> bool:
        """Run ``stage`` unless the manifest shows identical inputs. True if it ran."""
        inputs = stage.inputs(self)
        missing = [str(p) for p in inputs if not p.exists()]
        if missing:
            raise StageError(stage.name, FileNotFoundError(f"missing input {', '.join(missing)}"))
        input_hashes = {str(p): file_digest(p) for p in inputs}
        key = _hash_obj({"stage": stage.name, "config": self.cfg.subset(stage.config_keys), "inputs": input_hashes})
        entry = self.manifest["stages"].get(stage.name)
        outputs = [self.path(n) for n in stage.outputs]
        if not self.force and entry and entry.get("key") == key and all(p.exists() for p in outputs):
            self.echo(f"{stage.name}: cached")
            return False
        start = time.perf_counter()
        try:
            summary = stage.run(self)
        except (SnapTimingError, ValueError, OSError) as exc:
            raise StageError(stage.name, exc) from exc
        seconds = time.perf_counter() - start
        self.manifest["stages"][stage.name] = {
            "key": key,
            "input_hashes": input_hashes,
            "outputs": {n: file_digest(self.path(n)) for n in stage.outputs},
            "seconds": round(seconds, 3),
            "summary": summary,
        }
        self.save_manifest()
        self.executed.append(stage.name)
        self.echo(f"{stage.name}: {summary} ({seconds:.1f} s)")
        return True


def _write_csv_with_provenance(path: Path, provenance: dict, writer: Callable) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
        writer(fh)


def _write_json(path: Path, obj: dict, provenance: dict) -> None:
    path.write_text(json.dumps({**obj, "provenance": provenance}, indent=2))


def _read_json(path: Path) -> dict:
    return json.loads(path.read_text())


# ----------------------------------------------------------------- stages


@dataclass(frozen=True)
class Stage:
    name: str
    config_keys: tuple[str, ...]
    outputs: tuple[str, ...]
    input_names: tuple[str, ...]
    body: Callable[[RunContext], str]
    external: Callable[[RunContext], list[Path]] | None = None

    def inputs(self, ctx: RunContext) -> list[Path]:
        paths = [ctx.path(n) for n in self.input_names]
        if self.external is not None:
            paths = self.external(ctx) + paths
        return paths

    def run(self, ctx: RunContext) -> str:
        return self.body(ctx)


def tracking_files(tracking: str | None) -> list[Path]:
    """A tracking CSV, or every ``*.csv`` file in a tracking directory."""
    if tracking is None:
        raise UsageError("ingest needs --tracking")
    p = Path(tracking)
    if p.is_dir():
        files = sorted(f for f in p.glob("*.csv") if f.is_file())
        if not files:
            raise FileNotFoundError(f"no CSV files in {p}")
        return files
    return [p]


def _ingest_inputs(ctx: RunContext) -> list[Path]:
    files = tracking_files(ctx.cfg.tracking)
    if ctx.cfg.charting is not None:
        files.append(Path(ctx.cfg.charting))
    return files


def _ingest(ctx: RunContext) -> str:
    report = ValidationReport()
    plays = []
    for path in tracking_files(ctx.cfg.tracking):
        result = parse_tracking(path, ctx.cfg.charting)
        plays.extend(result.plays)
        report.extend(result.report)
    plays.sort(key=lambda p: p.key)
    report.count("plays_parsed", len(plays))
    with open(ctx.path("plays.jsonl"), "w") as fh:
        write_play_store(plays, fh, ctx.provenance("ingest"))
    ctx.path("ingest_report.txt").write_text(report.to_text())
    return f"{len(plays)} plays, {len(report)} rejected"


def _load_plays(ctx: RunContext):
    return read_play_store(ctx.path("plays.jsonl"))


def _analysis_plays(ctx: RunContext, report: ValidationReport | None = None):
    return filter_analysis_plays(_load_plays(ctx), report)


def _detect(ctx: RunContext) -> str:
    report = ValidationReport()
    plays = _analysis_plays(ctx, report)
    calibration: dict = {"override": ctx.cfg.ratio_threshold}
    if ctx.cfg.ratio_threshold is not None:
        threshold = ctx.cfg.ratio_threshold
        calibration["source"] = "override"
    else:
        try:
            cal = calibrate_ratio(plays, report)
            threshold = cal.threshold
            calibration.update(source="calibrated", n_plays=len(cal.ratios), mean_ratio=float(np.mean(cal.ratios)))
        except CalibrationError:
            threshold = DEFAULT_RATIO_THRESHOLD
            calibration["source"] = "default"
    calibration["threshold"] = threshold
    timings = detect_all(plays, threshold, report)
    report.count("snap_timings", len(timings))
    prov = ctx.provenance("detect")
    _write_csv_with_provenance(ctx.path("snap_timings.csv"), prov, lambda fh: write_snap_timings(timings, fh))
    _write_json(ctx.path("calibration.json"), calibration, prov)
    ctx.path("detect_report.txt").write_text(report.to_text())
    return f"{len(timings)} snap timings, threshold {threshold:.2f} ({calibration['source']})"


def _timings(ctx: RunContext) -> dict:
    with open(ctx.path("snap_timings.csv")) as fh:
        return {t.key: t for t in read_snap_timings(fh)}


def _features(ctx: RunContext) -> str:
    report = ValidationReport()
    timings = _timings(ctx)
    plays = [p for p in _load_plays(ctx) if p.key in timings]
    feats = extract_all(plays, timings, mirror=ctx.cfg.mirror, report=report)
    _write_csv_with_provenance(ctx.path("features.csv"), ctx.provenance("features"), lambda fh: write_features(feats, fh))
    return f"{len(feats)} feature rows, {len(report)} rejected"


def _cluster(ctx: RunContext) -> str:
    with open(ctx.path("features.csv")) as fh:
        feats = read_features(fh)
    prov = ctx.provenance("cluster")
    if not feats:
        _write_csv_with_provenance(ctx.path("assignments.csv"), prov, lambda fh: write_assignments([], fh))
        _write_json(ctx.path("gmm.json"), {"status": "skipped", "reason": "no feature rows"}, prov)
        _write_csv_with_provenance(ctx.path("bic_table.csv"), prov, lambda fh: fh.write("family,G,bic\n"))
        return "skipped (no feature rows)"
    result = select_model(
        feats, range(ctx.cfg.g_min, ctx.cfg.g_max + 1), ctx.cfg.families, seed=ctx.cfg.seed, n_restarts=ctx.cfg.n_restarts
    )
    _write_csv_with_provenance(ctx.path("assignments.csv"), prov, lambda fh: write_assignments(result.assignments, fh))
    with open(ctx.path("gmm.json"), "w") as fh:
        write_model_json(result.model, fh, prov)

    def bic_rows(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family", "G", "bic"])
        for (family, G), bic in sorted(result.bic_table.items()):
            w.writerow([family, G, "" if bic is None else repr(bic)])

    _write_csv_with_provenance(ctx.path("bic_table.csv"), prov, bic_rows)
    return f"{result.model.family} with G={result.model.n_components}"


def write_draws_csv(draws: PosteriorDraws, names, stream) -> None:
    n_chains, n_draws, dim = draws.chains.shape
    stream.write(",".join(["chain", "draw", *names]) + "\n")
    idx = np.column_stack([np.repeat(np.arange(n_chains), n_draws), np.tile(np.arange(n_draws), n_chains)])
    body = np.hstack([idx, draws.chains.reshape(n_chains * n_draws, dim)])
    np.savetxt(stream, body, delimiter=",", fmt=["%d", "%d"] + ["%.17g"] * dim)


def read_draws_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    """Draws as ``(n_chains, n_draws, dim)`` plus parameter names."""
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    header = lines[0].strip().split(",")
    names = header[2:]
    if len(lines) == 1:
        return np.empty((0, 0, len(names))), names
    data = np.loadtxt(io.StringIO("".join(lines[1:])), delimiter=",", ndmin=2)
    chain = data[:, 0].astype(int)
    n_chains = chain.max() + 1
    return data[:, 2:].reshape(n_chains, -1, len(names)), names


def _fit(ctx: RunContext) -> str:
    prov = ctx.provenance("fit")
    timings = _timings(ctx)
    with open(ctx.path("assignments.csv")) as fh:
        labels = {a.key: a.hard_label for a in read_assignments(fh)}
    gmm = _read_json(ctx.path("gmm.json"))
    plays = [p for p in _load_plays(ctx) if p.key in timings and p.key in labels]
    if not plays:
        for name in ("design.csv", "draws.csv"):
            ctx.path(name).write_text("# " + json.dumps(prov, sort_keys=True) + "\n")
        _write_json(ctx.path("design_maps.json"), {"status": "skipped", "reason": "no analysis plays"}, prov)
        _write_json(ctx.path("diagnostics.json"), {"status": "skipped", "reason": "no analysis plays"}, prov)
        return "skipped (no analysis plays)"
    n_clusters = GmmModel.from_dict(gmm).n_components
    design = build_design(plays, timings, labels, n_clusters, ctx.cfg.center_play_clock)
    result = fit(design, ctx.cfg.sampler(), ctx.cfg.model())
    _write_csv_with_provenance(ctx.path("design.csv"), prov, lambda fh: write_design_csv(design, fh))
    with open(ctx.path("design_maps.json"), "w") as fh:
        write_design_maps(design, fh, prov)
    names = result.layout.names()
    _write_csv_with_provenance(ctx.path("draws.csv"), prov, lambda fh: write_draws_csv(result.draws, names, fh))
    diag = {
        **result.diagnostics.to_dict(),
        "accept_rate": result.draws.accept_rate.tolist(),
        "divergences": result.draws.divergences.tolist(),
        "step_size": result.draws.step_size.tolist(),
        "sampler": asdict(ctx.cfg.sampler()),
    }
    _write_json(ctx.path("diagnostics.json"), diag, prov)
    return (
        f"{design.n_rows} plays, {result.layout.dim} parameters, max R-hat {result.diagnostics.max_rhat:.3f}, "
        f"{int(result.draws.divergences.sum())} divergences"
    )


_REPORT_FILES = (
    "fixed_effects.csv", "sd_table.csv", "qb_leaderboard.csv", "qb_mean_board.csv",
    "receiver_board.csv", "havoc_scatter.csv", "correlation.json",
)


def _report(ctx: RunContext) -> str:
    prov = ctx.provenance("report")
    maps = _read_json(ctx.path("design_maps.json"))
    plays = _load_plays(ctx)
    if maps.get("status") == "skipped":
        for name in ("fixed_effects.csv", "sd_table.csv"):
            with open(ctx.path(name), "w") as fh:
                write_summary_table([], fh, prov)
        for name in ("qb_leaderboard.csv", "qb_mean_board.csv", "receiver_board.csv"):
            with open(ctx.path(name), "w") as fh:
                write_leaderboard([], fh, provenance=prov)
        with open(ctx.path("havoc_scatter.csv"), "w") as fh:
            write_havoc_scatter(havoc_rates(plays, ctx.cfg.min_attempts), {}, fh, prov)
        with open(ctx.path("correlation.json"), "w") as fh:
            write_correlation_json({}, fh, prov)
        return "empty reports (no fit)"

    with open(ctx.path("design.csv")) as fh:
        design: Design = read_design(fh, maps)
    chains, names = read_draws_csv(ctx.path("draws.csv"))
    layout = ParameterLayout.for_design(design)
    if names != layout.names():
        raise SnapTimingError("draws.csv columns do not match the design layout")
    real = layout.realize(chains.reshape(-1, layout.dim))
    level = ctx.cfg.level

    attempts: dict[str, int] = {}
    for p in plays:
        if p.is_pass_play and p.qb_id is not None:
            attempts[p.qb_id] = attempts.get(p.qb_id, 0) + 1
    motions = design.group_counts()["motion"]

    shape_board = qb_leaderboard(real["u_q"], design.qb_ids, attempts, ctx.cfg.min_attempts, ctx.cfg.leaderboard_direction)
    mean_board = qb_mean_board(real["b_q"], design.qb_ids, attempts, ctx.cfg.min_attempts)
    recv_board = receiver_board(real["b_m"], design.motion_ids, motions, ctx.cfg.min_motions)
    havoc = havoc_rates(plays, ctx.cfg.min_attempts, motion_keys=design.keys)

    with open(ctx.path("fixed_effects.csv"), "w") as fh:
        write_summary_table(fixed_effects_table(chains, layout, level), fh, prov)
    with open(ctx.path("sd_table.csv"), "w") as fh:
        write_summary_table(sd_table(chains, layout, level), fh, prov)
    with open(ctx.path("qb_leaderboard.csv"), "w") as fh:
        write_leaderboard(shape_board, fh, ctx.cfg.leaderboard_direction, prov)
    with open(ctx.path("qb_mean_board.csv"), "w") as fh:
        write_leaderboard(mean_board, fh, "", prov)
    with open(ctx.path("receiver_board.csv"), "w") as fh:
        write_leaderboard(recv_board, fh, "", prov)
    shape_means = board_means(shape_board)
    with open(ctx.path("havoc_scatter.csv"), "w") as fh:
        write_havoc_scatter(havoc, shape_means, fh, prov)
    corr = correlation_report(shape_means, havoc, board_means(mean_board), motion_rates(plays))
    with open(ctx.path("correlation.json"), "w") as fh:
        write_correlation_json(corr, fh, prov)
    return f"{len(shape_board)} QBs on the leaderboard, {len(recv_board)} receivers, {len(havoc)} havoc rows"


STAGE_TABLE = {
    "ingest": Stage("ingest", (), ("plays.jsonl", "ingest_report.txt"), (), _ingest, _ingest_inputs),
    "detect": Stage("detect", ("ratio_threshold",), ("snap_timings.csv", "calibration.json"), ("plays.jsonl",), _detect),
    "features": Stage("features", ("mirror",), ("features.csv",), ("plays.jsonl", "snap_timings.csv"), _features),
    "cluster": Stage(
        "cluster", ("g_min", "g_max", "families", "seed", "n_restarts"),
        ("assignments.csv", "gmm.json", "bic_table.csv"), ("features.csv",), _cluster,
    ),
    "fit": Stage(
        "fit",
        ("seed", "center_play_clock", "prior_scale_sd", "prior_sd_fixed", "prior_dof",
         "chains", "iterations", "warmup", "leapfrog_steps", "target_accept"),
        ("design.csv", "design_maps.json", "draws.csv", "diagnostics.json"),
        ("plays.jsonl", "snap_timings.csv", "assignments.csv", "gmm.json"), _fit,
    ),
    "report": Stage(
        "report", ("min_attempts", "min_motions", "leaderboard_direction", "level"), _REPORT_FILES,
        ("plays.jsonl", "design.csv", "design_maps.json", "draws.csv"), _report,
    ),
}


# ------------------------------------------------------ simulate / recover


def _simulate(ctx: RunContext) -> str:
    cfg = ctx.cfg
    target = ctx.path("simulated")
    prov = ctx.provenance("simulate")
    if cfg.simulate_kind == "tracking":
        corpus = generate_tracking_corpus(cfg.n_plays, cfg.seed, CorpusConfig())
        corpus.write(target, prov)
        return f"{cfg.n_plays} tracking plays in {target}"
    design, truth = generate_model_dataset(ModelTruth(), cfg.n_plays, cfg.seed)
    target.mkdir(parents=True, exist_ok=True)
    _write_csv_with_provenance(target / "design.csv", prov, lambda fh: write_design_csv(design, fh))
    with open(target / "design_maps.json", "w") as fh:
        write_design_maps(design, fh, prov)
    _write_json(target / "truth.json", truth.to_dict(), prov)
    return f"{cfg.n_plays} model-consistent rows in {target}"


def _recover(ctx: RunContext) -> str:
    cfg = ctx.cfg
    report = recovery_experiment(
        ModelTruth(), cfg.n_plays, cfg.replicates, cfg.sampler(), seed=cfg.seed, level=cfg.recovery_level,
        model_config=cfg.model(),
        progress=lambda r: ctx.echo(f"  replicate {r.index + 1}/{cfg.replicates}: max R-hat {r.max_rhat:.3f}"),
    )
    _write_json(ctx.path("recovery.json"), report.to_dict(), ctx.provenance("recover"))
    ctx.path("recovery.txt").write_text(report.to_text())
    ctx.echo(report.to_text().rstrip())
    return f"{len(report.replicates)} replicates, {report.n_flagged} flagged"


# -------------------------------------------------------------------- argv


_FLAG_KEYS = {
    "tracking": "tracking", "charting": "charting", "out": "output_dir", "seed": "seed",
    "ratio_threshold": "ratio_threshold", "g_min": "g_min", "g_max": "g_max", "families": "families",
    "chains": "chains", "iterations": "iterations", "warmup": "warmup", "leapfrog_steps": "leapfrog_steps",
    "target_accept": "target_accept", "min_attempts": "min_attempts", "min_motions": "min_motions",
    "direction": "leaderboard_direction", "n": "n_plays", "kind": "simulate_kind", "replicates": "replicates",
    "level": "recovery_level",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snaptiming", description="Pre-snap motion timing pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML config file; flags override its keys")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--force", action="store_true", help="rerun stages even when cached")
    common.add_argument("-v", "--verbose", action="store_true")
    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument("--chains", type=int)
    sampler.add_argument("--iterations", type=int)
    sampler.add_argument("--warmup", type=int)
    sampler.add_argument("--leapfrog-steps", type=int)
    sampler.add_argument("--target-accept", type=float)

    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    p = sub.add_parser("ingest", parents=[common], help="parse tracking and charting CSVs")
    p.add_argument("--tracking", help="tracking CSV or directory of CSVs")
    p.add_argument("--charting", help="player-play charting CSV")
    p = sub.add_parser("detect", parents=[common], help="detect motion starts and snap timings")
    p.add_argument("--ratio-threshold", type=float, help="skip calibration and use this speed ratio")
    sub.add_parser("features", parents=[common], help="extract motion geometry features")
    p = sub.add_parser("cluster", parents=[common], help="select a Gaussian mixture by BIC")
    p.add_argument("--g-min", type=int)
    p.add_argument("--g-max", type=int)
    p.add_argument("--families", help="comma-separated subset of " + ",".join(FAMILIES))
    sub.add_parser("fit", parents=[common, sampler], help="fit the snap-timing model by HMC")
    p = sub.add_parser("report", parents=[common], help="posterior tables, leaderboards and havoc correlations")
    p.add_argument("--min-attempts", type=int)
    p.add_argument("--min-motions", type=int)
    p.add_argument("--direction", choices=DIRECTIONS)
    p = sub.add_parser("simulate", parents=[common], help="write a synthetic corpus with ground truth")
    p.add_argument("--kind", choices=("tracking", "model"))
    p.add_argument("--n", type=int, help="number of plays")
    p = sub.add_parser("recover", parents=[common, sampler], help="parameter-recovery experiment")
    p.add_argument("--n", type=int, help="plays per replicate")
    p.add_argument("--replicates", type=int)
    p.add_argument("--level", type=float, help="credible interval level")
    p = sub.add_parser("all", parents=[common, sampler], help="run every stage with caching")
    p.add_argument("--tracking")
    p.add_argument("--charting")
    p.add_argument("--ratio-threshold", type=float)
    p.add_argument("--g-min", type=int)
    p.add_argument("--g-max", type=int)
    p.add_argument("--families")
    p.add_argument("--min-attempts", type=int)
    p.add_argument("--min-motions", type=int)
    p.add_argument("--direction", choices=DIRECTIONS)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {key: getattr(args, flag) for flag, key in _FLAG_KEYS.items() if getattr(args, flag, None) is not None}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (SamplerError, SelectionError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (SnapTimingError, ValueError)):
        return EXIT_DATA
    if isinstance(exc, (OSError, Timeout)):
        return EXIT_IO
    return 1


def run(args: argparse.Namespace, echo: Callable[[str], None] = print) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with FileLock(str(out / ".snaptiming.lock"), timeout=0):
        ctx = RunContext(cfg, force=args.force, echo=echo)
        if args.command == "simulate":
            echo(f"simulate: {_simulate(ctx)}")
        elif args.command == "recover":
            echo(f"recover: {_recover(ctx)}")
        else:
            names = STAGES if args.command == "all" else (args.command,)
            for name in names:
                ctx.run_stage(STAGE_TABLE[name])
            if args.command == "all" and not ctx.executed:
                echo("all stages cached")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc.cause)
    except Timeout:
        print("error: output directory is locked by another run", file=sys.stderr)
        return EXIT_IO
    except (UsageError, SnapTimingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
