# src/senres/app.py
from __future__ import annotations

import functools
import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, TypeVar

import typer

from . import __version__
from .errors import ConfigError, SenresError, EXIT_USER
from .io import (
    configure,
    emit_err,
    emit_info,
    emit_json,
    emit_out,
    emit_success,
    emit_verbose,
    heading,
    json_mode,
    render_table,
)

app = typer.Typer(add_completion=False, no_args_is_help=True,
                  help="senres: resampling augmentation and contrastive pretraining for sensor windows")
sweep = typer.Typer(help="Parameter sweeps: batch-size, resample-grid")

app.add_typer(sweep, name="sweep")

F = TypeVar("F", bound=Callable[..., Any])


# ──────────────────────────────────────────────────────────────────────────────
# helpers
# ──────────────────────────────────────────────────────────────────────────────

def _handles_errors(fn: F) -> F:
    """Map SenresError (and unreadable inputs) to `error: …` on stderr plus the exit code."""
    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except SenresError as e:
            emit_err(f"error: {e}")
            raise typer.Exit(e.exit_code)
        except FileNotFoundError as e:
            emit_err(f"error: {e.filename}: no such file")
            raise typer.Exit(EXIT_USER)
    return wrapper  # type: ignore[return-value]


def _spec_from_flags(
    kinds: List[str],
    M: Optional[int],
    N: Optional[int],
    interpolation: Optional[str],
    mode: Optional[str],
):
    """Repeated --kind flags become one spec (compose when more than one)."""
    from .augment import AugmentSpec

    specs = []
    for kind in kinds:
        params: Dict[str, Any] = {}
        if kind == "resample":
            if M is not None or N is not None:
                params["M"] = 1 if M is None else M
                params["N"] = 0 if N is None else N
            if interpolation:
                params["interpolation"] = interpolation
            if mode:
                params["mode"] = mode
        specs.append(AugmentSpec(kind, params))
    if not specs:
        return None
    return specs[0] if len(specs) == 1 else AugmentSpec.compose(*specs)


def _spec_file(path: str):
    from .augment import AugmentSpec
    from .config import load_config_file

    raw = load_config_file(path)
    if "kind" in raw:
        return AugmentSpec.from_dict(raw)
    aug = raw.get("augmentation") or {}
    for key in ("supervised", "branch2"):
        if aug.get(key):
            return AugmentSpec.from_dict(aug[key])
    raise ConfigError(f"{path}: no augmentation spec found")


def _run_config(config: Optional[str], **overrides: Any):
    from .config import load_config_file, resolve

    raw = load_config_file(config) if config else None
    cfg = resolve(raw, **overrides)
    cfg.validate_paths()
    emit_verbose(f"profile {cfg.profile}, seed {cfg.seed}, workers {cfg.workers}")
    return cfg


def _load_windows(cfg):
    """WindowSet named by the dataset section of a RunConfig."""
    from .dataset import CsvSchema, load_csv_recordings, load_ucihar, segment_recordings
    from .swnd import read_swnd
    from .synthetic import synthetic_windowset

    ds = cfg.dataset
    if ds.kind == "synthetic":
        return synthetic_windowset(seed=cfg.seed)
    if ds.path is None:
        raise ConfigError(f"dataset kind {ds.kind!r} needs a path (--data or dataset.path)")
    if ds.kind == "swnd":
        return read_swnd(ds.path)
    if ds.kind == "ucihar":
        return load_ucihar(ds.path)
    if ds.schema is None:
        raise ConfigError("csv datasets need a schema (dataset.schema)")
    recs = load_csv_recordings(ds.path, CsvSchema.load(ds.schema))
    return segment_recordings(recs, ds.window_len or 128, 0.5 if ds.overlap is None else ds.overlap)


def _encoder_from_sibling(checkpoint: Path, sha: str):
    """Encoder config recorded by the pretrain run that wrote this checkpoint, if its manifest sits next to it."""
    from .encoder import EncoderConfig
    from .manifest import RunManifest

    side = checkpoint.with_name("manifest.json")
    if not side.is_file():
        return None, None
    try:
        m = RunManifest.load(side)
    except SenresError:
        return None, None
    if sha not in m.artifacts.values():
        return None, None
    enc = (m.config.get("framework") or {}).get("encoder")
    return (EncoderConfig.from_dict(enc) if enc else None), m


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.=" else "_" for ch in name)


def _print_scores(manifest) -> None:
    from .metrics import summarize

    summary = summarize(manifest.scores)
    if json_mode():
        emit_json({"manifest": manifest.to_dict(), "summary": summary.to_dict()})
        return
    rows = [[r.repetition, r.split_seed, f"{r.macro_f1:.4f}"] for r in manifest.repetitions]
    emit_out(render_table(["rep", "split_seed", "macro_f1"], rows))
    if summary.lower is None:
        emit_out(f"macro-F1 {summary.mean:.4f}")
    else:
        emit_out(f"macro-F1 {summary.mean:.4f}  95% [{summary.lower:.4f}, {summary.upper:.4f}]  ({summary.render()})")


# ──────────────────────────────────────────────────────────────────────────────
# global options / entrypoint
# ──────────────────────────────────────────────────────────────────────────────

def _version_cb(value: bool):
    if value:
        typer.echo(f"senres {__version__}")
        raise typer.Exit()


@app.callback(invoke_without_command=True)
def _entrypoint(
    version: bool = typer.Option(
        False, "--version", "-V", help="Show version and exit", callback=_version_cb, is_eager=True
    ),
    json_out: bool = typer.Option(False, "--json", help="Emit JSON on stdout; human messages go to stderr"),
    verbose: int = typer.Option(0, "--verbose", "-v", count=True, help="-v (per-epoch), -vv (per-batch trace)"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Silence non-error human output"),
    color: Optional[str] = typer.Option(None, "--color", help="Color output: auto|always|never (default SENRES_COLOR or auto)"),
    timestamps: bool = typer.Option(False, "--timestamps", help="Prefix human messages with HH:MM:SS"),
    log_path: Optional[str] = typer.Option(None, "--log", help="Append human output to a log file"),
):
    if quiet:
        v = "quiet"
    else:
        v = "trace" if verbose >= 2 else ("verbose" if verbose == 1 else "normal")
    try:
        configure(verbosity=v, color=color, json_mode=json_out or None, timestamps=timestamps or None, log_path=log_path)
    except SenresError as e:
        emit_err(f"error: {e}")
        raise typer.Exit(e.exit_code)
    return


# ──────────────────────────────────────────────────────────────────────────────
# data commands
# ──────────────────────────────────────────────────────────────────────────────

@app.command(help="Ingest UCI-HAR or CSV recordings into a canonical SWND window file")
@_handles_errors
def ingest(
    dataset: str = typer.Option(..., "--dataset", help="ucihar | csv"),
    in_dir: str = typer.Option(..., "--in", help="Dataset directory"),
    out: str = typer.Option(..., "--out", help="Output .swnd path"),
    schema: Optional[str] = typer.Option(None, "--schema", help="CSV schema JSON (csv only)"),
    window_len: Optional[int] = typer.Option(None, "--window-len", help="Window length in samples (csv)"),
    overlap: Optional[float] = typer.Option(None, "--overlap", help="Overlap fraction in [0, 1) (csv)"),
    preset: Optional[str] = typer.Option(None, "--preset", help="Windowing preset: ucihar | motionsense | uschad"),
):
    from .dataset import WINDOWING, CsvSchema, load_csv_recordings, load_ucihar, segment_recordings
    from .swnd import write_swnd

    if not Path(in_dir).is_dir():
        raise ConfigError(f"{in_dir}: not a directory")
    if dataset == "ucihar":
        ws = load_ucihar(in_dir)
    elif dataset == "csv":
        if schema is None:
            raise ConfigError("--schema is required for --dataset csv")
        if preset is not None and preset not in WINDOWING:
            raise ConfigError(f"unknown preset {preset!r} (expected one of {', '.join(WINDOWING)})")
        wl, ov = WINDOWING[preset or "ucihar"]
        recs = load_csv_recordings(in_dir, CsvSchema.load(schema))
        ws = segment_recordings(recs, window_len or wl, ov if overlap is None else overlap, dataset=preset or "csv")
    else:
        raise ConfigError(f"unknown dataset {dataset!r} (expected ucihar or csv)")
    sha = write_swnd(ws, out)
    if json_mode():
        emit_json({"path": out, "sha256": sha, "windows": len(ws), "T": ws.T, "C": ws.C, "histogram": ws.histogram()})
        return
    emit_out(f"windows: {len(ws)} ({ws.T}×{ws.C})")
    emit_out(render_table(["class", "windows"], list(ws.histogram().items())))
    emit_success(f"wrote {out}")


@app.command(help="Write the synthetic sinusoid dataset as SWND")
@_handles_errors
def synth(
    out: str = typer.Option(..., "--out"),
    n_per_class: int = typer.Option(600, "--n-per-class"),
    length: int = typer.Option(128, "--T", help="Window length"),
    channels: int = typer.Option(6, "--C", help="Channels"),
    classes: int = typer.Option(3, "--classes"),
    noise: float = typer.Option(0.1, "--noise", help="Uniform noise half-width"),
    subjects: int = typer.Option(0, "--subjects", help="Assign round-robin subject ids 1..n"),
    seed: int = typer.Option(0, "--seed"),
):
    from .swnd import write_swnd
    from .synthetic import synthetic_windowset

    ws = synthetic_windowset(n_per_class, length, channels, classes, seed, noise=noise, subjects=subjects)
    sha = write_swnd(ws, out)
    if json_mode():
        emit_json({"path": out, "sha256": sha, "windows": len(ws), "histogram": ws.histogram()})
        return
    emit_out(f"windows: {len(ws)} ({ws.T}×{ws.C})")
    emit_success(f"wrote {out}")


@app.command(help="Augment every window of a SWND file (optionally original + k copies)")
@_handles_errors
def augment(
    in_path: str = typer.Option(..., "--in", help="Input .swnd"),
    out: str = typer.Option(..., "--out", help="Output .swnd"),
    kinds: List[str] = typer.Option([], "--kind", help="Augmentation kind (repeat to compose)", show_default=False),
    M: Optional[int] = typer.Option(None, "--M", help="Resample: inserted nodes per gap"),
    N: Optional[int] = typer.Option(None, "--N", help="Resample: downsample interval (stride N+1)"),
    interpolation: Optional[str] = typer.Option(None, "--interpolation", help="linear | lagrange | cubic_spline"),
    mode: Optional[str] = typer.Option(None, "--mode", help="Nonlinear block mode A | B"),
    times: int = typer.Option(0, "--times", help="Emit original + k augmented copies"),
    seed: int = typer.Option(0, "--seed"),
    config: Optional[str] = typer.Option(None, "--config", help="JSON AugmentSpec or run config"),
    workers: Optional[int] = typer.Option(None, "--workers"),
):
    from .augment import augment_array
    from .config import default_workers
    from .dataset import expand_training_set
    from .swnd import read_swnd, write_swnd

    spec = _spec_from_flags(kinds, M, N, interpolation, mode) or (_spec_file(config) if config else None)
    if spec is None:
        raise ConfigError("give at least one --kind or a --config with an augmentation spec")
    n_workers = workers or default_workers()
    ws = read_swnd(in_path)
    emit_verbose(f"augment {spec.describe()} over {len(ws)} windows, seed {seed}")
    if times > 0:
        res = expand_training_set(ws, spec, times, seed, workers=n_workers)
    elif times == 0:
        res = ws.with_data(augment_array(ws.data, spec, seed, 1, workers=n_workers, sample_rate_hz=ws.sample_rate_hz))
    else:
        raise ConfigError(f"--times must be >= 0, got {times}")
    sha = write_swnd(res, out)
    if json_mode():
        emit_json({"path": out, "sha256": sha, "windows": len(res), "augment": spec.to_dict()})
        return
    emit_out(f"windows: {len(res)} ({spec.describe()})")
    emit_success(f"wrote {out}")


# ──────────────────────────────────────────────────────────────────────────────
# training commands
# ──────────────────────────────────────────────────────────────────────────────

def _pretrain_into(cfg, ws, out_dir: Path, data_sha: Optional[str]):
    from .contrastive import pretrain

    out_dir.mkdir(parents=True, exist_ok=True)
    fw = cfg.framework
    if fw.checkpoint_every and not fw.checkpoint_dir:
        fw = fw.with_overrides(checkpoint_dir=str(out_dir / "checkpoints"))
    heading(f"Pretraining {fw.framework} ({len(ws)} windows, batch {fw.batch_size}, {fw.epochs} epochs)")
    res = pretrain(ws, fw)
    ckpt = out_dir / "encoder.sprm"
    manifest = res.manifest
    manifest.config["run"] = cfg.to_dict()
    manifest.artifacts[str(ckpt)] = res.params.save(ckpt)
    if data_sha:
        manifest.inputs["data_file"] = data_sha
    manifest.save(out_dir / "manifest.json")
    return ckpt, manifest, res.params


@app.command(help="Contrastive pretraining (SimCLR or MoCo) → encoder.sprm + manifest.json")
@_handles_errors
def pretrain(
    data: Optional[str] = typer.Option(None, "--data", help="Input .swnd (or dataset section of --config)"),
    out_dir: Optional[str] = typer.Option(None, "--out-dir", help="Output directory"),
    framework: Optional[str] = typer.Option(None, "--framework", help="simclr | moco"),
    profile: Optional[str] = typer.Option(None, "--profile", help="full | desk"),
    config: Optional[str] = typer.Option(None, "--config", help="Run config JSON"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    temperature: Optional[float] = typer.Option(None, "--temperature"),
    K: Optional[int] = typer.Option(None, "--K", help="MoCo queue size"),
    momentum: Optional[float] = typer.Option(None, "--momentum", help="MoCo momentum m"),
    lr: Optional[float] = typer.Option(None, "--lr"),
    view1: List[str] = typer.Option([], "--view1", help="Branch-1 kind (repeat to compose)", show_default=False),
    view2: List[str] = typer.Option([], "--view2", help="Branch-2 kind (repeat to compose)", show_default=False),
    M: Optional[int] = typer.Option(None, "--M"),
    N: Optional[int] = typer.Option(None, "--N"),
    interpolation: Optional[str] = typer.Option(None, "--interpolation"),
    mode: Optional[str] = typer.Option(None, "--mode"),
    precision: Optional[str] = typer.Option(None, "--precision", help="float64 | float32"),
    checkpoint_every: Optional[int] = typer.Option(None, "--checkpoint-every", help="Save encoder every n epochs"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers"),
):
    from .ids import digest_file

    cfg = _run_config(
        config,
        profile=profile,
        seed=seed,
        output_dir=out_dir,
        workers=workers,
        dataset={"kind": "swnd", "path": data} if data else None,
        framework={
            "framework": framework, "epochs": epochs, "batch_size": batch_size, "temperature": temperature,
            "K": K, "momentum": momentum, "lr": lr, "precision": precision, "checkpoint_every": checkpoint_every,
        },
        branch1=_spec_from_flags(view1, M, N, interpolation, mode),
        branch2=_spec_from_flags(view2, M, N, interpolation, mode),
    )
    ws = _load_windows(cfg)
    data_sha = digest_file(cfg.dataset.path) if cfg.dataset.path and Path(cfg.dataset.path).is_file() else None
    ckpt, manifest, _ = _pretrain_into(cfg, ws, Path(cfg.output_dir), data_sha)
    if json_mode():
        emit_json(manifest.to_dict())
        return
    last = next((x for x in reversed(manifest.epoch_losses) if x is not None), None)
    if last is not None:
        emit_info(f"final epoch loss {last:.5f}")
    emit_out(str(ckpt))


def _load_encoder(checkpoint: Optional[str], random_init: bool, cfg, ws):
    """(encoder params, encoder config, method hint) for linear/finetune protocols."""
    from .encoder import ModelParams, init_encoder
    from .ids import digest_file

    if random_init:
        if checkpoint:
            raise ConfigError("--checkpoint and --random-init are mutually exclusive")
        return init_encoder(cfg.encoder, ws.C, cfg.seed), cfg.encoder, "random-init"
    if checkpoint is None:
        raise ConfigError(f"{cfg.evaluation.protocol} evaluation needs --checkpoint")
    path = Path(checkpoint)
    if not path.is_file():
        raise ConfigError(f"checkpoint {checkpoint} does not exist")
    enc_cfg, origin = _encoder_from_sibling(path, digest_file(path))
    if enc_cfg is not None and enc_cfg != cfg.encoder:
        emit_verbose(f"encoder layout taken from {path.with_name('manifest.json')}")
    return ModelParams.load(path), enc_cfg or cfg.encoder, (origin.method if origin else None)


@app.command(name="eval", help="Evaluate with supervised, linear or finetune protocol over repeated splits")
@_handles_errors
def eval_cmd(
    data: Optional[str] = typer.Option(None, "--data", help="Labelled .swnd"),
    protocol: Optional[str] = typer.Option(None, "--protocol", help="supervised | linear | finetune"),
    label_fraction: Optional[float] = typer.Option(None, "--label-fraction"),
    repeats: Optional[int] = typer.Option(None, "--repeats"),
    checkpoint: Optional[str] = typer.Option(None, "--checkpoint", help="Pretrained encoder .sprm"),
    random_init: bool = typer.Option(False, "--random-init", help="Frozen randomly initialised encoder baseline"),
    profile: Optional[str] = typer.Option(None, "--profile"),
    config: Optional[str] = typer.Option(None, "--config"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    lr: Optional[float] = typer.Option(None, "--lr"),
    kinds: List[str] = typer.Option([], "--kind", help="Supervised augmentation kind (repeat to compose)", show_default=False),
    M: Optional[int] = typer.Option(None, "--M"),
    N: Optional[int] = typer.Option(None, "--N"),
    interpolation: Optional[str] = typer.Option(None, "--interpolation"),
    mode: Optional[str] = typer.Option(None, "--mode"),
    augment_times: Optional[int] = typer.Option(None, "--augment-times", help="Supervised: original + k augmented copies"),
    test_subjects: Optional[int] = typer.Option(None, "--test-subjects", help="Hold out n random subjects"),
    unstratified: bool = typer.Option(False, "--unstratified"),
    zscore: bool = typer.Option(False, "--zscore", help="Standardise channels with train statistics"),
    precision: Optional[str] = typer.Option(None, "--precision"),
    method: Optional[str] = typer.Option(None, "--method", help="Label used by `report`"),
    out: Optional[str] = typer.Option(None, "--out", help="Manifest path"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers"),
):
    from .evaluation import run_protocol

    cfg = _run_config(
        config,
        profile=profile,
        seed=seed,
        workers=workers,
        dataset={"kind": "swnd", "path": data} if data else None,
        evaluation={
            "protocol": protocol, "label_fraction": label_fraction, "repetitions": repeats, "epochs": epochs,
            "batch_size": batch_size, "lr": lr, "augment_times": augment_times, "test_subjects": test_subjects,
            "stratified": False if unstratified else None, "zscore": True if zscore else None,
            "precision": precision,
        },
        supervised_augment=_spec_from_flags(kinds, M, N, interpolation, mode),
    )
    ws = _load_windows(cfg)
    ev = cfg.evaluation
    params = None
    hint: Optional[str] = None
    if ev.protocol != "supervised":
        params, enc_cfg, hint = _load_encoder(checkpoint, random_init, cfg, ws)
        ev = ev.with_overrides(encoder=enc_cfg)
    aug = cfg.supervised_augment if ev.protocol == "supervised" else None
    if ev.protocol == "supervised" and aug is not None:
        hint = f"supervised+{aug.describe()}"
    label = method or (f"{hint}/{ev.protocol}" if hint and ev.protocol != "supervised" else hint) or ev.protocol
    heading(f"{ev.protocol} evaluation: {label}, {ev.label_fraction:g} labels, {ev.repetitions} repetition(s)")
    manifest = run_protocol(ws, ev, encoder_params=params, aug=aug, method=label,
                            extra_config={"run": cfg.to_dict()},
                            inputs={"checkpoint": params.digest()} if params is not None else None)
    path = Path(out) if out else Path(cfg.output_dir) / f"{_safe(label)}-{ev.label_fraction:g}-{manifest.run_id}.json"
    manifest.save(path)
    _print_scores(manifest)
    emit_success(f"manifest {path}")


@app.command(help="Join evaluation manifests into a method × label-fraction table with Wilcoxon verdicts")
@_handles_errors
def report(
    manifests: List[str] = typer.Argument(..., help="Evaluation manifest JSON files"),
    baseline: str = typer.Option(..., "--baseline", help="Method name to compare against"),
    alpha: float = typer.Option(0.05, "--alpha"),
):
    from .manifest import RunManifest
    from .report import build_report, render_report

    loaded = [RunManifest.load(p) for p in manifests]
    reports = build_report(loaded, baseline, alpha=alpha)
    if json_mode():
        emit_json([r.to_dict() for r in reports])
        return
    emit_out(render_report(reports))


# ──────────────────────────────────────────────────────────────────────────────
# sweeps
# ──────────────────────────────────────────────────────────────────────────────

def _parse_ints(csv: str, what: str) -> List[int]:
    try:
        vals = [int(x) for x in csv.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated integers, got {csv!r}") from None
    if not vals:
        raise ConfigError(f"{what}: empty list")
    return vals


@sweep.command("batch-size", help="Pretrain once per batch size, then evaluate each encoder")
@_handles_errors
def sweep_batch_size(
    data: Optional[str] = typer.Option(None, "--data"),
    batch_sizes: str = typer.Option("64,128,256", "--batch-sizes"),
    framework: Optional[str] = typer.Option(None, "--framework"),
    profile: Optional[str] = typer.Option(None, "--profile"),
    config: Optional[str] = typer.Option(None, "--config"),
    protocol: str = typer.Option("linear", "--protocol", help="linear | finetune"),
    label_fraction: Optional[float] = typer.Option(None, "--label-fraction"),
    repeats: Optional[int] = typer.Option(None, "--repeats"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    out_dir: Optional[str] = typer.Option(None, "--out-dir"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers"),
):
    from .evaluation import run_protocol
    from .metrics import summarize

    if protocol not in ("linear", "finetune"):
        raise ConfigError(f"batch-size sweep evaluates with linear or finetune, got {protocol!r}")
    sizes = _parse_ints(batch_sizes, "--batch-sizes")
    base = _run_config(
        config, profile=profile, seed=seed, output_dir=out_dir, workers=workers,
        dataset={"kind": "swnd", "path": data} if data else None,
        framework={"framework": framework, "epochs": epochs},
        evaluation={"protocol": protocol, "label_fraction": label_fraction, "repetitions": repeats},
    )
    ws = _load_windows(base)
    root = Path(base.output_dir)
    rows = []
    summary_out = []
    for bs in sizes:
        cfg = _run_config(
            config, profile=profile, seed=seed, output_dir=out_dir, workers=workers,
            dataset={"kind": "swnd", "path": data} if data else None,
            framework={"framework": framework, "epochs": epochs, "batch_size": bs},
            evaluation={"protocol": protocol, "label_fraction": label_fraction, "repetitions": repeats},
        )
        run_dir = root / f"bs{bs}"
        _, pre, pre_params = _pretrain_into(cfg, ws, run_dir, None)
        label = f"{cfg.framework.framework}-b{bs}"
        manifest = run_protocol(ws, cfg.evaluation, encoder_params=pre_params, method=label,
                                extra_config={"run": cfg.to_dict()})
        manifest.save(run_dir / "eval.json")
        s = summarize(manifest.scores)
        last = next((x for x in reversed(pre.epoch_losses) if x is not None), None)
        rows.append([bs, "" if last is None else f"{last:.4f}", s.render()])
        summary_out.append({"batch_size": bs, "final_loss": last, "summary": s.to_dict(),
                            "manifest": str(run_dir / "eval.json")})
    if json_mode():
        emit_json(summary_out)
        return
    emit_out(render_table(["batch", "final_loss", "macro_f1"], rows))


@sweep.command("resample-grid", help="Supervised protocol for every valid (M, N) resampling cell")
@_handles_errors
def sweep_resample_grid(
    data: Optional[str] = typer.Option(None, "--data"),
    max_m: int = typer.Option(3, "--max-m"),
    times: int = typer.Option(4, "--times", help="Augmented copies per window"),
    interpolation: Optional[str] = typer.Option(None, "--interpolation"),
    mode: Optional[str] = typer.Option(None, "--mode"),
    profile: Optional[str] = typer.Option(None, "--profile"),
    config: Optional[str] = typer.Option(None, "--config"),
    label_fraction: Optional[float] = typer.Option(None, "--label-fraction"),
    repeats: Optional[int] = typer.Option(None, "--repeats"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    out_dir: Optional[str] = typer.Option(None, "--out-dir"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers"),
):
    from .augment import resample_grid
    from .evaluation import run_protocol
    from .report import build_report, render_report

    cfg = _run_config(
        config, profile=profile, seed=seed, output_dir=out_dir, workers=workers,
        dataset={"kind": "swnd", "path": data} if data else None,
        evaluation={"protocol": "supervised", "label_fraction": label_fraction, "repetitions": repeats,
                    "epochs": epochs},
    )
    ws = _load_windows(cfg)
    root = Path(cfg.output_dir)
    manifests = []
    plain = run_protocol(ws, cfg.evaluation, method="supervised", extra_config={"run": cfg.to_dict()})
    plain.save(root / "supervised.json")
    manifests.append(plain)
    ev = cfg.evaluation.with_overrides(augment_times=times)
    for m, n in resample_grid(max_m):
        spec = _spec_from_flags(["resample"], m, n, interpolation, mode)
        label = f"resample M={m} N={n}"
        emit_info(f"cell {label}")
        manifest = run_protocol(ws, ev, aug=spec, method=label, extra_config={"run": cfg.to_dict()})
        manifest.save(root / f"resample-M{m}-N{n}.json")
        manifests.append(manifest)
    reports = build_report(manifests, "supervised")
    if json_mode():
        emit_json([r.to_dict() for r in reports])
        return
    emit_out(render_report(reports))


# ──────────────────────────────────────────────────────────────────────────────
# doctor
# ──────────────────────────────────────────────────────────────────────────────

@app.command(help="Check senres health: env, libraries, gradient self-check, bundled tests")
def doctor(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show details for all checks"),
    no_scripts: bool = typer.Option(False, "--no-scripts", help="Skip scripts/test_*.sh"),
):
    from .doctor import run as _run_doctor
    code = _run_doctor(verbose=verbose, scripts=not no_scripts)
    raise typer.Exit(code)


@app.command(name="config", help="Print the resolved run config (profile ← file ← flags) as JSON")
@_handles_errors
def config_cmd(
    config: Optional[str] = typer.Option(None, "--config"),
    profile: Optional[str] = typer.Option(None, "--profile"),
    framework: Optional[str] = typer.Option(None, "--framework"),
    seed: Optional[int] = typer.Option(None, "--seed"),
):
    cfg = _run_config(config, profile=profile, seed=seed, framework={"framework": framework})
    typer.echo(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
