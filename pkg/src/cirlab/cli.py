"""Command-line entry point: sg, stats, pipeline, train, eval, serve-review,
demo.  Every artifact-producing run writes a provenance sidecar (config hash,
seed, version) so results are reproducible from the echoed config alone."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import click

from . import __version__
from .compose.composer import ComposerConfig
from .compose.encoders import EncoderDims, ToyEncoderBackend
from .compose.model import load_checkpoint
from .core.manifest import load_manifest, manifest_stats, save_manifest, validate_finalized
from .core.tokenizer import DEFAULT_TOKENIZER
from .evaluate.harness import evaluate_model, gallery_images, model_gallery_index
from .pipeline.clients import HttpMllmClient, mock_clients
from .pipeline.runner import run_pipeline
from .pipeline.stages import PipelineConfig
from .review.store import LogicalClock, ReviewStore
from .sgparse.rule_parser import RuleParserBackend
from .train.data import prepare_split
from .train.loop import TrainConfig, run_training

_SECTION_TYPES = {
    "pipeline": PipelineConfig,
    "train": TrainConfig,
    "composer": ComposerConfig,
    "encoder": EncoderDims,
}


def _strict_build(cls, values: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise click.UsageError(f"unknown keys in [{section}]: {sorted(unknown)} (known: {sorted(known)})")
    if cls is TrainConfig and "composer" in values:
        values = dict(values)
        values["composer"] = _strict_build(ComposerConfig, values["composer"], "train.composer")
    return cls(**values)


def load_config(path: str | None, overrides: tuple[str, ...] = ()) -> dict:
    """One JSON config file with per-module sections; unknown keys rejected.
    Overrides are section.key=value strings (value parsed as JSON when
    possible)."""
    raw: dict = {}
    if path:
        raw = json.loads(Path(path).read_text("utf-8"))
        unknown = set(raw) - set(_SECTION_TYPES) - {"seed"}
        if unknown:
            raise click.UsageError(f"unknown config sections: {sorted(unknown)}")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise click.UsageError(f"override must look like section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        raw.setdefault(section, {})[key] = parsed
    return raw


def _section(config: dict, name: str, **extra):
    values = dict(config.get(name, {}))
    values.update(extra)
    return _strict_build(_SECTION_TYPES[name], values, name)


def write_provenance(out_dir: Path, command: str, config: dict, seed: int) -> None:
    canonical = json.dumps(config, sort_keys=True)
    record = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seed": seed,
        "version": __version__,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "provenance.json").write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", "utf-8")


def _fail(message: str, code: int = 1):
    click.echo(json.dumps({"error": message}), err=True)
    sys.exit(code)


@click.group()
def main():
    """Composed-image-retrieval lab."""


def entrypoint() -> None:
    """Console entry: usage errors exit 2 via click; anything else becomes a
    machine-readable error record on stderr and exit 1."""
    try:
        main.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except Exception as e:  # noqa: BLE001 - single reporting surface
        click.echo(json.dumps({"error": f"{type(e).__name__}: {e}"}), err=True)
        sys.exit(1)


@main.group()
def sg():
    """Scene-graph parsing."""


@sg.command("parse")
@click.option("--text", required=True)
@click.option("--backend", "backend_name", type=click.Choice(["rule", "external"]), default="rule")
def sg_parse(text: str, backend_name: str):
    """Parse a modification text and print the graph as JSON.

    The external backend is an adapter slot: point CIRLAB_EXTERNAL_PARSER at
    a `module:callable` that maps text to a scene-graph dict."""
    if backend_name == "rule":
        backend = RuleParserBackend()
    else:
        import importlib
        import os

        from .sgparse.rule_parser import ExternalParserBackend

        spec = os.environ.get("CIRLAB_EXTERNAL_PARSER", "")
        if ":" not in spec:
            raise click.UsageError(
                "external backend needs CIRLAB_EXTERNAL_PARSER=module:callable"
            )
        module_name, attr = spec.split(":", 1)
        fn = getattr(importlib.import_module(module_name), attr)
        backend = ExternalParserBackend(name="external", fn=fn)
    graph = backend.parse(text)
    click.echo(json.dumps(graph.to_dict(), indent=2, sort_keys=True))


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
def stats(manifest_path: str, out_path: str | None):
    """Manifest statistics: per-split counts and token-length summary."""
    m = load_manifest(manifest_path)
    report = manifest_stats(m, DEFAULT_TOKENIZER).to_dict()
    payload = json.dumps(report, sort_keys=True)
    if out_path:
        Path(out_path).write_text(payload + "\n", "utf-8")
    click.echo(payload)


def _clients_for(mode: str, seed: int, endpoints: dict[str, str] | None):
    if mode == "mock":
        return mock_clients(seed=seed)
    endpoints = endpoints or {}
    missing = [r for r in ("pair_checker", "finemt_generator", "refiner", "compressor") if r not in endpoints]
    if missing:
        raise click.UsageError(f"live clients need endpoints for: {missing}")
    return {
        role: HttpMllmClient(role=role, endpoint=url, credential_env=f"CIRLAB_{role.upper()}_TOKEN")
        for role, url in endpoints.items()
    }


@main.command()
@click.argument("stage", type=click.Choice(["select", "construct", "check", "run"]))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--set", "overrides", multiple=True, help="section.key=value override")
@click.option("--clients", "clients_mode", type=click.Choice(["mock", "live"]), default="mock")
@click.option("--seed", type=int, default=0)
@click.option("--store", "store_path", type=click.Path(), default=None)
def pipeline(stage, manifest_path, out_dir, config_path, overrides, clients_mode, seed, store_path):
    """Run the annotation pipeline (one stage or all three)."""
    config = load_config(config_path, overrides)
    pconf = _section(
        config,
        "pipeline",
        seed=seed,
        run_select=stage in ("select", "run"),
        run_construct=stage in ("construct", "run"),
        run_check=stage in ("check", "run"),
    )
    dims = _section(config, "encoder") if "encoder" in config else EncoderDims(
        channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=16
    )
    backend = ToyEncoderBackend(dims=dims, seed=seed)
    out = Path(out_dir)
    from .review.store import utc_clock

    store = ReviewStore(
        path=store_path or out / "review-log.jsonl",
        clock=LogicalClock() if clients_mode == "mock" else utc_clock,
    )
    m = load_manifest(manifest_path)
    result = run_pipeline(m, pconf, _clients_for(clients_mode, seed, config.get("endpoints")), store, backend)
    save_manifest(result.manifest, out / "manifest.jsonl")
    result.ledger.save(out / "ledger.jsonl")
    write_provenance(out, f"pipeline {stage}", config, seed)
    summary = {
        "awaiting_review": result.awaiting_review,
        "finalized": sum(1 for t in result.manifest.triplets if t.status == "finalized"),
        "discarded": sum(1 for t in result.manifest.triplets if t.status == "discarded"),
        "violations": len(validate_finalized(result.manifest)),
        "out": str(out),
    }
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--set", "overrides", multiple=True)
@click.option("--seed", type=int, default=None)
def train(manifest_path, out_dir, config_path, overrides, seed):
    """Train the composition model on a finalized manifest."""
    config = load_config(config_path, overrides)
    if seed is not None:
        config.setdefault("train", {})["seed"] = seed
    tconf = _section(config, "train")
    dims = _section(config, "encoder") if "encoder" in config else ToyEncoderBackend().dims
    backend = ToyEncoderBackend(dims=dims, seed=tconf.seed)
    m = load_manifest(manifest_path)
    result = run_training(m, tconf, RuleParserBackend(), backend, out_dir)
    write_provenance(Path(out_dir), "train", config, tconf.seed)
    click.echo(
        json.dumps(
            {
                "checkpoint": str(result.checkpoint_path),
                "metrics": str(result.metrics_path),
                "first_loss": result.first_loss,
                "final_loss": result.final_loss,
                "signature": result.signature,
            },
            sort_keys=True,
        )
    )


@main.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="test")
@click.option("--ks", default="1,5,10,50")
@click.option("--subset-ks", default="1,2,3")
@click.option("--gallery", "gallery_mode", type=click.Choice(["targets", "all"]), default="targets")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0)
def eval_cmd(checkpoint_path, manifest_path, split, ks, subset_ks, gallery_mode, out_path, seed):
    """Evaluate a checkpoint: R@K, subset recalls, and composite averages."""
    model = load_checkpoint(checkpoint_path)
    c = model.config
    backend = ToyEncoderBackend(
        dims=EncoderDims(channels=4, image_dim=c.image_dim, seq_len=16, text_dim=c.text_dim,
                         vector_dim=c.image_dim),
        seed=seed,
    )
    m = load_manifest(manifest_path)
    examples = prepare_split(m, split, RuleParserBackend(), backend)
    if not examples:
        _fail(f"no active triplets in split {split!r}")
    index = model_gallery_index(model, gallery_images(m, split, gallery_mode), backend)
    subsets = {t.id: list(t.subset_ids) for t in m.active() if t.subset_ids}
    report = evaluate_model(
        model,
        examples,
        index,
        ks=[int(k) for k in ks.split(",") if k],
        subset_ks=[int(k) for k in subset_ks.split(",") if k],
        subsets=subsets,
    )
    payload = json.dumps(report.to_dict(), sort_keys=True)
    if out_path:
        out_file = Path(out_path)
        out_file.write_text(payload + "\n", "utf-8")
        write_provenance(
            out_file.parent,
            "eval",
            {"checkpoint": checkpoint_path, "split": split, "ks": ks,
             "subset_ks": subset_ks, "gallery": gallery_mode},
            seed,
        )
    click.echo(payload)
    click.echo(report.percent_table())


@main.command("serve-review")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8099)
@click.option("--static", "static_dir", type=click.Path(), default=None)
@click.option("--auth-token", default=None)
def serve_review(store_path, manifest_path, host, port, static_dir, auth_token):
    """Serve the review queue API (and the UI when static assets exist)."""
    import uvicorn

    from .review.service import create_app

    manifest = load_manifest(manifest_path) if manifest_path else None
    store = ReviewStore(path=store_path)
    app = create_app(store, manifest=manifest, static_dir=static_dir, auth_token=auth_token)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=7)
@click.option("--steps", type=int, default=300)
def demo(out_dir, seed, steps):
    """Generate the synthetic dataset, train briefly, and report recalls."""
    from .synthetic import SyntheticSpec, build_synthetic_dataset

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec(n_images=120, n_train=150, n_test=40, seed=seed)
    m = build_synthetic_dataset(spec)
    save_manifest(m, out / "synthetic.jsonl")
    backend = ToyEncoderBackend(
        dims=EncoderDims(channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=24),
        seed=seed,
    )
    tconf = TrainConfig(steps=steps, seed=seed, batch_size=32)
    result = run_training(m, tconf, RuleParserBackend(), backend, out)
    model = load_checkpoint(result.checkpoint_path)
    examples = prepare_split(m, "test", RuleParserBackend(), backend)
    index = model_gallery_index(model, gallery_images(m, "test", "all"), backend)
    report = evaluate_model(model, examples, index, ks=(1, 5, 10), subset_ks=(1, 2, 3),
                            subsets={t.id: list(t.subset_ids) for t in m.active() if t.subset_ids})
    write_provenance(out, "demo", {"seed": seed, "steps": steps}, seed)
    click.echo(json.dumps({"train": {"first_loss": result.first_loss, "final_loss": result.final_loss},
                           "eval": report.to_dict()}, sort_keys=True))
    click.echo(report.percent_table())


if __name__ == "__main__":
    main()
