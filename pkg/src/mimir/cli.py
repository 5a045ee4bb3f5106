"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .core import GenerationConfig
from .demo import seed_demo_registry
from .errors import MimirError
from .ingest import DatasetRegistry, build_data_pool, parse_topics
from .provider import resolve_provider
from .roleplay import generate_dialogue, load_roles
from .server import TopicStore, create_app
from .trajectory import contextualize_text, run_cot, run_react, run_reflexion
from .tuning import (
    FineTuneConfig,
    emit_finetune_script,
    export_dataset,
    launch_finetune,
    load_dialogue_samples,
)
from .verify import aggregate_hallucination, extract_qa_pairs, verify_pair, write_report

DEFAULT_DATA_DIR = ".mimir"


def _split_csv(value: str | None) -> list[str]:
    if not value:
        return []
    return [part.strip() for part in value.split(",") if part.strip()]


@click.group()
@click.option("--data-dir", default=DEFAULT_DATA_DIR, show_default=True,
              help="Directory holding the registry, topics, and job records.")
@click.pass_context
def cli(ctx, data_dir):
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = Path(data_dir)


def _registry(ctx) -> DatasetRegistry:
    return DatasetRegistry(ctx.obj["data_dir"] / "registry")


def _topics(ctx) -> TopicStore:
    return TopicStore(ctx.obj["data_dir"] / "topics.json")


@cli.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--max-jobs", default=2, show_default=True)
@click.option("--ui", "ui_dir", default=None, type=click.Path(exists=True, path_type=Path),
              help="Serve the operator UI (the frontend/ directory) at /.")
@click.pass_context
def serve(ctx, port, host, max_jobs, ui_dir):
    """Run the HTTP job service."""
    import uvicorn

    app = create_app(ctx.obj["data_dir"], max_jobs=max_jobs, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


@cli.group()
def datasets():
    """Inspect and manage the dataset registry."""


@datasets.command("list")
@click.option("--query", default="", help="Name prefix filter (case-insensitive).")
@click.pass_context
def datasets_list(ctx, query):
    """List registered datasets."""
    for descriptor in _registry(ctx).search(query):
        click.echo(
            f"{descriptor.id}\t{descriptor.name}\t{descriptor.domain}\t"
            f"{descriptor.format}\t{descriptor.record_count} records"
        )


@datasets.command("seed-demo")
@click.pass_context
def datasets_seed_demo(ctx):
    """Register the bundled toy datasets."""
    ids = seed_demo_registry(_registry(ctx))
    click.echo(f"registered: {', '.join(ids)}")


@cli.group()
def ingest():
    """Bring user data into the platform."""


@ingest.command("topics")
@click.option("--file", "file_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--kind", required=True, type=click.Choice(["keyword", "sentence"]))
@click.pass_context
def ingest_topics(ctx, file_path, kind):
    """Upload a newline-delimited topic file."""
    topics = parse_topics(file_path.read_bytes(), kind)
    added = _topics(ctx).add(topics)
    click.echo(f"parsed {len(topics)} topics, added {added} new")


@cli.group()
def generate():
    """Generate instruction or trajectory datasets."""


def _entries_for_generation(ctx, datasets_csv, cap, seed, limit, include_topics=True):
    registry = _registry(ctx)
    topics = _topics(ctx).list() if include_topics else []
    pool = build_data_pool(
        topics, _split_csv(datasets_csv), registry, per_dataset_cap=cap, rng_seed=seed
    )
    entries = list(pool.entries)
    if limit is not None:
        entries = entries[:limit]
    if not entries:
        raise MimirError("data pool is empty: ingest topics or pick datasets first")
    return entries


@generate.command("dialogue")
@click.option("--rounds", required=True, type=int)
@click.option("--roles", default="", help="Comma-separated role names from the domain catalogue.")
@click.option("--datasets", default="", help="Comma-separated dataset ids.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--domain", default="medical", show_default=True)
@click.option("--temperature", default=0.1, show_default=True)
@click.option("--max-tokens", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True, help="RNG seed for sampling and role choice.")
@click.option("--cap", default=None, type=int, help="Per-dataset record cap.")
@click.option("--limit", default=None, type=int, help="Maximum samples to generate.")
@click.option("--provider", "provider_spec", default=None, help="'http' or 'echo'.")
@click.pass_context
def generate_dialogue_cmd(ctx, rounds, roles, datasets, out_path, domain, temperature,
                          max_tokens, seed, cap, limit, provider_spec):
    """Generate multi-turn role-play dialogues from the data pool."""
    entries = _entries_for_generation(ctx, datasets, cap, seed, limit)
    picked = _split_csv(roles)
    role_objects = []
    if picked:
        catalogue = {r.name: r for r in load_roles(domain)}
        unknown = [name for name in picked if name not in catalogue]
        if unknown:
            raise MimirError(f"unknown roles for domain {domain!r}: {unknown}")
        role_objects = [catalogue[name] for name in picked]
    provider = resolve_provider(provider_spec)
    config = GenerationConfig(
        rounds=rounds,
        temperature=temperature,
        max_tokens=max_tokens,
        picked_roles=tuple(picked),
        rng_seed=seed,
    )
    samples = []
    with click.progressbar(entries, label="generating dialogues") as bar:
        for i, entry in enumerate(bar):
            samples.append(
                generate_dialogue(entry, role_objects, replace(config, rng_seed=seed + i), provider)
            )
    summary = export_dataset(samples, "dialogue", out_path)
    click.echo(f"wrote {summary.count} samples to {out_path} ({summary.bytes} bytes, "
               f"digest {summary.digest[:12]})")


@generate.command("trajectory")
@click.option("--framework", default="react", show_default=True,
              type=click.Choice(["react", "cot", "reflexion"]))
@click.option("--tools", default="mock_search", show_default=True,
              help="Comma-separated tool names.")
@click.option("--datasets", default="", help="Comma-separated dataset ids.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--temperature", default=0.1, show_default=True)
@click.option("--max-tokens", default=1000, show_default=True)
@click.option("--max-steps", default=8, show_default=True)
@click.option("--max-trials", default=2, show_default=True, help="Reflexion trials.")
@click.option("--cot-template", default=None, type=click.Path(exists=True, path_type=Path),
              help="Custom CoT template file with a {question} placeholder.")
@click.option("--seed", default=0, show_default=True)
@click.option("--cap", default=None, type=int)
@click.option("--limit", default=None, type=int)
@click.option("--include-incomplete", is_flag=True, default=False)
@click.option("--provider", "provider_spec", default=None)
@click.pass_context
def generate_trajectory_cmd(ctx, framework, tools, datasets, out_path, temperature, max_tokens,
                            max_steps, max_trials, cot_template, seed, cap, limit,
                            include_incomplete, provider_spec):
    """Generate tool-use reasoning trajectories from the data pool."""
    entries = _entries_for_generation(ctx, datasets, cap, seed, limit)
    provider = resolve_provider(provider_spec)
    tool_names = _split_csv(tools)
    template_text = cot_template.read_text(encoding="utf-8") if cot_template else None
    config = GenerationConfig(
        rounds=1,
        temperature=temperature,
        max_tokens=max_tokens,
        framework=framework,
        tools=tuple(tool_names),
        rng_seed=seed,
        max_steps=max_steps,
    )
    trajectories = []
    with click.progressbar(entries, label="generating trajectories") as bar:
        for i, entry in enumerate(bar):
            sample_config = replace(config, rng_seed=seed + i)
            question = entry.seed_text
            if entry.provenance[0] == "record:raw":
                question = contextualize_text(question, provider, sample_config)
            if framework == "cot":
                trajectory = run_cot(question, provider, sample_config, template_text=template_text)
            elif framework == "reflexion":
                trajectory = run_reflexion(question, tool_names, provider, sample_config,
                                           max_trials=max_trials)
            else:
                trajectory = run_react(question, tool_names, provider, sample_config)
            trajectories.append(trajectory)
    summary = export_dataset(trajectories, "trajectory", out_path,
                             include_incomplete=include_incomplete)
    click.echo(f"wrote {summary.count} trajectories to {out_path} ({summary.bytes} bytes, "
               f"digest {summary.digest[:12]})")


@cli.command("verify")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Dialogue JSONL file to verify.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--turns", default="all", show_default=True,
              help='"all" or comma-separated assistant turn indices.')
@click.option("--provider", "provider_spec", default=None)
@click.option("--no-figure", is_flag=True, default=False, help="Skip the PNG chart.")
def verify_cmd(in_path, out_path, turns, provider_spec, no_figure):
    """Verify generated dialogues and write a hallucination report."""
    samples = load_dialogue_samples(in_path)
    provider = resolve_provider(provider_spec)
    selection: str | list[int] = "all" if turns == "all" else [int(t) for t in _split_csv(turns)]
    verdicts = []
    turn_counts = {}
    with click.progressbar(samples, label="verifying") as bar:
        for sample in bar:
            for pair in extract_qa_pairs(sample, selection):
                verdicts.append(verify_pair(pair, provider))
            turn_counts[sample.id] = sample.rounds
    report = aggregate_hallucination(verdicts, turn_counts)
    write_report(report, out_path, figure=not no_figure)
    click.echo(f"overall hallucination ratio: {report.overall:.2f}%")
    click.echo(f"report written to {out_path}" + ("" if no_figure else
               f" (figure: {Path(out_path).with_suffix('.png')})"))


@cli.group()
def finetune():
    """Emit and launch fine-tuning runs."""


@finetune.command("emit")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="JSON file with FineTuneConfig fields.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def finetune_emit(config_path, out_dir):
    """Write train_config.json and the launcher script."""
    config = FineTuneConfig.from_dict(json.loads(config_path.read_text(encoding="utf-8")))
    script = emit_finetune_script(config, out_dir)
    click.echo(f"emitted {script}")


@finetune.command("launch")
@click.option("--script", "script_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--tail", default=200, show_default=True, help="Output lines to keep.")
def finetune_launch(script_path, tail):
    """Launch an emitted training script and wait for it."""
    job = launch_finetune(script_path, tail_limit=tail)
    exit_code = job.wait()
    for line in job.output_tail():
        click.echo(line)
    if exit_code != 0:
        raise MimirError(f"trainer exited with code {exit_code}")
    click.echo("training script finished successfully")


def main(argv: list[str] | None = None) -> int:
    """Run the CLI with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (MimirError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
