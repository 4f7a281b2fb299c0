"""Command-line entry points: project repair and corpus evaluation."""

import logging
from pathlib import Path

import click

from spa_leak_repair.engine import (
    DEFAULT_EXCLUDE,
    DEFAULT_INCLUDE,
    ConfigError,
    EngineConfig,
    FrameworkFilter,
    RunMode,
    emit_report,
    exit_status,
    parse_patterns,
    scan_project,
)
from spa_leak_repair.harness import run_corpus, summarize
from spa_leak_repair.patcher import OPERATOR_MODULES
from spa_leak_repair.scanner import Fp1Scope, LeakKind

logger = logging.getLogger(__name__)


def configure_logging(*, verbose: bool, quiet: bool) -> None:
    """Send timestamped log records to stderr at the level chosen by the flags."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(format="%(asctime)s %(message)s", datefmt="[%d-%m-%Y|%H:%M:%S]", level=level, force=True)


def _patterns(_ctx: click.Context, _param: click.Parameter, value: str) -> frozenset[LeakKind]:
    try:
        return parse_patterns(value)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("root", type=click.Path(file_okay=False, path_type=Path), default=".")
@click.option("--dry-run", "mode", flag_value=RunMode.DRY_RUN.value, help="Report and diff without writing files.")
@click.option("--check", "mode", flag_value=RunMode.CHECK.value, help="Exit with status 1 when a leak lacks cleanup.")
@click.option("--write", "mode", flag_value=RunMode.WRITE.value, default=True, hidden=True)
@click.option("--diff", "emit_diff", is_flag=True, help="Print unified diffs (with --dry-run or --check).")
@click.option("--json", "json_out", type=click.Path(dir_okay=False, path_type=Path), help="Write the JSON report here.")
@click.option(
    "--patterns",
    default="fp1,fp2,fp3a,fp3b,fp4",
    show_default=True,
    callback=_patterns,
    help="Comma-separated leak patterns to repair.",
)
@click.option("--include", multiple=True, help=f"Glob of files to scan (default {DEFAULT_INCLUDE[0]}); repeatable.")
@click.option("--exclude", multiple=True, help="Glob of files to skip (replaces the defaults); repeatable.")
@click.option(
    "--framework", type=click.Choice([f.value for f in FrameworkFilter]), default=FrameworkFilter.AUTO.value
)
@click.option("--fp1-scope", type=click.Choice([s.value for s in Fp1Scope]), default=Fp1Scope.ANGULAR_ONLY.value)
@click.option("--operator-import", type=click.Choice(OPERATOR_MODULES), default="rxjs", help="Module of takeUntil.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True, help="Files processed in parallel.")
@click.option("-v", "--verbose", is_flag=True, help="Log debug details.")
@click.option("-q", "--quiet", is_flag=True, help="Log warnings and errors only.")
@click.pass_context
def run(
    ctx: click.Context,
    root: Path,
    mode: str,
    emit_diff: bool,  # noqa: FBT001
    json_out: Path | None,
    patterns: frozenset[LeakKind],
    include: tuple[str, ...],
    exclude: tuple[str, ...],
    framework: str,
    fp1_scope: str,
    operator_import: str,
    jobs: int,
    verbose: bool,  # noqa: FBT001
    quiet: bool,  # noqa: FBT001
) -> None:
    """Repair memory leaks in the React and Angular components under ROOT."""
    configure_logging(verbose=verbose, quiet=quiet)

    config = EngineConfig(
        root=root,
        include_globs=include or DEFAULT_INCLUDE,
        exclude_globs=exclude or DEFAULT_EXCLUDE,
        enabled_kinds=patterns,
        framework_filter=FrameworkFilter(framework),
        fp1_scope=Fp1Scope(fp1_scope),
        operator_import_path=operator_import,
        mode=RunMode(mode),
        emit_diff=emit_diff,
        json_out=json_out,
        jobs=jobs,
    )
    logger.info("Scanning %s (%s)", root, config.mode)

    try:
        report = scan_project(config)
    except ConfigError as e:
        raise click.UsageError(str(e)) from e

    try:
        emit_report(report, config)
    except OSError:
        logger.exception("Failed to write report to %s", json_out)
        ctx.exit(2)

    ctx.exit(exit_status(report, config))


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("corpus_root", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("-v", "--verbose", is_flag=True, help="Log debug details.")
@click.option("-q", "--quiet", is_flag=True, help="Log warnings and errors only.")
@click.pass_context
def corpus(ctx: click.Context, corpus_root: Path, verbose: bool, quiet: bool) -> None:  # noqa: FBT001
    """Evaluate the repair engine against the labelled corpus under CORPUS_ROOT."""
    configure_logging(verbose=verbose, quiet=quiet)

    metrics = run_corpus(corpus_root)
    click.echo(summarize(metrics), nl=False)
    ctx.exit(0 if metrics.passed and not metrics.harness_errors else 1)
