"""Project-level orchestration: discover files, repair each one, write results and report them."""

import json
import logging
import os
import shutil
import tempfile
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

import click

from spa_leak_repair import globs
from spa_leak_repair.components import ComponentKind, detect_components
from spa_leak_repair.patcher import OPERATOR_MODULES, OVERLAP_REASON, NamePolicy, plan_file
from spa_leak_repair.scanner import ALL_LEAK_KINDS, CleanupStatus, Fp1Scope, LeakCandidate, LeakKind, scan_component
from spa_leak_repair.source_model import OverlapError, ParseError, SourceDialect, apply_edits, parse, unified_diff

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
DEFAULT_INCLUDE = ("**/*.{js,jsx,ts,tsx}",)
DEFAULT_EXCLUDE = ("**/node_modules/**", "**/dist/**", "**/build/**", "**/*.d.ts")


class ConfigError(ValueError):
    """Raised when an engine configuration cannot be used."""


class RunMode(StrEnum):
    """What happens to repaired files."""

    WRITE = "write"
    DRY_RUN = "dry_run"
    CHECK = "check"


class FrameworkFilter(StrEnum):
    """Which component styles are detected."""

    AUTO = "auto"
    REACT = "react"
    ANGULAR = "angular"

    @property
    def kinds(self) -> frozenset[ComponentKind]:
        """Component kinds selected by the filter."""
        match self:
            case FrameworkFilter.REACT:
                return frozenset({ComponentKind.REACT_CLASS, ComponentKind.REACT_FUNCTION})
            case FrameworkFilter.ANGULAR:
                return frozenset({ComponentKind.ANGULAR_CLASS})
        return frozenset(ComponentKind)


class CandidateStatus(StrEnum):
    """Outcome of one candidate in a file report."""

    REPAIRED = "repaired"
    SKIPPED_EXISTING_CLEANUP = "skipped_existing_cleanup"
    REPORTED_ONLY = "reported_only"
    SKIPPED_OVERLAP = "skipped_overlap"


def parse_patterns(text: str) -> frozenset[LeakKind]:
    """Parse a comma-separated list of pattern names such as ``fp1,fp3a``.

    :raises ValueError: If a name is unknown or the list is empty.
    """
    names = [name for name in text.split(",") if name.strip()]
    if not names:
        msg = "No leak patterns selected"
        raise ValueError(msg)
    return frozenset(LeakKind.from_flag(name) for name in names)


@dataclass(frozen=True)
class EngineConfig:
    """Settings for one project scan."""

    root: Path = field(default_factory=Path)
    include_globs: tuple[str, ...] = DEFAULT_INCLUDE
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE
    enabled_kinds: frozenset[LeakKind] = ALL_LEAK_KINDS
    framework_filter: FrameworkFilter = FrameworkFilter.AUTO
    fp1_scope: Fp1Scope = Fp1Scope.ANGULAR_ONLY
    operator_import_path: str = "rxjs"
    mode: RunMode = RunMode.WRITE
    emit_diff: bool = False
    json_out: Path | None = None
    jobs: int = 1
    name_policy: NamePolicy = field(default_factory=NamePolicy)

    def validate(self) -> None:
        """Check the configuration.

        :raises ConfigError: If the root is not a directory, a glob is invalid, the operator module is unknown or the
            worker count is not positive.
        """
        if not self.root.is_dir():
            msg = f"Project root {self.root} is not a directory"
            raise ConfigError(msg)
        for pattern in (*self.include_globs, *self.exclude_globs):
            try:
                globs.compile_glob(pattern)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        if self.operator_import_path not in OPERATOR_MODULES:
            msg = f"Unsupported operator import path {self.operator_import_path!r}"
            raise ConfigError(msg)
        if self.jobs < 1:
            msg = f"Worker count must be at least 1, got {self.jobs}"
            raise ConfigError(msg)


@dataclass(frozen=True)
class CandidateRecord:
    """One candidate as reported."""

    kind: LeakKind
    line: int
    column: int
    component: str
    binding: str
    status: CandidateStatus

    def to_dict(self) -> dict[str, Any]:
        """Serialise to the report's JSON shape."""
        return {
            "kind": self.kind.value,
            "line": self.line,
            "column": self.column,
            "component": self.component,
            "binding": self.binding,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CandidateRecord":
        """Rebuild a record from its JSON shape."""
        return cls(
            kind=LeakKind(data["kind"]),
            line=data["line"],
            column=data["column"],
            component=data["component"],
            binding=data["binding"],
            status=CandidateStatus(data["status"]),
        )


@dataclass
class FileReport:
    """Outcome for one file; ``missing_kinds`` has the kind of each candidate lacking cleanup and is not serialised."""

    path: str
    framework: list[str] = field(default_factory=list)
    candidates: list[CandidateRecord] = field(default_factory=list)
    parse_error: str | None = None
    missing_kinds: list[LeakKind] = field(default_factory=list, compare=False)

    @property
    def missing(self) -> int:
        """Number of candidates without cleanup."""
        return len(self.missing_kinds)

    @property
    def repaired(self) -> int:
        """Number of repaired candidates."""
        return sum(record.status is CandidateStatus.REPAIRED for record in self.candidates)

    def to_dict(self) -> dict[str, Any]:
        """Serialise to the report's JSON shape."""
        return {
            "path": self.path,
            "framework": self.framework,
            "candidates": [record.to_dict() for record in self.candidates],
            "parse_error": self.parse_error,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FileReport":
        """Rebuild a file report from its JSON shape."""
        return cls(
            path=data["path"],
            framework=list(data["framework"]),
            candidates=[CandidateRecord.from_dict(record) for record in data["candidates"]],
            parse_error=data["parse_error"],
        )


@dataclass
class KindTotals:
    """Per-kind counters."""

    detected: int = 0
    repaired: int = 0
    skipped: int = 0


@dataclass
class RepairReport:
    """Outcome of a project scan. Diffs are kept for display only and are not part of the report document."""

    root: str
    files: list[FileReport] = field(default_factory=list)
    totals: dict[LeakKind, KindTotals] = field(default_factory=lambda: {kind: KindTotals() for kind in LeakKind})
    errors: list[dict[str, str]] = field(default_factory=list)
    version: int = REPORT_VERSION
    diffs: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    @property
    def repaired(self) -> int:
        """Total number of repaired candidates."""
        return sum(totals.repaired for totals in self.totals.values())

    @property
    def missing(self) -> int:
        """Number of candidates that had no cleanup when scanned."""
        return sum(report.missing for report in self.files)

    def to_dict(self) -> dict[str, Any]:
        """Serialise with keys in report order."""
        return {
            "version": self.version,
            "root": self.root,
            "files": [report.to_dict() for report in self.files],
            "totals": {
                kind.value: {"detected": t.detected, "repaired": t.repaired, "skipped": t.skipped}
                for kind, t in self.totals.items()
            },
            "errors": self.errors,
        }

    def to_json(self) -> str:
        """Render the report document: indented JSON with a trailing newline."""
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RepairReport":
        """Rebuild a report from its JSON shape."""
        return cls(
            version=data["version"],
            root=data["root"],
            files=[FileReport.from_dict(report) for report in data["files"]],
            totals={LeakKind(kind): KindTotals(**counts) for kind, counts in data["totals"].items()},
            errors=[dict(error) for error in data["errors"]],
        )


def _status(candidate: LeakCandidate, repaired: set[int], skipped: dict[int, str]) -> CandidateStatus:
    match candidate.cleanup.status:
        case CleanupStatus.PRESENT:
            return CandidateStatus.SKIPPED_EXISTING_CLEANUP
        case CleanupStatus.UNREPAIRABLE:
            return CandidateStatus.REPORTED_ONLY
    if id(candidate) in repaired:
        return CandidateStatus.REPAIRED
    if skipped.get(id(candidate)) == OVERLAP_REASON:
        return CandidateStatus.SKIPPED_OVERLAP
    return CandidateStatus.REPORTED_ONLY


def _records(
    candidates: Iterable[LeakCandidate], status: Callable[[LeakCandidate], CandidateStatus]
) -> list[CandidateRecord]:
    ordered = sorted(candidates, key=lambda candidate: candidate.site.call_span.start)
    return [
        CandidateRecord(
            kind=candidate.kind,
            line=candidate.site.call_span.line,
            column=candidate.site.call_span.column,
            component=candidate.component.name,
            binding=candidate.site.binding.name or "-",
            status=status(candidate),
        )
        for candidate in ordered
    ]


def repair_file(text: str, path: str, config: EngineConfig) -> tuple[str, FileReport]:
    """Run parse, detection, scanning, planning and editing on one file.

    :param str text: The file contents.
    :param str path: Project-relative path; its suffix selects the dialect.
    :param EngineConfig config: The scan settings.
    :return: The rewritten text (``text`` itself when nothing was repaired) and the file report.
    """
    try:
        dialect = SourceDialect.from_path(path)
        tree = parse(text, dialect)
    except (ValueError, ParseError) as e:
        logger.warning("Skipping %s: %s", path, e)
        return text, FileReport(path, parse_error=str(e))

    components = detect_components(tree, config.framework_filter.kinds)
    scanned = [
        (component, scan_component(component, tree, config.enabled_kinds, config.fp1_scope))
        for component in components
    ]
    candidates = [candidate for _, found in scanned for candidate in found]
    missing = [
        (component, [c for c in found if c.cleanup.status is CleanupStatus.MISSING]) for component, found in scanned
    ]
    report = FileReport(
        path,
        framework=sorted({component.kind.value for component in components}),
        missing_kinds=[candidate.kind for _, found in missing for candidate in found],
    )

    file_plan = plan_file(
        tree, [entry for entry in missing if entry[1]], config.name_policy, config.operator_import_path
    )
    for candidate, reason in file_plan.skipped:
        logger.debug("%s: %s at line %d not repaired (%s)", path, candidate.kind, candidate.site.call_span.line, reason)

    new_text = text
    repaired = {id(candidate) for candidate in file_plan.repaired}
    skipped = {id(candidate): reason for candidate, reason in file_plan.skipped}
    if file_plan.edits:
        try:
            new_text = apply_edits(text, file_plan.edits)
            parse(new_text, dialect)
        except (OverlapError, ParseError):
            logger.exception("Discarding repairs of %s", path)
            new_text = text
            repaired = set()

    report.candidates = _records(candidates, lambda candidate: _status(candidate, repaired, skipped))
    return new_text, report


def _join(directory: str, name: str) -> str:
    return name if directory == "." else f"{directory}/{name}"


def discover_files(config: EngineConfig) -> list[Path]:
    """List files under the project root selected by the include and exclude globs, in path order."""
    found: list[tuple[str, Path]] = []
    for directory, subdirectories, filenames in os.walk(config.root):
        base = Path(directory)
        relative_dir = base.relative_to(config.root).as_posix()
        subdirectories[:] = sorted(
            name
            for name in subdirectories
            if not globs.prunes_directory(_join(relative_dir, name), config.exclude_globs)
        )
        for filename in filenames:
            relative = _join(relative_dir, filename)
            if globs.matches(relative, config.include_globs) and not globs.matches(relative, config.exclude_globs):
                found.append((relative, base / filename))

    logger.debug("Discovered %d files under %s", len(found), config.root)
    return [path for _, path in sorted(found)]


def write_atomically(path: Path, text: str) -> None:
    """Replace a file's contents through a temporary file in the same directory.

    :raises OSError: If the file cannot be written; the original is left untouched.
    """
    handle = tempfile.NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False)
    temporary = Path(handle.name)
    try:
        with handle:
            handle.write(text.encode("utf-8"))
        if path.exists():
            shutil.copymode(path, temporary)
        temporary.replace(path)
    except OSError:
        temporary.unlink(missing_ok=True)
        raise


@dataclass
class _FileOutcome:
    report: FileReport | None = None
    diff: str = ""
    error: dict[str, str] | None = None


def _process(path: Path, config: EngineConfig) -> _FileOutcome:
    relative = path.relative_to(config.root).as_posix()
    try:
        text = path.read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as e:
        logger.exception("Failed to read %s", relative)
        return _FileOutcome(error={"path": relative, "message": str(e)})

    new_text, report = repair_file(text, relative, config)
    outcome = _FileOutcome(report)
    if new_text == text:
        return outcome

    if config.mode is RunMode.WRITE:
        try:
            write_atomically(path, new_text)
        except OSError as e:
            logger.exception("Failed to write %s", relative)
            outcome.error = {"path": relative, "message": str(e)}
        else:
            logger.info("Repaired %s", relative)
    elif config.emit_diff:
        outcome.diff = unified_diff(text, new_text, relative)
    return outcome


def scan_project(config: EngineConfig) -> RepairReport:
    """Repair every selected file of a project.

    :param EngineConfig config: The scan settings.
    :return: The report, with files and errors in path order.
    :raises ConfigError: If the configuration is invalid.
    """
    config.validate()
    files = discover_files(config)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as executor:
            outcomes = list(executor.map(lambda path: _process(path, config), files))
    else:
        outcomes = [_process(path, config) for path in files]

    report = RepairReport(root=config.root.as_posix())
    for outcome in outcomes:
        if outcome.error is not None:
            report.errors.append(outcome.error)
        if outcome.report is None:
            continue
        report.files.append(outcome.report)
        if outcome.diff:
            report.diffs[outcome.report.path] = outcome.diff
        for record in outcome.report.candidates:
            totals = report.totals[record.kind]
            totals.detected += 1
            if record.status is CandidateStatus.REPAIRED:
                totals.repaired += 1
            else:
                totals.skipped += 1

    report.files.sort(key=lambda file_report: file_report.path)
    report.errors.sort(key=lambda error: error["path"])
    return report


def render_summary(report: RepairReport, *, color: bool = True) -> str:
    """Render the human-readable summary: repaired files, then the per-kind totals table."""

    def style(text: str, **styles: Any) -> str:  # noqa: ANN401
        return click.style(text, **styles) if color else text

    lines = [
        style(f"repaired {file_report.path} ({file_report.repaired})", fg="green")
        for file_report in report.files
        if file_report.repaired
    ]
    lines.append(style(f"{'Leak kind':<20}{'Detected':>10}{'Repaired':>10}{'Skipped':>10}", bold=True))
    lines += [
        f"{kind.value:<20}{totals.detected:>10}{totals.repaired:>10}{totals.skipped:>10}"
        for kind, totals in report.totals.items()
    ]

    parse_errors = sum(file_report.parse_error is not None for file_report in report.files)
    footer = f"{report.repaired} repaired"
    if parse_errors:
        footer += f", {parse_errors} unparseable"
    if report.errors:
        footer += f", {len(report.errors)} errors"
    lines.append(style(footer, bold=True))
    return "\n".join(lines) + "\n"


def emit_report(report: RepairReport, config: EngineConfig) -> None:
    """Print diffs and the summary, and write the JSON document when requested."""
    if config.emit_diff and config.mode is not RunMode.WRITE:
        for path in sorted(report.diffs):
            click.echo(report.diffs[path], nl=False)

    click.echo(render_summary(report, color="NO_COLOR" not in os.environ), nl=False)

    if config.json_out is not None:
        write_atomically(config.json_out, report.to_json())
        logger.info("Report written to %s", config.json_out)


def exit_status(report: RepairReport, config: EngineConfig) -> int:
    """Return 1 in check mode when a candidate lacks cleanup, else 0."""
    return int(config.mode is RunMode.CHECK and report.missing > 0)
