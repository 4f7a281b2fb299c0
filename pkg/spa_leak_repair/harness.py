"""Evaluation against a labelled corpus of golden transforms.

Each case directory holds ``input.<ext>``, ``expected.<ext>`` (the byte-exact golden output) and ``meta.json``::

    {"id": "...", "kinds": ["FP2_EventListener"], "framework": "ReactClass",
     "labels": [{"kind": "FP2_EventListener", "line": 7, "status": "repaired"}],
     "options": {"fp1_scope": "all-classes", "operator_import": "rxjs/operators"}}

``options`` is optional.
"""

import json
import logging
from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from spa_leak_repair.components import ComponentKind
from spa_leak_repair.engine import CandidateStatus, EngineConfig, FileReport, RunMode, discover_files, repair_file
from spa_leak_repair.scanner import Fp1Scope, LeakKind
from spa_leak_repair.source_model import ParseError, SourceDialect, parse

logger = logging.getLogger(__name__)

META_FILE = "meta.json"

Repair = Callable[[str, str, EngineConfig], tuple[str, FileReport]]
LabelKey = tuple[LeakKind, int, CandidateStatus]


class CorpusError(Exception):
    """Raised when a corpus case is malformed."""


@dataclass(frozen=True)
class CaseLabel:
    """Expected outcome of one candidate."""

    kind: LeakKind
    line: int
    status: CandidateStatus

    @property
    def is_positive(self) -> bool:
        """Whether the label marks a leak rather than an already-cleaned resource."""
        return self.status is not CandidateStatus.SKIPPED_EXISTING_CLEANUP


@dataclass(frozen=True)
class CorpusCase:
    """One labelled input with its golden output."""

    id: str
    leak_kinds: tuple[LeakKind, ...]
    framework: ComponentKind
    input_path: Path
    expected_path: Path
    labels: tuple[CaseLabel, ...] = ()
    fp1_scope: Fp1Scope = Fp1Scope.ANGULAR_ONLY
    operator_import_path: str = "rxjs"

    @classmethod
    def load(cls, directory: Path) -> "CorpusCase":
        """Read a case directory.

        :param Path directory: Directory holding the case files.
        :return: The case.
        :raises CorpusError: If a file is missing or the metadata is invalid.
        """
        inputs = sorted(directory.glob("input.*"))
        expected = sorted(directory.glob("expected.*"))
        if len(inputs) != 1 or len(expected) != 1:
            msg = f"{directory}: expected exactly one input and one expected file"
            raise CorpusError(msg)

        try:
            meta: dict[str, Any] = json.loads((directory / META_FILE).read_text(encoding="utf-8"))
            options = meta.get("options", {})
            return cls(
                id=meta["id"],
                leak_kinds=tuple(LeakKind(kind) for kind in meta["kinds"]),
                framework=ComponentKind(meta["framework"]),
                input_path=inputs[0],
                expected_path=expected[0],
                labels=tuple(
                    CaseLabel(LeakKind(label["kind"]), int(label["line"]), CandidateStatus(label["status"]))
                    for label in meta["labels"]
                ),
                fp1_scope=Fp1Scope(options.get("fp1_scope", Fp1Scope.ANGULAR_ONLY)),
                operator_import_path=options.get("operator_import", "rxjs"),
            )
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            msg = f"{directory}: invalid {META_FILE}: {e}"
            raise CorpusError(msg) from e

    def config(self) -> EngineConfig:
        """Engine settings for this case."""
        return EngineConfig(
            root=self.input_path.parent,
            fp1_scope=self.fp1_scope,
            operator_import_path=self.operator_import_path,
            mode=RunMode.DRY_RUN,
        )


@dataclass
class KindMetrics:
    """Detection counts for one leak kind."""

    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    @property
    def active(self) -> bool:
        """Whether any label or detection of this kind was seen."""
        return bool(self.true_positives or self.false_positives or self.false_negatives)

    @property
    def precision(self) -> float | None:
        """Precision, or None when nothing was detected."""
        detected = self.true_positives + self.false_positives
        return self.true_positives / detected if detected else None

    @property
    def recall(self) -> float | None:
        """Recall, or None when nothing was labelled."""
        labelled = self.true_positives + self.false_negatives
        return self.true_positives / labelled if labelled else None


@dataclass
class CorpusMetrics:
    """Results of a corpus run."""

    kinds: dict[LeakKind, KindMetrics] = field(default_factory=lambda: {kind: KindMetrics() for kind in LeakKind})
    golden_mismatches: list[str] = field(default_factory=list)
    idempotence_failures: list[str] = field(default_factory=list)
    reparse_failures: list[str] = field(default_factory=list)
    harness_errors: list[str] = field(default_factory=list)
    cases_run: int = 0

    @property
    def passed(self) -> bool:
        """Whether every tool suite passed; harness errors are reported separately."""
        perfect = all(not m.false_positives and not m.false_negatives for m in self.kinds.values())
        return perfect and not (self.golden_mismatches or self.idempotence_failures or self.reparse_failures)


def load_corpus(root: Path) -> tuple[list[CorpusCase], list[str]]:
    """Load every case under ``root``; malformed cases are returned as error messages."""
    cases: list[CorpusCase] = []
    errors: list[str] = []
    for meta in sorted(root.rglob(META_FILE)):
        try:
            cases.append(CorpusCase.load(meta.parent))
        except CorpusError as e:
            logger.warning("Skipping corpus case: %s", e)
            errors.append(str(e))
    return cases, errors


def _positives(keys: list[LabelKey]) -> Counter[LabelKey]:
    return Counter(key for key in keys if key[2] is not CandidateStatus.SKIPPED_EXISTING_CLEANUP)


def _score(metrics: CorpusMetrics, case: CorpusCase, report: FileReport) -> None:
    labelled = Counter((label.kind, label.line, label.status) for label in case.labels if label.is_positive)
    observed = _positives([(record.kind, record.line, record.status) for record in report.candidates])
    for key, count in (labelled & observed).items():
        metrics.kinds[key[0]].true_positives += count
    for key, count in (observed - labelled).items():
        metrics.kinds[key[0]].false_positives += count
    for key, count in (labelled - observed).items():
        metrics.kinds[key[0]].false_negatives += count


def _run_case(metrics: CorpusMetrics, case: CorpusCase, repair: Repair) -> None:
    try:
        text = case.input_path.read_bytes().decode("utf-8")
        expected = case.expected_path.read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as e:
        msg = f"{case.id}: {e}"
        raise CorpusError(msg) from e

    config = case.config()
    name = case.input_path.name
    output, report = repair(text, name, config)
    if report.parse_error is not None:
        msg = f"{case.id}: input does not parse: {report.parse_error}"
        raise CorpusError(msg)

    metrics.cases_run += 1
    _score(metrics, case, report)

    if output != expected:
        metrics.golden_mismatches.append(case.id)
    try:
        parse(output, SourceDialect.from_path(name))
    except ParseError:
        metrics.reparse_failures.append(case.id)

    # A second pass must change nothing and find no leak left of a kind the first pass repaired.
    second, second_report = repair(output, name, config)
    repaired_kinds = {record.kind for record in report.candidates if record.status is CandidateStatus.REPAIRED}
    if second != output or any(kind in repaired_kinds for kind in second_report.missing_kinds):
        metrics.idempotence_failures.append(case.id)


def run_corpus(corpus_root: Path, repair: Repair = repair_file) -> CorpusMetrics:
    """Run every corpus case and score it.

    Each case is checked for detection accuracy against its labels, byte equality with its golden output, validity of
    the output and idempotence: a second repair must leave the output unchanged and find no leak of a repaired kind
    still lacking cleanup.

    :param Path corpus_root: Root of the ``<kind>/<framework>/<case>`` tree.
    :param Repair repair: The per-file repair function under test.
    :return: The metrics.
    """
    cases, errors = load_corpus(corpus_root)
    metrics = CorpusMetrics(harness_errors=errors)
    for case in cases:
        try:
            _run_case(metrics, case, repair)
        except CorpusError as e:
            logger.warning("Corpus case failed to run: %s", e)
            metrics.harness_errors.append(str(e))

    logger.info("Ran %d corpus cases", metrics.cases_run)
    return metrics


def check_idempotence(project_root: Path, config: EngineConfig, repair: Repair = repair_file) -> bool:
    """Whether repairing an already-repaired project changes nothing.

    The project is repaired once in memory and then repaired again; nothing is written to disk.

    :param Path project_root: The project to check.
    :param EngineConfig config: Scan settings; the root is replaced by ``project_root``.
    :param Repair repair: The per-file repair function under test.
    :return: True when the second pass leaves every file byte-identical.
    """
    settings = replace(config, root=project_root, mode=RunMode.DRY_RUN)
    for path in discover_files(settings):
        relative = path.relative_to(project_root).as_posix()
        try:
            text = path.read_bytes().decode("utf-8")
        except (OSError, UnicodeDecodeError):
            logger.warning("Cannot read %s", relative)
            continue
        first, _ = repair(text, relative, settings)
        second, _ = repair(first, relative, settings)
        if second != first:
            logger.info("Second repair changed %s", relative)
            return False
    return True


def _ratio(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def _verdict(failures: list[str]) -> str:
    return "PASS" if not failures else f"FAIL ({', '.join(failures)})"


def summarize(metrics: CorpusMetrics) -> str:
    """Render the precision/recall table and the property-suite verdicts."""
    lines = [f"{'Leak kind':<20}{'TP':>5}{'FP':>5}{'FN':>5}{'Precision':>11}{'Recall':>8}"]
    lines += [
        f"{kind.value:<20}{m.true_positives:>5}{m.false_positives:>5}{m.false_negatives:>5}"
        f"{_ratio(m.precision):>11}{_ratio(m.recall):>8}"
        for kind, m in metrics.kinds.items()
        if m.active
    ]
    lines += [
        "",
        f"Cases run: {metrics.cases_run}",
        f"Golden transforms: {_verdict(metrics.golden_mismatches)}",
        f"Idempotence: {_verdict(metrics.idempotence_failures)}",
        f"Reparse validity: {_verdict(metrics.reparse_failures)}",
        f"Harness errors: {len(metrics.harness_errors)}",
    ]
    return "\n".join(lines) + "\n"
