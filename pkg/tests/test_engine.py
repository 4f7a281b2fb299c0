"""Unit tests for the spa_leak_repair.engine module."""

import json
import logging
import shutil
import stat
import time
from collections.abc import Generator
from pathlib import Path
from unittest.mock import MagicMock, patch

import pytest

from spa_leak_repair.engine import (
    CandidateStatus,
    ConfigError,
    EngineConfig,
    FrameworkFilter,
    RepairReport,
    RunMode,
    discover_files,
    emit_report,
    exit_status,
    parse_patterns,
    render_summary,
    repair_file,
    scan_project,
    write_atomically,
)
from spa_leak_repair.harness import CorpusCase
from spa_leak_repair.scanner import LeakKind

LABELLED_CASES = (
    "fp1/angular/bare-subscribe",
    "fp2/react_class/hashchange",
    "fp2/react_function/effect-inline",
    "fp2/react_function/outside-effect",
    "fp3a/react_class/bare-call",
    "fp3b/react_function/effect-local",
    "fp4/react_class/bare-call",
)
CLEAN_CASES = ("clean/react_class/plain-render", "clean/react_function/custom-hook", "fp1/angular/negative-takeuntil")


def leaky_widget(index: int) -> str:
    """Build a React class that leaks a listener and an interval."""
    return (
        f"class Widget{index} extends React.Component {{\n"
        "  componentDidMount() {\n"
        "    window.addEventListener('resize', this.onResize);\n"
        "    setInterval(this.tick, 1000);\n"
        "  }\n"
        "}\n"
    )


@pytest.fixture
def labelled_project(tmp_path: Path, corpus_root: Path) -> Path:
    """Fixture for a project of corpus inputs with seven labelled candidates, clean components and plain modules."""
    for case in (*LABELLED_CASES, *CLEAN_CASES):
        (source,) = (corpus_root / case).glob("input.*")
        (tmp_path / case).mkdir(parents=True)
        shutil.copyfile(source, tmp_path / case / source.name)
    (tmp_path / "lib").mkdir()
    (tmp_path / "lib" / "format.js").write_text("export const pad = (s) => s.padStart(2, '0');\n", encoding="utf-8")
    (tmp_path / "lib" / "math.ts").write_text("export const twice = (n: number): number => n * 2;\n", encoding="utf-8")
    return tmp_path


@pytest.fixture
def mock_write_atomically() -> Generator[MagicMock, None, None]:
    """Fixture to mock write_atomically."""
    with patch("spa_leak_repair.engine.write_atomically") as mock:
        yield mock


class TestParsePatterns:
    """Unit tests for the parse_patterns function."""

    def test_parse(self) -> None:
        """Test parsing a comma-separated list of pattern names."""
        assert parse_patterns("fp1, FP3a,") == {LeakKind.FP1_SUBSCRIPTION, LeakKind.FP3A_TIMEOUT}

    def test_empty(self) -> None:
        """Test that an empty list is rejected."""
        with pytest.raises(ValueError, match="No leak patterns selected"):
            parse_patterns(" , ")

    def test_unknown(self) -> None:
        """Test that an unknown name is rejected."""
        with pytest.raises(ValueError, match="Unknown leak pattern: 'fp9'"):
            parse_patterns("fp1,fp9")


class TestEngineConfig:
    """Unit tests for configuration validation."""

    def test_valid(self, project: Path) -> None:
        """Test that the default settings are valid for a directory."""
        EngineConfig(root=project).validate()

    def test_root_not_directory(self, tmp_path: Path) -> None:
        """Test that a missing root is rejected."""
        with pytest.raises(ConfigError, match="is not a directory"):
            EngineConfig(root=tmp_path / "missing").validate()

    def test_invalid_glob(self, project: Path) -> None:
        """Test that a malformed glob is rejected."""
        with pytest.raises(ConfigError, match="Unclosed"):
            EngineConfig(root=project, include_globs=("src/{a,b",)).validate()

    def test_operator_import_path(self, project: Path) -> None:
        """Test that only the RxJS entry points are accepted for the operator import."""
        EngineConfig(root=project, operator_import_path="rxjs/operators").validate()
        with pytest.raises(ConfigError, match="Unsupported operator import path"):
            EngineConfig(root=project, operator_import_path="lodash").validate()

    def test_jobs(self, project: Path) -> None:
        """Test that the worker count must be positive."""
        with pytest.raises(ConfigError, match="at least 1"):
            EngineConfig(root=project, jobs=0).validate()


class TestFrameworkFilter:
    """Unit tests for the FrameworkFilter enum."""

    def test_kinds(self) -> None:
        """Test the component kinds each filter selects."""
        assert len(FrameworkFilter.AUTO.kinds) == 3  # noqa: PLR2004
        assert len(FrameworkFilter.REACT.kinds) == 2  # noqa: PLR2004
        assert len(FrameworkFilter.ANGULAR.kinds) == 1


class TestRepairFile:
    """Unit tests for the repair_file function."""

    def test_repair(self, react_class_source: str) -> None:
        """Test repairing a single file and its report."""
        new_text, report = repair_file(react_class_source, "src/Router.jsx", EngineConfig())

        assert "componentWillUnmount() {" in new_text
        assert report.framework == ["ReactClass"]
        assert report.parse_error is None
        assert report.missing == 1
        assert report.repaired == 1
        (record,) = report.candidates
        assert (record.kind, record.line, record.column) == (LeakKind.FP2_EVENT_LISTENER, 5, 5)
        assert record.component == "Router"
        assert record.binding == "-"
        assert record.status is CandidateStatus.REPAIRED

    def test_unsupported_extension(self) -> None:
        """Test that a file of an unknown type is reported as unparseable."""
        new_text, report = repair_file("# notes\n", "notes.md", EngineConfig())

        assert new_text == "# notes\n"
        assert report.parse_error == "Unsupported source extension: .md"
        assert report.candidates == []

    def test_parse_error(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test that unparseable source is left unchanged and logged."""
        with caplog.at_level(logging.WARNING):
            new_text, report = repair_file("function (\n", "src/broken.js", EngineConfig())

        assert new_text == "function (\n"
        assert report.parse_error is not None
        assert "Skipping src/broken.js" in caplog.text

    def test_framework_filter(self, react_class_source: str) -> None:
        """Test that filtered-out component styles are not detected."""
        new_text, report = repair_file(
            react_class_source, "Router.jsx", EngineConfig(framework_filter=FrameworkFilter.ANGULAR)
        )

        assert new_text == react_class_source
        assert report.framework == []
        assert report.candidates == []

    def test_disabled_kind(self, react_class_source: str) -> None:
        """Test that disabled leak kinds are neither reported nor repaired."""
        new_text, report = repair_file(
            react_class_source, "Router.jsx", EngineConfig(enabled_kinds=frozenset({LeakKind.FP3A_TIMEOUT}))
        )

        assert new_text == react_class_source
        assert report.framework == ["ReactClass"]
        assert report.candidates == []

    def test_statuses(self) -> None:
        """Test the status of existing cleanup, a repair and a listener that cannot be repaired."""
        text = (
            "class A extends Component {\n"
            "  componentDidMount() {\n"
            "    this.timer = setTimeout(f, 1);\n"
            "    window.addEventListener('x', h.y);\n"
            "    setInterval(g, 1);\n"
            "  }\n"
            "\n"
            "  componentWillUnmount() {\n"
            "    clearTimeout(this.timer);\n"
            "  }\n"
            "}\n"
        )

        _, report = repair_file(text, "A.jsx", EngineConfig())

        assert [(record.line, record.binding, record.status) for record in report.candidates] == [
            (3, "timer", CandidateStatus.SKIPPED_EXISTING_CLEANUP),
            (4, "-", CandidateStatus.REPORTED_ONLY),
            (5, "-", CandidateStatus.REPAIRED),
        ]
        assert report.missing == 2  # noqa: PLR2004


class TestDiscoverFiles:
    """Unit tests for the discover_files function."""

    def test_default_globs(self, project: Path) -> None:
        """Test that vendored directories are excluded and files come back in path order."""
        files = discover_files(EngineConfig(root=project))

        assert [path.relative_to(project).as_posix() for path in files] == [
            "src/Router.jsx",
            "src/broken.js",
            "src/util.js",
        ]

    def test_custom_globs(self, project: Path) -> None:
        """Test that include and exclude globs replace the defaults."""
        files = discover_files(EngineConfig(root=project, include_globs=("**/*.jsx",), exclude_globs=()))

        assert [path.relative_to(project).as_posix() for path in files] == [
            "node_modules/lib/Widget.jsx",
            "src/Router.jsx",
        ]


class TestScanProject:
    """Unit tests for the scan_project function."""

    def test_write(self, project: Path) -> None:
        """Test that write mode rewrites leaking files only."""
        report = scan_project(EngineConfig(root=project))

        router = (project / "src" / "Router.jsx").read_text(encoding="utf-8")
        assert "window.removeEventListener('hashchange', this.handleHashChange);" in router
        assert (project / "src" / "util.js").read_text(encoding="utf-8") == "export const add = (a, b) => a + b;\n"
        assert [file_report.path for file_report in report.files] == ["src/Router.jsx", "src/broken.js", "src/util.js"]
        assert report.files[1].parse_error is not None
        assert report.totals[LeakKind.FP2_EVENT_LISTENER].detected == 1
        assert report.totals[LeakKind.FP2_EVENT_LISTENER].repaired == 1
        assert report.repaired == 1
        assert report.errors == []
        assert report.diffs == {}

    def test_idempotent(self, project: Path) -> None:
        """Test that a second run finds nothing left to repair."""
        scan_project(EngineConfig(root=project))
        router = (project / "src" / "Router.jsx").read_text(encoding="utf-8")

        report = scan_project(EngineConfig(root=project))

        assert (project / "src" / "Router.jsx").read_text(encoding="utf-8") == router
        assert report.repaired == 0
        assert report.files[0].candidates[0].status is CandidateStatus.SKIPPED_EXISTING_CLEANUP

    def test_dry_run_with_diff(self, project: Path, react_class_source: str) -> None:
        """Test that dry-run mode leaves files alone and keeps a diff per changed file."""
        report = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN, emit_diff=True))

        assert (project / "src" / "Router.jsx").read_text(encoding="utf-8") == react_class_source
        assert list(report.diffs) == ["src/Router.jsx"]
        assert report.diffs["src/Router.jsx"].startswith("--- a/src/Router.jsx\n+++ b/src/Router.jsx\n")
        assert report.repaired == 1

    def test_check(self, project: Path, react_class_source: str) -> None:
        """Test that check mode fails while a candidate lacks cleanup."""
        config = EngineConfig(root=project, mode=RunMode.CHECK)

        report = scan_project(config)

        assert (project / "src" / "Router.jsx").read_text(encoding="utf-8") == react_class_source
        assert exit_status(report, config) == 1

    def test_exit_status_outside_check(self, project: Path) -> None:
        """Test that only check mode reports failure."""
        config = EngineConfig(root=project, mode=RunMode.DRY_RUN)

        assert exit_status(scan_project(config), config) == 0

    def test_parallel(self, project: Path) -> None:
        """Test that worker threads produce the same report as a sequential run."""
        sequential = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))
        parallel = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN, jobs=2))

        assert parallel.to_dict() == sequential.to_dict()

    def test_undecodable_file(self, project: Path) -> None:
        """Test that a file that is not UTF-8 is recorded as an error."""
        (project / "src" / "latin.js").write_bytes(b"const s = '\xe9';\n")

        report = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))

        assert [error["path"] for error in report.errors] == ["src/latin.js"]
        assert "src/latin.js" not in [file_report.path for file_report in report.files]

    def test_invalid_config(self, tmp_path: Path) -> None:
        """Test that scanning validates the configuration first."""
        with pytest.raises(ConfigError):
            scan_project(EngineConfig(root=tmp_path / "missing"))

    def test_write_failure(
        self, project: Path, mock_write_atomically: MagicMock, caplog: pytest.LogCaptureFixture
    ) -> None:
        """Test that a file that cannot be written is recorded as an error and the scan goes on."""
        mock_write_atomically.side_effect = OSError("disk full")

        with caplog.at_level(logging.ERROR):
            report = scan_project(EngineConfig(root=project))

        mock_write_atomically.assert_called_once()
        assert report.errors == [{"path": "src/Router.jsx", "message": "disk full"}]
        assert [file_report.path for file_report in report.files] == ["src/Router.jsx", "src/broken.js", "src/util.js"]
        assert "Failed to write src/Router.jsx" in caplog.text

    def test_modes_without_writes(self, project: Path, mock_write_atomically: MagicMock) -> None:
        """Test that dry-run and check modes never write files."""
        scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))
        scan_project(EngineConfig(root=project, mode=RunMode.CHECK))

        mock_write_atomically.assert_not_called()

    def test_write_logged(self, project: Path, caplog: pytest.LogCaptureFixture) -> None:
        """Test that each rewritten file is logged."""
        with caplog.at_level(logging.INFO):
            scan_project(EngineConfig(root=project))

        assert "Repaired src/Router.jsx" in caplog.text

    def test_labelled_project(self, labelled_project: Path, corpus_root: Path) -> None:
        """Test that every planted candidate of a labelled project is found with its expected outcome."""
        expected = {
            (f"{case}/{loaded.input_path.name}", label.kind, label.line, label.status)
            for case in (*LABELLED_CASES, *CLEAN_CASES)
            for loaded in [CorpusCase.load(corpus_root / case)]
            for label in loaded.labels
        }

        report = scan_project(EngineConfig(root=labelled_project, mode=RunMode.DRY_RUN))

        assert len(report.files) == 12  # noqa: PLR2004
        assert sum(totals.detected for totals in report.totals.values()) == 7  # noqa: PLR2004
        assert {
            (file_report.path, record.kind, record.line, record.status)
            for file_report in report.files
            for record in file_report.candidates
        } == expected

    def test_throughput(self, tmp_path: Path) -> None:
        """Test that a hundred-file project with dozens of leaks is scanned and repaired within seconds."""
        for index in range(25):
            (tmp_path / f"Widget{index}.jsx").write_text(leaky_widget(index), encoding="utf-8")
        for index in range(75):
            (tmp_path / f"util{index}.js").write_text(f"export const value{index} = {index};\n", encoding="utf-8")

        start = time.perf_counter()
        report = scan_project(EngineConfig(root=tmp_path))
        elapsed = time.perf_counter() - start

        assert len(report.files) == 100  # noqa: PLR2004
        assert report.repaired == 50  # noqa: PLR2004
        assert elapsed < 5  # noqa: PLR2004


class TestRepairReport:
    """Unit tests for the report document and summary."""

    def test_json_document(self, project: Path) -> None:
        """Test the shape of the JSON document."""
        report = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))

        document = json.loads(report.to_json())

        assert list(document) == ["version", "root", "files", "totals", "errors"]
        assert document["version"] == 1
        assert document["files"][0]["candidates"] == [
            {
                "kind": "FP2_EventListener",
                "line": 5,
                "column": 5,
                "component": "Router",
                "binding": "-",
                "status": "repaired",
            }
        ]
        assert document["totals"]["FP2_EventListener"] == {"detected": 1, "repaired": 1, "skipped": 0}
        assert report.to_json().endswith("}\n")

    def test_from_dict(self, project: Path) -> None:
        """Test rebuilding a report from its document."""
        report = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))

        assert RepairReport.from_dict(json.loads(report.to_json())) == report

    def test_render_summary(self, project: Path) -> None:
        """Test the plain summary text."""
        report = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))

        summary = render_summary(report, color=False)

        lines = summary.splitlines()
        assert lines[0] == "repaired src/Router.jsx (1)"
        assert lines[1] == "Leak kind             Detected  Repaired   Skipped"
        assert "FP2_EventListener            1         1         0" in lines
        assert lines[-1] == "1 repaired, 1 unparseable"
        assert "\x1b[" not in summary

    def test_render_summary_color(self, project: Path) -> None:
        """Test that the colored summary carries ANSI styles."""
        report = scan_project(EngineConfig(root=project, mode=RunMode.DRY_RUN))

        assert "\x1b[" in render_summary(report)

    def test_emit_report(
        self, project: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test printing the diff and summary and writing the JSON document."""
        monkeypatch.setenv("NO_COLOR", "1")
        json_out = tmp_path / "report.json"
        config = EngineConfig(root=project, mode=RunMode.DRY_RUN, emit_diff=True, json_out=json_out)
        report = scan_project(config)

        emit_report(report, config)

        output = capsys.readouterr().out
        assert output.startswith("--- a/src/Router.jsx\n")
        assert output.endswith("1 repaired, 1 unparseable\n")
        assert "\x1b[" not in output
        assert json.loads(json_out.read_text(encoding="utf-8")) == report.to_dict()


class TestWriteAtomically:
    """Unit tests for the write_atomically function."""

    def test_replace(self, tmp_path: Path) -> None:
        """Test replacing a file and keeping its permissions."""
        path = tmp_path / "a.js"
        mode = 0o640
        path.write_text("old\n", encoding="utf-8")
        path.chmod(mode)

        write_atomically(path, "new é\n")

        assert path.read_bytes() == "new é\n".encode()
        assert stat.S_IMODE(path.stat().st_mode) == mode
        assert [child.name for child in tmp_path.iterdir()] == ["a.js"]

    def test_new_file(self, tmp_path: Path) -> None:
        """Test writing a file that does not exist yet."""
        path = tmp_path / "report.json"

        write_atomically(path, "{}\n")

        assert path.read_text(encoding="utf-8") == "{}\n"

    def test_failure_cleans_up(self, tmp_path: Path) -> None:
        """Test that a failed replace leaves no temporary file behind."""
        target = tmp_path / "dir"
        target.mkdir()
        (target / "child").write_text("x", encoding="utf-8")

        with pytest.raises(OSError):  # noqa: PT011
            write_atomically(target, "text")

        assert sorted(child.name for child in tmp_path.iterdir()) == ["dir"]
