"""Unit tests for the spa_leak_repair.source_model module."""

from pathlib import Path

import pytest

from spa_leak_repair.source_model import (
    Edit,
    EditSet,
    NodeKind,
    OverlapError,
    ParseError,
    SourceDialect,
    Span,
    apply_edits,
    parse,
    unified_diff,
)

HASHCHANGE_DIFF = """\
--- a/src/Router.jsx
+++ b/src/Router.jsx
@@ -12,6 +12,10 @@
   render() {
     return <div>{this.state.hash}</div>;
   }
+
+  componentWillUnmount() {
+    window.removeEventListener('hashchange', this.handleHashChange);
+  }
 }
\x20
 export default Router;
"""


def span(start: int, end: int) -> Span:
    """Build a span whose position is irrelevant to the test."""
    return Span(start, end, 1, 1)


class TestSourceDialect:
    """Unit tests for the SourceDialect enum."""

    @pytest.mark.parametrize(
        ("path", "expected"),
        [
            ("src/app.js", SourceDialect.PLAIN),
            ("src/App.jsx", SourceDialect.JSX),
            ("src/app.component.ts", SourceDialect.TYPED),
            ("src/App.TSX", SourceDialect.TYPED_JSX),
        ],
    )
    def test_from_path(self, path: str, expected: SourceDialect) -> None:
        """Test dialect inference from the file extension."""
        assert SourceDialect.from_path(path) is expected

    def test_from_path_unsupported(self) -> None:
        """Test that an unknown extension is rejected."""
        with pytest.raises(ValueError, match="Unsupported source extension: .py"):
            SourceDialect.from_path("setup.py")

    def test_is_typed(self) -> None:
        """Test which dialects accept type annotations."""
        assert SourceDialect.TYPED.is_typed
        assert SourceDialect.TYPED_JSX.is_typed
        assert not SourceDialect.PLAIN.is_typed
        assert not SourceDialect.JSX.is_typed


class TestSpan:
    """Unit tests for the Span class."""

    def test_of_range_position(self) -> None:
        """Test that line and column are 1-based and computed from the bytes."""
        result = Span.of_range(b"ab\ncd", 4, 5)

        assert (result.line, result.column) == (2, 2)

    def test_of_range_outside_text(self) -> None:
        """Test that a span past the end of the text is rejected."""
        with pytest.raises(ValueError, match="outside text"):
            Span.of_range(b"abc", 2, 4)

    def test_equality_ignores_position(self) -> None:
        """Test that spans compare by byte range only."""
        assert Span(1, 2, 1, 2) == Span(1, 2, 9, 9)

    def test_contains(self) -> None:
        """Test span containment."""
        assert span(0, 10).contains(span(2, 5))
        assert span(0, 10).contains(span(0, 10))
        assert not span(2, 5).contains(span(0, 10))


class TestParse:
    """Unit tests for parsing and the syntax tree."""

    def test_render_is_lossless(self) -> None:
        """Test that rendering an unmodified tree reproduces the text byte for byte."""
        text = "// header\r\nconst a = 1;   \r\n\r\n/* tail */\r\n"

        assert parse(text, SourceDialect.PLAIN).render() == text

    def test_parse_error(self) -> None:
        """Test that invalid source raises a positioned parse error."""
        with pytest.raises(ParseError) as excinfo:
            parse("const a = 1;\nfunction (\n", SourceDialect.PLAIN)

        assert excinfo.value.line >= 1
        assert str(excinfo.value).startswith(f"{excinfo.value.line}:{excinfo.value.column}:")

    def test_typed_syntax_needs_typed_dialect(self) -> None:
        """Test that type annotations only parse in a typed dialect."""
        text = "let count: number = 0;\n"

        parse(text, SourceDialect.TYPED)
        with pytest.raises(ParseError):
            parse(text, SourceDialect.PLAIN)

    def test_jsx(self) -> None:
        """Test that JSX parses in the JSX dialects."""
        text = "const el = <div className='a'>{value}</div>;\n"

        parse(text, SourceDialect.JSX)
        parse(text, SourceDialect.TYPED_JSX)

    def test_nodes_of_kind(self) -> None:
        """Test collecting nodes by detection kind."""
        tree = parse("a();\nb.c(d());\n", SourceDialect.PLAIN)

        calls = tree.nodes_of_kind(NodeKind.CALL_EXPRESSION)

        assert [tree.text(node) for node in calls] == ["a()", "b.c(d())", "d()"]

    def test_newline_detection(self) -> None:
        """Test that the dominant line ending is detected."""
        assert parse("a;\r\nb;\r\n", SourceDialect.PLAIN).newline == "\r\n"
        assert parse("a;\nb;\n", SourceDialect.PLAIN).newline == "\n"

    @pytest.mark.parametrize(
        ("text", "expected"),
        [
            ("if (a) {\n    b();\n    if (c) {\n        d();\n    }\n}\n", "    "),
            ("if (a) {\n\tb();\n}\n", "\t"),
            ("if (a) {\n  b();\n}\n", "  "),
            ("a();\n", "  "),
        ],
    )
    def test_indent_unit(self, text: str, expected: str) -> None:
        """Test detection of the indentation step."""
        assert parse(text, SourceDialect.PLAIN).indent_unit == expected

    def test_indent_at(self) -> None:
        """Test reading the indentation of the line holding an offset."""
        text = "if (a) {\n    b();\n}\n"
        tree = parse(text, SourceDialect.PLAIN)
        offset = text.index("b()")

        assert tree.line_start(offset) == text.index("    b()")
        assert tree.indent_at(offset) == "    "

    def test_text_uses_byte_offsets(self) -> None:
        """Test that spans index the UTF-8 encoding."""
        text = "const s = 'é'; f();\n"
        tree = parse(text, SourceDialect.PLAIN)
        call = tree.nodes_of_kind(NodeKind.CALL_EXPRESSION)[0]

        assert call.start_byte == len("const s = 'é'; ".encode())
        assert tree.text(call) == "f()"


class TestEditSet:
    """Unit tests for the EditSet class."""

    def test_sequence_numbers(self) -> None:
        """Test that sequence numbers follow insertion order."""
        edits = EditSet()
        edits.add(span(5, 5), "a")
        edits.add(span(1, 2), "b")

        assert [edit.seq for edit in edits] == [0, 1]
        assert len(edits) == 2  # noqa: PLR2004

    def test_extend_renumbers(self) -> None:
        """Test that extending renumbers edits after the existing ones."""
        edits = EditSet([Edit(span(0, 0), "x", 7)])
        edits.extend([Edit(span(1, 1), "y", 0)])

        assert [edit.seq for edit in edits] == [0, 1]

    def test_overlaps(self) -> None:
        """Test the overlap rules for replacements and insertions."""
        edits = EditSet()
        edits.add(span(2, 6), "x")
        edits.add(span(8, 8), "y")

        assert edits.overlaps(span(5, 9))
        assert edits.overlaps(span(3, 3))
        assert not edits.overlaps(span(2, 2))
        assert not edits.overlaps(span(6, 6))
        assert not edits.overlaps(span(8, 8))
        assert not edits.overlaps(span(6, 8))


class TestApplyEdits:
    """Unit tests for the apply_edits function."""

    def test_replacement_and_insertion(self) -> None:
        """Test splicing a replacement and an adjacent insertion."""
        result = apply_edits("abcdef", [Edit(span(0, 3), "X", 0), Edit(span(3, 3), "Y", 1)])

        assert result == "XYdef"

    def test_colocated_insertions_keep_sequence_order(self) -> None:
        """Test that insertions at one offset are applied in sequence order."""
        edits = EditSet()
        edits.add(span(3, 3), "1")
        edits.add(span(3, 3), "2")
        edits.add(span(0, 0), "0")

        assert apply_edits("abcdef", edits) == "0abc12def"

    def test_empty_edit_set(self) -> None:
        """Test that no edits leave the text unchanged."""
        assert apply_edits("abc\r\n", []) == "abc\r\n"

    def test_overlapping_replacements(self) -> None:
        """Test that overlapping replacements are rejected."""
        with pytest.raises(OverlapError):
            apply_edits("abcdef", [Edit(span(0, 3), "X", 0), Edit(span(2, 5), "Y", 1)])

    def test_insertion_inside_replacement(self) -> None:
        """Test that an insertion strictly inside a replacement is rejected."""
        with pytest.raises(OverlapError):
            apply_edits("abcdef", [Edit(span(0, 3), "X", 0), Edit(span(1, 1), "Y", 1)])

    def test_edit_outside_text(self) -> None:
        """Test that an edit past the end of the text is rejected."""
        with pytest.raises(ValueError, match="outside text"):
            apply_edits("abc", [Edit(span(2, 9), "X", 0)])

    def test_multibyte_text(self) -> None:
        """Test that offsets are byte offsets into the UTF-8 encoding."""
        text = "é();"
        offset = len("é()".encode())

        assert apply_edits(text, [Edit(span(offset, offset), "!", 0)]) == "é()!;"


class TestUnifiedDiff:
    """Unit tests for the unified_diff function."""

    def test_no_change(self) -> None:
        """Test that identical texts produce no diff."""
        assert unified_diff("a\n", "a\n", "x.js") == ""

    def test_change(self) -> None:
        """Test the headers and hunks of a diff."""
        result = unified_diff("a\nb\n", "a\nc\n", "src/x.js")

        assert result.startswith("--- a/src/x.js\n+++ b/src/x.js\n")
        assert "-b\n" in result
        assert "+c\n" in result

    def test_missing_final_newline(self) -> None:
        """Test that a missing trailing newline is marked."""
        result = unified_diff("a", "b", "x.js")

        assert "\\ No newline at end of file" in result

    def test_one_changed_line(self) -> None:
        """Test that one changed line gives exactly one hunk."""
        before = "".join(f"line {index}\n" for index in range(20))

        result = unified_diff(before, before.replace("line 10\n", "line ten\n"), "x.js")

        assert result.count("\n@@ ") == 1
        assert "@@ -8,7 +8,7 @@\n" in result

    def test_golden_pair(self, corpus_root: Path) -> None:
        """Test the diff of a golden corpus pair against its stored rendering."""
        case = corpus_root / "fp2" / "react_class" / "hashchange"
        before = (case / "input.jsx").read_text(encoding="utf-8")
        after = (case / "expected.jsx").read_text(encoding="utf-8")

        assert unified_diff(before, after, "src/Router.jsx") == HASHCHANGE_DIFF
