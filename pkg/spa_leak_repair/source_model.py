"""Lossless source model for ECMAScript, JSX and typed-dialect files.

Files are parsed with tree-sitter into a :class:`SyntaxTree` that keeps the exact original bytes. Rewriting never
reprints the tree: callers build an :class:`EditSet` of span-anchored replacements and :func:`apply_edits` splices them
into the original text, so every byte outside the edited spans survives unchanged.
"""

import difflib
import logging
from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cache, cached_property
from pathlib import PurePath

import tree_sitter_javascript as tsjavascript
import tree_sitter_typescript as tstypescript
from tree_sitter import Language, Node, Parser, Tree

logger = logging.getLogger(__name__)


class SourceDialect(StrEnum):
    """Object-language dialect, inferred from the file extension."""

    PLAIN = "plain"
    JSX = "jsx"
    TYPED = "typed"
    TYPED_JSX = "typed-jsx"

    @property
    def is_typed(self) -> bool:
        """Whether the dialect accepts type annotations and class visibility modifiers."""
        return self in (SourceDialect.TYPED, SourceDialect.TYPED_JSX)

    @classmethod
    def from_path(cls, path: str | PurePath) -> "SourceDialect":
        """Infer the dialect of a source file from its extension.

        :param str | PurePath path: Path of the source file.
        :return: The dialect for the file.
        :raises ValueError: If the extension is not a supported source extension.
        """
        suffix = PurePath(path).suffix.lower()
        if (dialect := _DIALECT_BY_SUFFIX.get(suffix)) is None:
            msg = f"Unsupported source extension: {suffix or '<none>'}"
            raise ValueError(msg)
        return dialect


_DIALECT_BY_SUFFIX = {
    ".js": SourceDialect.PLAIN,
    ".mjs": SourceDialect.PLAIN,
    ".cjs": SourceDialect.PLAIN,
    ".jsx": SourceDialect.JSX,
    ".ts": SourceDialect.TYPED,
    ".mts": SourceDialect.TYPED,
    ".cts": SourceDialect.TYPED,
    ".tsx": SourceDialect.TYPED_JSX,
}


class NodeKind(StrEnum):
    """Node kinds distinguished by detection; everything else is opaque."""

    CLASS_DECLARATION = "ClassDeclaration"
    CLASS_METHOD = "ClassMethod"
    CLASS_PROPERTY = "ClassProperty"
    DECORATOR = "Decorator"
    FUNCTION_DECLARATION = "FunctionDeclaration"
    ARROW_FUNCTION = "ArrowFunction"
    CALL_EXPRESSION = "CallExpression"
    MEMBER_EXPRESSION = "MemberExpression"
    IDENTIFIER = "Identifier"
    STRING_LITERAL = "StringLiteral"
    ASSIGNMENT_EXPRESSION = "AssignmentExpression"
    VARIABLE_DECLARATION = "VariableDeclaration"
    RETURN_STATEMENT = "ReturnStatement"
    IMPORT_DECLARATION = "ImportDeclaration"
    OPAQUE = "Opaque"


_KIND_BY_TYPE = {
    "class_declaration": NodeKind.CLASS_DECLARATION,
    "abstract_class_declaration": NodeKind.CLASS_DECLARATION,
    "class": NodeKind.CLASS_DECLARATION,
    "method_definition": NodeKind.CLASS_METHOD,
    "field_definition": NodeKind.CLASS_PROPERTY,
    "public_field_definition": NodeKind.CLASS_PROPERTY,
    "decorator": NodeKind.DECORATOR,
    "function_declaration": NodeKind.FUNCTION_DECLARATION,
    "generator_function_declaration": NodeKind.FUNCTION_DECLARATION,
    "function_expression": NodeKind.FUNCTION_DECLARATION,
    "function": NodeKind.FUNCTION_DECLARATION,
    "arrow_function": NodeKind.ARROW_FUNCTION,
    "call_expression": NodeKind.CALL_EXPRESSION,
    "member_expression": NodeKind.MEMBER_EXPRESSION,
    "identifier": NodeKind.IDENTIFIER,
    "property_identifier": NodeKind.IDENTIFIER,
    "type_identifier": NodeKind.IDENTIFIER,
    "shorthand_property_identifier": NodeKind.IDENTIFIER,
    "string": NodeKind.STRING_LITERAL,
    "assignment_expression": NodeKind.ASSIGNMENT_EXPRESSION,
    "lexical_declaration": NodeKind.VARIABLE_DECLARATION,
    "variable_declaration": NodeKind.VARIABLE_DECLARATION,
    "return_statement": NodeKind.RETURN_STATEMENT,
    "import_statement": NodeKind.IMPORT_DECLARATION,
}


class ParseError(Exception):
    """Raised when a file is not syntactically valid for its dialect."""

    def __init__(self, line: int, column: int, message: str) -> None:
        """Initialise the parse error.

        :param int line: 1-based line of the first offending token.
        :param int column: 1-based column of the first offending token.
        :param str message: Description of the problem.
        """
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class OverlapError(Exception):
    """Raised when two edits of one edit set overlap."""


@dataclass(frozen=True, order=True)
class Span:
    """Half-open byte range ``[start, end)`` with the 1-based position of its start."""

    start: int
    end: int
    line: int = field(compare=False)
    column: int = field(compare=False)

    @classmethod
    def of_node(cls, node: Node) -> "Span":
        """Build the span covered by a syntax node."""
        return cls(node.start_byte, node.end_byte, node.start_point[0] + 1, node.start_point[1] + 1)

    @classmethod
    def of_range(cls, data: bytes, start: int, end: int) -> "Span":
        """Build a span over ``data[start:end]``, computing its line and column.

        :param bytes data: The encoded file contents.
        :param int start: Start byte offset.
        :param int end: End byte offset.
        :return: The span.
        """
        if not 0 <= start <= end <= len(data):
            msg = f"Span [{start}, {end}) outside text of length {len(data)}"
            raise ValueError(msg)
        line = data.count(b"\n", 0, start) + 1
        column = start - (data.rfind(b"\n", 0, start) + 1) + 1
        return cls(start, end, line, column)

    @property
    def is_empty(self) -> bool:
        """Whether the span is zero-width."""
        return self.start == self.end

    def contains(self, other: "Span") -> bool:
        """Whether ``other`` lies entirely within this span."""
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True)
class SyntaxTree:
    """Parsed source file; ``source`` is kept verbatim and all spans index its UTF-8 encoding."""

    source: str
    dialect: SourceDialect
    tree: Tree = field(repr=False, compare=False)

    @cached_property
    def data(self) -> bytes:
        """The UTF-8 encoding of the source."""
        return self.source.encode("utf-8")

    @property
    def root(self) -> Node:
        """The root node of the tree."""
        return self.tree.root_node

    def text(self, node: Node | Span) -> str:
        """Return the exact source text of a node or span."""
        if isinstance(node, Span):
            return self.data[node.start : node.end].decode("utf-8")
        return self.data[node.start_byte : node.end_byte].decode("utf-8")

    def span(self, node: Node) -> Span:
        """Return the span of a node."""
        return Span.of_node(node)

    def span_at(self, start: int, end: int | None = None) -> Span:
        """Return the span ``[start, end)``; a missing end gives a zero-width span."""
        return Span.of_range(self.data, start, start if end is None else end)

    @staticmethod
    def kind(node: Node) -> NodeKind:
        """Map a grammar node onto a detection node kind."""
        return _KIND_BY_TYPE.get(node.type, NodeKind.OPAQUE)

    def walk(self, node: Node | None = None) -> Iterator[Node]:
        """Yield ``node`` (default: the root) and its descendants in document order."""
        stack = [self.root if node is None else node]
        while stack:
            current = stack.pop()
            yield current
            stack.extend(reversed(current.children))

    def nodes_of_kind(self, kind: NodeKind, node: Node | None = None) -> list[Node]:
        """Return every node of ``kind`` below ``node`` (default: the root), in document order."""
        return [n for n in self.walk(node) if self.kind(n) is kind]

    def render(self) -> str:
        """Render the unmodified tree back to text."""
        root = self.root
        head = self.data[: root.start_byte].decode("utf-8")
        return head + self.text(root) + self.data[root.end_byte :].decode("utf-8")

    @cached_property
    def newline(self) -> str:
        """The file's dominant line ending (ties resolve to LF)."""
        crlf = self.source.count("\r\n")
        lf = self.source.count("\n") - crlf
        return "\r\n" if crlf > lf else "\n"

    @cached_property
    def indent_unit(self) -> str:
        """The file's dominant indentation step (ties resolve to two spaces)."""
        tabbed = 0
        spaced = 0
        steps: Counter[int] = Counter()
        previous = 0
        for line in self.source.splitlines():
            stripped = line.lstrip(" \t")
            if not stripped or stripped.startswith("*"):
                continue
            leading = line[: len(line) - len(stripped)]
            if leading.startswith("\t"):
                tabbed += 1
                continue
            if leading:
                spaced += 1
            width = len(leading)
            if width > previous:
                steps[width - previous] += 1
            previous = width

        if tabbed > spaced:
            return "\t"
        if steps[4] > steps[2]:
            return " " * 4
        return " " * 2

    def line_start(self, offset: int) -> int:
        """Return the byte offset at which the line containing ``offset`` starts."""
        return self.data.rfind(b"\n", 0, offset) + 1

    def indent_at(self, offset: int) -> str:
        """Return the leading whitespace of the line containing ``offset``."""
        start = self.line_start(offset)
        end = start
        while end < len(self.data) and self.data[end] in b" \t":
            end += 1
        return self.data[start:end].decode("utf-8")


@dataclass(frozen=True)
class Edit:
    """Replace the text under ``span`` with ``replacement``; a zero-width span is a pure insertion."""

    span: Span
    replacement: str
    seq: int = 0

    @property
    def sort_key(self) -> tuple[int, int, int]:
        """Ordering key: position first, then the stable sequence number for co-located insertions."""
        return (self.span.start, self.span.end, self.seq)


class EditSet:
    """Ordered collection of edits; sequence numbers follow the order edits were added."""

    def __init__(self, edits: Iterable[Edit] = ()) -> None:
        """Initialise the edit set.

        :param Iterable[Edit] edits: Initial edits, renumbered in the given order.
        """
        self._edits: list[Edit] = []
        for edit in edits:
            self.add(edit.span, edit.replacement)

    def add(self, span: Span, replacement: str) -> Edit:
        """Append an edit and return it with its sequence number."""
        edit = Edit(span, replacement, len(self._edits))
        self._edits.append(edit)
        return edit

    def extend(self, edits: Iterable[Edit]) -> None:
        """Append edits, renumbering them after the existing ones."""
        for edit in edits:
            self.add(edit.span, edit.replacement)

    def __iter__(self) -> Iterator[Edit]:
        """Iterate over the edits in insertion order."""
        return iter(self._edits)

    def __len__(self) -> int:
        """Return the number of edits."""
        return len(self._edits)

    def __bool__(self) -> bool:
        """Whether the set holds any edit."""
        return bool(self._edits)

    def overlaps(self, span: Span) -> bool:
        """Whether ``span`` would overlap an edit already in the set."""
        return any(_overlap(edit.span, span) for edit in self._edits)


def _overlap(a: Span, b: Span) -> bool:
    if a.is_empty and b.is_empty:
        return False
    if a.is_empty:
        return b.start < a.start < b.end
    if b.is_empty:
        return a.start < b.start < a.end
    return a.start < b.end and b.start < a.end


@cache
def _language(dialect: SourceDialect) -> Language:
    match dialect:
        case SourceDialect.PLAIN | SourceDialect.JSX:
            return Language(tsjavascript.language())
        case SourceDialect.TYPED:
            return Language(tstypescript.language_typescript())
        case SourceDialect.TYPED_JSX:
            return Language(tstypescript.language_tsx())


def _first_error(node: Node) -> Node | None:
    if node.is_error or node.is_missing:
        return node
    for child in node.children:
        if child.has_error or child.is_missing:
            return _first_error(child)
    return node if node.has_error else None


def parse(text: str, dialect: SourceDialect) -> SyntaxTree:
    """Parse source text into a lossless syntax tree.

    :param str text: The file contents.
    :param SourceDialect dialect: The dialect to parse with.
    :return: The syntax tree.
    :raises ParseError: If the text is not valid for the dialect.
    """
    parser = Parser(_language(dialect))
    tree = parser.parse(text.encode("utf-8"))
    root = tree.root_node

    if root.has_error and (bad := _first_error(root)) is not None:
        line, column = bad.start_point[0] + 1, bad.start_point[1] + 1
        if bad.is_missing:
            message = f"missing {bad.type!r}"
        else:
            snippet = text.encode("utf-8")[bad.start_byte : bad.end_byte][:20].decode("utf-8", errors="replace")
            message = f"unexpected {snippet!r}" if snippet else "unexpected end of input"
        raise ParseError(line, column, message)

    return SyntaxTree(text, dialect, tree)


def apply_edits(text: str, edits: Iterable[Edit]) -> str:
    """Splice edits into ``text``; bytes outside every edited span are left untouched.

    :param str text: The original file contents.
    :param Iterable[Edit] edits: Pairwise non-overlapping edits.
    :return: The rewritten text.
    :raises OverlapError: If two edits overlap.
    :raises ValueError: If an edit lies outside the text.
    """
    data = text.encode("utf-8")
    ordered = sorted(edits, key=lambda edit: edit.sort_key)

    previous: Edit | None = None
    for edit in ordered:
        if edit.span.end > len(data):
            msg = f"Edit [{edit.span.start}, {edit.span.end}) outside text of length {len(data)}"
            raise ValueError(msg)
        if previous is not None and edit.span.start < previous.span.end:
            here, there = edit.span, previous.span
            msg = f"Edit at {here.line}:{here.column} overlaps edit at {there.line}:{there.column}"
            raise OverlapError(msg)
        if previous is None or edit.span.end >= previous.span.end:
            previous = edit

    pieces: list[bytes] = []
    position = 0
    for edit in ordered:
        pieces.append(data[position : edit.span.start])
        pieces.append(edit.replacement.encode("utf-8"))
        position = edit.span.end
    pieces.append(data[position:])
    return b"".join(pieces).decode("utf-8")


def unified_diff(before: str, after: str, path: str) -> str:
    """Render a unified diff with three lines of context.

    :param str before: Original text.
    :param str after: Rewritten text.
    :param str path: Display path used in the ``---``/``+++`` headers.
    :return: The diff, or an empty string when the texts are equal.
    """
    if before == after:
        return ""

    lines = difflib.unified_diff(
        before.splitlines(keepends=True),
        after.splitlines(keepends=True),
        fromfile=f"a/{path}",
        tofile=f"b/{path}",
        n=3,
    )
    return "".join(line if line.endswith("\n") else f"{line}\n\\ No newline at end of file\n" for line in lines)
