"""Turn missing-cleanup leak candidates into non-overlapping source edits.

Every fix lands in the component destructor: ``componentWillUnmount`` for React classes, ``ngOnDestroy`` for Angular
classes, and the returned cleanup function of an effect for React function components. Setup sites are only rewritten
when the handle or handler has to be captured so that the destructor can reference it.
"""

import logging
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

from tree_sitter import Node

from spa_leak_repair.components import ComponentKind, EffectSite, FrameworkComponent, TeardownSite, member_name
from spa_leak_repair.scanner import (
    BLOCK_TYPES,
    FIELD_TYPES,
    RELEASERS,
    BindingKind,
    CleanupStatus,
    EnclosureKind,
    HandlerKind,
    LeakCandidate,
    LeakKind,
    declares,
    string_value,
)
from spa_leak_repair.source_model import Edit, EditSet, SyntaxTree

logger = logging.getLogger(__name__)

SUBJECT_MODULE = "rxjs"
OPERATOR_MODULES = ("rxjs", "rxjs/operators")
SUBJECT_CONSTRUCTORS = ("new Subject", "new ReplaySubject", "new BehaviorSubject")
OVERLAP_REASON = "overlap"
HANDLE_TYPES = {
    LeakKind.FP3A_TIMEOUT: "ReturnType<typeof setTimeout>",
    LeakKind.FP3B_INTERVAL: "ReturnType<typeof setInterval>",
}
HANDLER_TYPE = "(event: any) => void"


class PlanConflict(Exception):
    """Raised when a candidate's rewrite overlaps a rewrite already planned for the file."""


class RecipeNotApplicable(Exception):
    """Raised when a fix recipe cannot be applied to a candidate; the message is the skip reason."""


@dataclass(frozen=True)
class NamePolicy:
    """Base names for generated identifiers; collisions get the smallest free numeric suffix from 2."""

    notifier: str = "destroy$"
    timeout: str = "timeoutId"
    interval: str = "intervalId"
    animation_frame: str = "rafId"
    handler: str = "boundHandler"
    handler_prefix: str = "bound"

    def handle_base(self, kind: LeakKind) -> str:
        """Base name of the handle captured for a timer or frame request."""
        match kind:
            case LeakKind.FP3A_TIMEOUT:
                return self.timeout
            case LeakKind.FP3B_INTERVAL:
                return self.interval
            case LeakKind.FP4_ANIMATION_FRAME:
                return self.animation_frame
        msg = f"{kind} has no handle"
        raise ValueError(msg)

    def handler_base(self, original: str | None) -> str:
        """Base name of a hoisted listener: ``bound<OriginalName>`` or the generic handler name."""
        if not original:
            return self.handler
        return f"{self.handler_prefix}{original[0].upper()}{original[1:]}"


@dataclass(frozen=True)
class CleanupBlock:
    """Place where destructor statements are appended.

    ``opening`` and ``closing`` frame a destructor that does not exist yet (or reshape an empty one-line block); the
    statements are spliced between them at ``anchor`` by sequence order.
    """

    anchor: int
    indent: str
    site: TeardownSite | None = None
    opening: tuple[Edit, ...] = ()
    closing: tuple[Edit, ...] = ()
    created: bool = False


@dataclass
class RepairPlan:
    """Edits realising one component's fixes."""

    component: FrameworkComponent
    edits: EditSet = field(default_factory=EditSet)
    generated_names: list[tuple[str, str]] = field(default_factory=list)
    imports_needed: list[tuple[str, str]] = field(default_factory=list)
    imports_added: list[tuple[str, str]] = field(default_factory=list)
    repaired: list[LeakCandidate] = field(default_factory=list)
    skipped: list[tuple[LeakCandidate, str]] = field(default_factory=list)


@dataclass
class FilePlan:
    """Combined plans of every component in one file plus the import edits they require."""

    edits: EditSet = field(default_factory=EditSet)
    plans: list[RepairPlan] = field(default_factory=list)
    imports_added: list[tuple[str, str]] = field(default_factory=list)

    @property
    def repaired(self) -> list[LeakCandidate]:
        """Every repaired candidate of the file."""
        return [candidate for plan in self.plans for candidate in plan.repaired]

    @property
    def skipped(self) -> list[tuple[LeakCandidate, str]]:
        """Every skipped candidate of the file with its reason."""
        return [entry for plan in self.plans for entry in plan.skipped]


def fresh_identifier(base: str, component: FrameworkComponent, tree: SyntaxTree, taken: Iterable[str] = ()) -> str:
    """Return ``base`` or ``base`` with the smallest suffix from 2 that is unused in the component.

    :param str base: A valid identifier.
    :param FrameworkComponent component: The component whose text must not contain the name.
    :param SyntaxTree tree: The parsed file.
    :param Iterable[str] taken: Names already generated for this component.
    :return: The fresh identifier.
    """
    text = tree.text(component.span)
    reserved = set(taken)

    def used(name: str) -> bool:
        return name in reserved or re.search(rf"(?<![\w$]){re.escape(name)}(?![\w$])", text) is not None

    if not used(base):
        return base
    suffix = 2
    while used(f"{base}{suffix}"):
        suffix += 1
    return f"{base}{suffix}"


def _framed(
    tree: SyntaxTree, block: Node, header: str, footer: str, *, blank_line: bool = False
) -> tuple[int, str, list[Edit], list[Edit]]:
    """Compute anchor, statement indent and framing edits for appending at the end of ``block``."""
    nl = tree.newline
    open_offset = block.start_byte
    close_offset = block.end_byte - 1
    members = block.named_children

    if members:
        anchor = block.children[-2].end_byte if block.children[-1].type == "}" else members[-1].end_byte
        if tree.line_start(members[-1].start_byte) == tree.line_start(open_offset):
            indent = tree.indent_at(open_offset) + tree.indent_unit
        else:
            indent = tree.indent_at(members[-1].start_byte)
        # The closing brace shares the last member's line: move it down so appended code ends above it.
        tail: list[Edit] = []
        if block.children[-1].type == "}" and tree.line_start(close_offset) == tree.line_start(anchor):
            tail.append(Edit(tree.span_at(anchor, close_offset), f"{nl}{tree.indent_at(open_offset)}"))
        if not header:
            return anchor, indent, [], tail
        separator = nl * 2 if blank_line else nl
        opening = [Edit(tree.span_at(anchor), f"{separator}{indent}{header}")]
        closing = [Edit(tree.span_at(anchor), f"{nl}{indent}{footer}"), *tail]
        return anchor, indent + tree.indent_unit, opening, closing

    outer = tree.indent_at(open_offset)
    indent = outer + tree.indent_unit
    inner = tree.data[open_offset + 1 : close_offset]
    opening = []
    closing = []
    if b"\n" in inner:
        anchor = open_offset + 1
    else:
        anchor = close_offset
        if inner:
            opening.append(Edit(tree.span_at(open_offset + 1, close_offset), ""))
        closing.append(Edit(tree.span_at(anchor), f"{nl}{outer}"))

    if not header:
        return anchor, indent, opening, closing
    opening.append(Edit(tree.span_at(anchor), f"{nl}{indent}{header}"))
    closing.insert(0, Edit(tree.span_at(anchor), f"{nl}{indent}{footer}"))
    return anchor, indent + tree.indent_unit, opening, closing


def _append_to(tree: SyntaxTree, block: Node, site: TeardownSite | None = None) -> CleanupBlock:
    anchor, indent, opening, closing = _framed(tree, block, "", "")
    return CleanupBlock(anchor, indent, site, tuple(opening), tuple(closing))


def _first_line_indent(tree: SyntaxTree, block: Node) -> str:
    """Indentation for code placed before the first child of a non-empty block."""
    first = block.named_children[0]
    if tree.line_start(first.start_byte) == tree.line_start(block.start_byte):
        return tree.indent_at(block.start_byte) + tree.indent_unit
    return tree.indent_at(first.start_byte)


def _prepend(tree: SyntaxTree, block: Node, text: str) -> Edit:
    """Place ``text`` on its own lines before the first child of a non-empty block.

    ``text`` must already be indented with :func:`_first_line_indent` on every line after its first.
    """
    nl = tree.newline
    first = block.named_children[0]
    indent = _first_line_indent(tree, block)
    if tree.line_start(first.start_byte) == tree.line_start(block.start_byte):
        return Edit(tree.span_at(block.start_byte + 1, first.start_byte), f"{nl}{indent}{text}{nl}{indent}")
    return Edit(tree.span_at(first.start_byte), f"{text}{nl}{indent}")


def _has_bare_return(body: Node) -> bool:
    return any(
        statement.type == "return_statement" and not statement.named_children for statement in body.named_children
    )


def ensure_teardown(
    component: FrameworkComponent, tree: SyntaxTree, effect: EffectSite | None = None
) -> tuple[CleanupBlock, list[Edit]]:
    """Locate the destructor block of a component, framing a new one when it is absent.

    :param FrameworkComponent component: The component being repaired.
    :param SyntaxTree tree: The parsed file.
    :param EffectSite | None effect: For function components, the effect whose cleanup return is wanted.
    :return: The cleanup block and the edits framing it (empty when the destructor already exists).
    :raises RecipeNotApplicable: If an effect's existing cleanup cannot take more statements.
    """
    if effect is not None:
        body = effect.callback_body
        if body is None or body.type != "statement_block":
            msg = "effect callback has expression body"
            raise RecipeNotApplicable(msg)
        if effect.cleanup_return is not None:
            if not effect.cleanup_mergeable or effect.cleanup_body is None:
                msg = "cleanup return not mergeable"
                raise RecipeNotApplicable(msg)
            return _append_to(tree, effect.cleanup_body), []
        if _has_bare_return(body):
            msg = "effect returns early"
            raise RecipeNotApplicable(msg)
        anchor, indent, opening, closing = _framed(tree, body, "return () => {", "};")
        block = CleanupBlock(anchor, indent, None, tuple(opening), tuple(closing), created=True)
        return block, [*opening, *closing]

    if component.teardown is not None:
        return _append_to(tree, component.teardown.body, component.teardown), []

    if component.body is None:
        msg = "component has no body"
        raise RecipeNotApplicable(msg)
    method = component.kind.teardown_method
    anchor, indent, opening, closing = _framed(tree, component.body, f"{method}() {{", "}", blank_line=True)
    block = CleanupBlock(anchor, indent, None, tuple(opening), tuple(closing), created=True)
    return block, [*opening, *closing]


def _import_specifiers(tree: SyntaxTree, statement: Node) -> tuple[Node | None, list[tuple[str, str]]]:
    named_imports: Node | None = None
    names: list[tuple[str, str]] = []
    for clause in statement.named_children:
        if clause.type != "import_clause":
            continue
        for part in clause.named_children:
            if part.type == "identifier":
                names.append((tree.text(part), tree.text(part)))
            elif part.type == "namespace_import":
                names.extend((tree.text(n), tree.text(n)) for n in part.named_children if n.type == "identifier")
            elif part.type == "named_imports":
                named_imports = part
                for specifier in part.named_children:
                    if specifier.type != "import_specifier":
                        continue
                    name = specifier.child_by_field_name("name")
                    alias = specifier.child_by_field_name("alias")
                    if name is not None:
                        names.append((tree.text(name), tree.text(alias or name)))
    return named_imports, names


def _imports(tree: SyntaxTree) -> tuple[list[Node], set[str], dict[str, Node]]:
    imports = [node for node in tree.root.named_children if node.type == "import_statement"]
    present: set[str] = set()
    by_module: dict[str, Node] = {}
    for statement in imports:
        named_imports, names = _import_specifiers(tree, statement)
        present.update(local for _, local in names)
        source = statement.child_by_field_name("source")
        module = string_value(tree, source) if source is not None else None
        type_only = any(child.type == "type" for child in statement.children)
        if module is not None and named_imports is not None and not type_only:
            by_module.setdefault(module, named_imports)
    return imports, present, by_module


def missing_imports(tree: SyntaxTree, needed: Sequence[tuple[str, str]]) -> list[tuple[str, str]]:
    """Return the ``(module, name)`` pairs whose name is not bound by any import of the file."""
    _, present, _ = _imports(tree)
    missing: list[tuple[str, str]] = []
    for module, name in needed:
        if name not in present and (module, name) not in missing:
            missing.append((module, name))
    return missing


def ensure_imports(tree: SyntaxTree, needed: Sequence[tuple[str, str]]) -> list[Edit]:
    """Add named imports that the file does not already have.

    Names are appended to an existing named-import list from the same module, otherwise a new import line is added
    after the last import (or at the start of the file).

    :param SyntaxTree tree: The parsed file.
    :param Sequence[tuple[str, str]] needed: ``(module, name)`` pairs.
    :return: Insertion edits, in the order they must be applied.
    """
    imports, _, by_module = _imports(tree)
    if not (missing := missing_imports(tree, needed)):
        return []

    edits: list[Edit] = []
    new_lines: dict[str, list[str]] = {}
    appended: dict[str, int] = {}
    for module, name in missing:
        if (named_imports := by_module.get(module)) is None:
            new_lines.setdefault(module, []).append(name)
            continue
        specifiers = [n for n in named_imports.named_children if n.type == "import_specifier"]
        count = appended.get(module, 0)
        if specifiers:
            edits.append(Edit(tree.span_at(specifiers[-1].end_byte), f", {name}"))
        else:
            edits.append(Edit(tree.span_at(named_imports.start_byte + 1), f", {name}" if count else name))
        appended[module] = count + 1

    nl = tree.newline
    quote = "'"
    if imports and (source := imports[-1].child_by_field_name("source")) is not None:
        quote = tree.text(source)[0]
    for module, names in new_lines.items():
        line = f"import {{ {', '.join(names)} }} from {quote}{module}{quote};"
        if imports:
            edits.append(Edit(tree.span_at(imports[-1].end_byte), f"{nl}{line}"))
        else:
            gap = nl if tree.data and not tree.data.startswith((b"\n", b"\r\n")) else ""
            edits.append(Edit(tree.span_at(0), f"{line}{nl}{gap}"))

    logger.debug("Adding imports: %s", ", ".join(f"{name} from {module}" for module, name in missing))
    return edits


@dataclass
class _Recipe:
    setup: list[Edit] = field(default_factory=list)
    statements: list[str] = field(default_factory=list)
    names: list[tuple[str, str]] = field(default_factory=list)
    fields: list[str] = field(default_factory=list)


class _Planner:
    """Single-pass planner for one component."""

    def __init__(
        self,
        component: FrameworkComponent,
        tree: SyntaxTree,
        policy: NamePolicy,
        existing: EditSet,
        operator_module: str,
    ) -> None:
        self.component = component
        self.tree = tree
        self.policy = policy
        self.existing = existing
        self.operator_module = operator_module
        self.plan = RepairPlan(component)
        self.taken: list[str] = []
        self.blocks: dict[int, CleanupBlock] = {}
        self.block_statements: dict[int, list[str]] = {}
        self.notifier: str | None = None
        self.notifier_created = False
        self.fields: list[str] = []

    # Names and scopes

    def fresh(self, base: str, purpose: str, recipe: _Recipe) -> str:
        name = fresh_identifier(base, self.component, self.tree, [*self.taken, *(n for _, n in recipe.names)])
        recipe.names.append((purpose, name))
        return name

    def _top_level_names(self, block: Node) -> set[str]:
        names: set[str] = set()
        for statement in block.named_children:
            if statement.type in ("lexical_declaration", "variable_declaration"):
                for declarator in statement.named_children:
                    if declarator.type != "variable_declarator":
                        continue
                    target = declarator.child_by_field_name("name")
                    if target is not None:
                        names.update(self.tree.text(n) for n in self.tree.walk(target) if n.type == "identifier")
            elif statement.type == "function_declaration" and (target := statement.child_by_field_name("name")):
                names.add(self.tree.text(target))
        return names

    def visible_in_effect(self, effect: EffectSite, name: str) -> bool:
        """Whether ``name`` can be referenced from the effect's top level."""
        if effect.callback_body is not None and name in self._top_level_names(effect.callback_body):
            return True
        node = self.component.node
        if node is None or self.component.body is None:
            return False
        if name in self._top_level_names(self.component.body):
            return True
        parameters = node.child_by_field_name("parameters") or node.child_by_field_name("parameter")
        if parameters is not None and any(
            n.type == "identifier" and self.tree.text(n) == name for n in self.tree.walk(parameters)
        ):
            return True
        return not declares(self.tree, node, name)

    # Destructor blocks

    def cleanup_block(self, effect: EffectSite | None) -> CleanupBlock:
        key = effect.call_span.start if effect is not None else -1
        if key not in self.blocks:
            block, _ = ensure_teardown(self.component, self.tree, effect)
            self.blocks[key] = block
            self.block_statements[key] = []
        return self.blocks[key]

    # Recipes

    def _effect(self, candidate: LeakCandidate) -> EffectSite | None:
        if self.component.kind is not ComponentKind.REACT_FUNCTION:
            return None
        enclosure = candidate.site.enclosing
        if enclosure.kind is not EnclosureKind.EFFECT_CALLBACK or enclosure.effect is None:
            msg = "outside effect"
            raise RecipeNotApplicable(msg)
        return enclosure.effect

    def _capture(self, call: Node, target: str) -> list[Edit]:
        parent = call.parent
        direct = parent is not None and (
            parent.type in ("expression_statement", "variable_declarator")
            or (parent.type == "assignment_expression" and parent.child_by_field_name("right") == call)
        )
        if direct:
            return [Edit(self.tree.span_at(call.start_byte), f"{target} = ")]
        return [
            Edit(self.tree.span_at(call.start_byte), f"({target} = "),
            Edit(self.tree.span_at(call.end_byte), ")"),
        ]

    def _handle_declaration(self, kind: LeakKind, name: str, *, member: bool) -> str:
        """Declaration of a captured handle: a class field, or a ``let`` at the top of an effect."""
        typed = self.tree.dialect.is_typed
        if kind is LeakKind.FP4_ANIMATION_FRAME and typed:
            return f"private {name} = 0;" if member else f"let {name} = 0;"
        if member:
            return f"private {name}?: {HANDLE_TYPES[kind]};"
        return f"let {name}: {HANDLE_TYPES[kind]} | undefined;" if typed else f"let {name};"

    def timer_recipe(self, candidate: LeakCandidate) -> _Recipe:
        site = candidate.site
        recipe = _Recipe()
        effect = self._effect(candidate)
        call = _required(site.call, "acquisition call")

        binding = site.binding
        reference = binding.reference
        if effect is None:
            if binding.kind is not BindingKind.INSTANCE_PROPERTY:
                name = self.fresh(self.policy.handle_base(site.leak_kind), f"{site.leak_kind.flag} handle", recipe)
                recipe.setup.extend(self._capture(call, f"this.{name}"))
                if self.tree.dialect.is_typed:
                    recipe.fields.append(self._handle_declaration(site.leak_kind, name, member=True))
                reference = f"this.{name}"
        elif binding.kind is BindingKind.NONE:
            body = _required(effect.callback_body, "effect body")
            statement = site.statement
            name = self.fresh(self.policy.handle_base(site.leak_kind), f"{site.leak_kind.flag} handle", recipe)
            if (
                statement is not None
                and statement.type == "expression_statement"
                and statement.parent == body
                and statement.named_children[0] == call
            ):
                recipe.setup.append(Edit(self.tree.span_at(call.start_byte), f"const {name} = "))
            else:
                # Nested call: declare the handle at the top of the effect so the cleanup can see it.
                declaration = self._handle_declaration(site.leak_kind, name, member=False)
                recipe.setup.append(_prepend(self.tree, body, declaration))
                recipe.setup.extend(self._capture(call, name))
            reference = name
        elif binding.kind is BindingKind.LOCAL_VARIABLE and not self.visible_in_effect(effect, binding.name or ""):
            msg = "out of scope"
            raise RecipeNotApplicable(msg)

        recipe.statements.append(f"{RELEASERS[site.leak_kind]}({reference});")
        return recipe

    def _hoist(self, candidate: LeakCandidate, effect: EffectSite | None, original: str | None) -> tuple[str, _Recipe]:
        site = candidate.site
        handler = _required(site.handler, "listener handler")
        statement = site.statement
        if statement is None or statement.parent is None or statement.parent.type not in BLOCK_TYPES - {"class_body"}:
            msg = "listener not in a block"
            raise RecipeNotApplicable(msg)
        if effect is not None and statement.parent != effect.callback_body:
            msg = "out of scope"
            raise RecipeNotApplicable(msg)

        recipe = _Recipe()
        name = self.fresh(self.policy.handler_base(original), "listener handler", recipe)
        reference = name if effect is not None else f"this.{name}"
        declaration = f"const {name}" if effect is not None else reference
        indent = self.tree.indent_at(statement.start_byte)
        recipe.setup.append(
            Edit(self.tree.span_at(statement.start_byte), f"{declaration} = {handler.text};{self.tree.newline}{indent}")
        )
        recipe.setup.append(Edit(handler.span, reference))
        if effect is None and self.tree.dialect.is_typed:
            recipe.fields.append(f"private {name}!: {HANDLER_TYPE};")
        return reference, recipe

    def _bound_name(self, candidate: LeakCandidate) -> str | None:
        handler = candidate.site.handler
        if handler is None or handler.node is None:
            return None
        if handler.kind is HandlerKind.IDENTIFIER:
            return handler.text
        if handler.kind is HandlerKind.BOUND_CALL and (function := handler.node.child_by_field_name("function")):
            bound = function.child_by_field_name("object")
            if bound is not None and bound.type == "member_expression":
                prop = bound.child_by_field_name("property")
                return self.tree.text(prop) if prop is not None else None
            if bound is not None and bound.type == "identifier":
                return self.tree.text(bound)
        return None

    def listener_recipe(self, candidate: LeakCandidate) -> _Recipe:
        site = candidate.site
        handler = _required(site.handler, "listener handler")
        effect = self._effect(candidate)
        call = _required(site.call, "acquisition call")

        if effect is not None and site.target_text and "." not in site.target_text:
            if not self.visible_in_effect(effect, site.target_text):
                msg = "out of scope"
                raise RecipeNotApplicable(msg)

        match handler.kind:
            case HandlerKind.OTHER:
                msg = "unsupported handler"
                raise RecipeNotApplicable(msg)
            case HandlerKind.THIS_MEMBER:
                reference, recipe = handler.text, _Recipe()
            case HandlerKind.IDENTIFIER:
                local = (
                    not self.visible_in_effect(effect, handler.text)
                    if effect is not None
                    else (method := _method_of(call)) is not None and declares(self.tree, method, handler.text)
                )
                if local and effect is not None:
                    msg = "out of scope"
                    raise RecipeNotApplicable(msg)
                if local:
                    reference, recipe = self._hoist(candidate, effect, handler.text)
                else:
                    reference, recipe = handler.text, _Recipe()
            case _:
                reference, recipe = self._hoist(candidate, effect, self._bound_name(candidate))

        options = f", {site.options_text}" if site.options_text else ""
        recipe.statements.append(f"{site.target_text}.removeEventListener({site.event_text}, {reference}{options});")
        return recipe

    def _subject_members(self, body: Node) -> Iterator[tuple[str, Node]]:
        """Yield ``(name, value)`` for class fields and constructor assignments ``this.<name> = <value>``."""
        tree = self.tree
        for member in body.named_children:
            if member.type in FIELD_TYPES:
                value = member.child_by_field_name("value")
                name = member_name(tree, member)
                if value is not None and name is not None:
                    yield name, value
            elif member.type == "method_definition" and member_name(tree, member) == "constructor":
                constructor = member.child_by_field_name("body")
                for statement in constructor.named_children if constructor is not None else ():
                    if statement.type != "expression_statement" or not statement.named_children:
                        continue
                    assignment = statement.named_children[0]
                    if assignment.type != "assignment_expression":
                        continue
                    left = assignment.child_by_field_name("left")
                    value = assignment.child_by_field_name("right")
                    if left is None or value is None or left.type != "member_expression":
                        continue
                    target = left.child_by_field_name("object")
                    prop = left.child_by_field_name("property")
                    if target is not None and target.type == "this" and prop is not None:
                        yield tree.text(prop), value

    def _existing_notifier(self) -> str | None:
        tree = self.tree
        body = self.component.body
        if body is None:
            return None
        text = tree.text(body)
        for name, value in self._subject_members(body):
            if not tree.text(value).startswith(SUBJECT_CONSTRUCTORS):
                continue
            if re.search(rf"this\.{re.escape(name)}\s*\.\s*next\s*\(", text):
                return name
        return None

    def _notifier_declaration(self, name: str, recipe: _Recipe) -> None:
        tree = self.tree
        body = _required(self.component.body, "class body")
        nl = tree.newline

        if tree.dialect.is_typed:
            recipe.fields.append(f"private readonly {name} = new Subject<void>();")
            return

        assignment = f"this.{name} = new Subject();"
        for member in body.named_children:
            if member.type == "method_definition" and member_name(tree, member) == "constructor":
                constructor = _required(member.child_by_field_name("body"), "constructor body")
                statements = [s for s in constructor.named_children if s.type != "comment"]
                if statements and _is_super_call(statements[0]):
                    indent = tree.indent_at(statements[0].start_byte)
                    recipe.setup.append(Edit(tree.span_at(statements[0].end_byte), f"{nl}{indent}{assignment}"))
                elif statements:
                    recipe.setup.append(_prepend(tree, constructor, assignment))
                else:
                    anchor, inner, opening, closing = _framed(tree, constructor, "", "")
                    recipe.setup.extend([*opening, Edit(tree.span_at(anchor), f"{nl}{inner}{assignment}"), *closing])
                return

        indent = _first_line_indent(tree, body)
        unit = tree.indent_unit
        node = self.component.node
        extends = node is not None and any(child.type == "class_heritage" for child in node.children)
        lines = ["constructor() {"]
        if extends:
            lines.append(f"{indent}{unit}super(...arguments);")
        lines += [f"{indent}{unit}{assignment}", f"{indent}}}", ""]
        recipe.setup.append(_prepend(tree, body, nl.join(lines)))

    def subscription_recipe(self, candidate: LeakCandidate) -> _Recipe:
        recipe = _Recipe()
        call = _required(candidate.site.call, "acquisition call")
        function = call.child_by_field_name("function")
        receiver = function.child_by_field_name("object") if function is not None else None
        if receiver is None:
            msg = "unsupported subscription"
            raise RecipeNotApplicable(msg)

        if self.notifier is None:
            if (existing := self._existing_notifier()) is not None:
                self.notifier = existing
            else:
                self.notifier = self.fresh(self.policy.notifier, "destroy notifier", recipe)
                self._notifier_declaration(self.notifier, recipe)
                recipe.statements += [f"this.{self.notifier}.next();", f"this.{self.notifier}.complete();"]
                self.notifier_created = True
                self.plan.imports_needed.append((SUBJECT_MODULE, "Subject"))

        operator = f"takeUntil(this.{self.notifier})"
        pipe = receiver.child_by_field_name("function") if receiver.type == "call_expression" else None
        pipe_prop = None
        if pipe is not None and pipe.type == "member_expression":
            pipe_prop = pipe.child_by_field_name("property")
        arguments = receiver.child_by_field_name("arguments") if pipe_prop is not None else None
        if pipe_prop is not None and arguments is not None and self.tree.text(pipe_prop) == "pipe":
            operators = [n for n in arguments.named_children if n.type != "comment"]
            if operators:
                recipe.setup.append(Edit(self.tree.span_at(operators[-1].end_byte), f", {operator}"))
            else:
                recipe.setup.append(Edit(self.tree.span_at(arguments.start_byte + 1), operator))
        else:
            recipe.setup.append(Edit(self.tree.span_at(receiver.end_byte), f".pipe({operator})"))

        if (self.operator_module, "takeUntil") not in self.plan.imports_needed:
            self.plan.imports_needed.append((self.operator_module, "takeUntil"))
        return recipe

    # Driver

    def _conflicts(self, recipe: _Recipe) -> bool:
        pending = EditSet()
        for edit in recipe.setup:
            if self.existing.overlaps(edit.span) or self.plan.edits.overlaps(edit.span) or pending.overlaps(edit.span):
                return True
            pending.add(edit.span, edit.replacement)
        return False

    def add(self, candidate: LeakCandidate) -> None:
        notifier_state = (self.notifier, self.notifier_created, list(self.plan.imports_needed))
        try:
            if candidate.cleanup.status is not CleanupStatus.MISSING:
                msg = candidate.cleanup.reason or f"cleanup {candidate.cleanup.status.value.lower()}"
                raise RecipeNotApplicable(msg)
            effect = self._effect(candidate)
            match candidate.kind:
                case LeakKind.FP1_SUBSCRIPTION:
                    recipe = self.subscription_recipe(candidate)
                case LeakKind.FP2_EVENT_LISTENER:
                    recipe = self.listener_recipe(candidate)
                case _:
                    recipe = self.timer_recipe(candidate)
            self.cleanup_block(effect)
            if self._conflicts(recipe):
                raise PlanConflict(OVERLAP_REASON)
        except (RecipeNotApplicable, PlanConflict) as error:
            self.notifier, self.notifier_created, self.plan.imports_needed = notifier_state
            logger.debug("Skipping %s at line %d: %s", candidate.kind, candidate.site.call_span.line, error)
            self.plan.skipped.append((candidate, str(error)))
            return

        for edit in recipe.setup:
            self.plan.edits.add(edit.span, edit.replacement)
        key = effect.call_span.start if effect is not None else -1
        self.block_statements[key].extend(recipe.statements)
        self.taken.extend(name for _, name in recipe.names)
        self.fields.extend(recipe.fields)
        self.plan.generated_names.extend(recipe.names)
        self.plan.repaired.append(candidate)

    def finish(self) -> RepairPlan:
        nl = self.tree.newline
        if self.fields and self.component.body is not None:
            indent = _first_line_indent(self.tree, self.component.body)
            declarations = f"{nl}{indent}".join(self.fields)
            edit = _prepend(self.tree, self.component.body, declarations)
            self.plan.edits.add(edit.span, edit.replacement)
        for key, block in sorted(self.blocks.items()):
            statements = self.block_statements[key]
            if not statements:
                continue
            for edit in block.opening:
                self.plan.edits.add(edit.span, edit.replacement)
            for statement in statements:
                self.plan.edits.add(self.tree.span_at(block.anchor), f"{nl}{block.indent}{statement}")
            for edit in block.closing:
                self.plan.edits.add(edit.span, edit.replacement)
        return self.plan


def _required[T](value: T | None, what: str) -> T:
    if value is None:
        msg = f"missing {what}"
        raise RecipeNotApplicable(msg)
    return value


def _is_super_call(statement: Node) -> bool:
    if statement.type != "expression_statement" or not statement.named_children:
        return False
    expression = statement.named_children[0]
    function = expression.child_by_field_name("function") if expression.type == "call_expression" else None
    return function is not None and function.type == "super"


def _method_of(call: Node) -> Node | None:
    current = call.parent
    while current is not None and current.type not in FIELD_TYPES | {"method_definition"}:
        current = current.parent
    return current


def plan_repair(
    component: FrameworkComponent,
    candidates: Sequence[LeakCandidate],
    tree: SyntaxTree,
    policy: NamePolicy | None = None,
    *,
    existing: EditSet | None = None,
    operator_module: str = "rxjs",
) -> RepairPlan:
    """Plan the fixes for one component's candidates.

    Candidates are handled in source order. A candidate whose rewrite overlaps one already planned is skipped with
    reason ``overlap``; one whose recipe cannot apply is skipped with the recipe's reason.

    :param FrameworkComponent component: The component being repaired.
    :param Sequence[LeakCandidate] candidates: Its candidates; only Missing ones are repaired.
    :param SyntaxTree tree: The parsed file.
    :param NamePolicy | None policy: Base names for generated identifiers.
    :param EditSet | None existing: Edits already planned for other components of the same file.
    :param str operator_module: Module that ``takeUntil`` is imported from.
    :return: The repair plan; imports are listed in ``imports_needed`` for :func:`plan_file` to add.
    """
    planner = _Planner(component, tree, policy or NamePolicy(), existing or EditSet(), operator_module)
    for candidate in sorted(candidates, key=lambda c: c.site.call_span.start):
        planner.add(candidate)
    return planner.finish()


def plan_file(
    tree: SyntaxTree,
    candidates_by_component: Sequence[tuple[FrameworkComponent, Sequence[LeakCandidate]]],
    policy: NamePolicy | None = None,
    operator_module: str = "rxjs",
) -> FilePlan:
    """Plan every component of a file and add the imports their fixes need.

    :param SyntaxTree tree: The parsed file.
    :param candidates_by_component: Each component with its Missing candidates.
    :param NamePolicy | None policy: Base names for generated identifiers.
    :param str operator_module: Module that ``takeUntil`` is imported from.
    :return: The combined file plan.
    """
    file_plan = FilePlan()
    needed: list[tuple[str, str]] = []
    for component, candidates in candidates_by_component:
        plan = plan_repair(
            component, candidates, tree, policy, existing=file_plan.edits, operator_module=operator_module
        )
        file_plan.plans.append(plan)
        file_plan.edits.extend(plan.edits)
        needed += [item for item in plan.imports_needed if item not in needed]

    for edit in ensure_imports(tree, needed):
        file_plan.edits.add(edit.span, edit.replacement)
    file_plan.imports_added = missing_imports(tree, needed)
    for plan in file_plan.plans:
        plan.imports_added = [item for item in plan.imports_needed if item in file_plan.imports_added]
    return file_plan

