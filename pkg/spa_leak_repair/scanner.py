"""Locate leak-prone resource acquisitions inside components and check whether they are already cleaned up."""

import logging
from collections.abc import Collection, Iterator
from dataclasses import dataclass, field, replace
from enum import StrEnum

from tree_sitter import Node

from spa_leak_repair.components import (
    CLASS_TYPES,
    FUNCTION_LITERAL_TYPES,
    FUNCTION_TYPES,
    ComponentKind,
    EffectSite,
    FrameworkComponent,
    callee_name,
    enclosing_function,
    is_component_node,
)
from spa_leak_repair.source_model import Span, SyntaxTree

logger = logging.getLogger(__name__)

GLOBAL_TARGETS = frozenset({"window", "document", "globalThis"})
GLOBAL_QUALIFIERS = frozenset({"window", "globalThis"})
COMPLETING_OPERATORS = frozenset({"takeUntil", "take", "first", "takeWhile"})
STATEMENT_TYPES = frozenset(
    {
        "expression_statement",
        "lexical_declaration",
        "variable_declaration",
        "return_statement",
        "throw_statement",
        "field_definition",
        "public_field_definition",
    }
)
FIELD_TYPES = frozenset({"field_definition", "public_field_definition"})
BLOCK_TYPES = frozenset({"statement_block", "program", "class_body", "switch_case", "switch_default"})


class LeakKind(StrEnum):
    """The four fix patterns, with timers split by API."""

    FP1_SUBSCRIPTION = "FP1_Subscription"
    FP2_EVENT_LISTENER = "FP2_EventListener"
    FP3A_TIMEOUT = "FP3a_Timeout"
    FP3B_INTERVAL = "FP3b_Interval"
    FP4_ANIMATION_FRAME = "FP4_AnimationFrame"

    @property
    def flag(self) -> str:
        """Short command-line name, e.g. ``fp3a``."""
        return self.value.split("_", 1)[0].lower()

    @classmethod
    def from_flag(cls, flag: str) -> "LeakKind":
        """Look up a kind by its short command-line name.

        :param str flag: Short name such as ``fp1`` or ``fp3b``.
        :return: The leak kind.
        :raises ValueError: If the name is unknown.
        """
        for kind in cls:
            if kind.flag == flag.strip().lower():
                return kind
        msg = f"Unknown leak pattern: {flag!r}"
        raise ValueError(msg)


ALL_LEAK_KINDS = frozenset(LeakKind)

ACQUIRERS = {
    "setTimeout": LeakKind.FP3A_TIMEOUT,
    "setInterval": LeakKind.FP3B_INTERVAL,
    "requestAnimationFrame": LeakKind.FP4_ANIMATION_FRAME,
}
RELEASERS = {
    LeakKind.FP3A_TIMEOUT: "clearTimeout",
    LeakKind.FP3B_INTERVAL: "clearInterval",
    LeakKind.FP4_ANIMATION_FRAME: "cancelAnimationFrame",
}


class Fp1Scope(StrEnum):
    """Components in which ``subscribe`` calls are considered."""

    ANGULAR_ONLY = "angular-only"
    ALL_CLASSES = "all-classes"


class BindingKind(StrEnum):
    """How the handle returned by an acquisition is kept."""

    NONE = "None"
    LOCAL_VARIABLE = "LocalVariable"
    INSTANCE_PROPERTY = "InstanceProperty"


@dataclass(frozen=True)
class HandleBinding:
    """Variable or property capturing a resource handle."""

    kind: BindingKind = BindingKind.NONE
    name: str | None = None

    @property
    def reference(self) -> str | None:
        """Expression that reads the handle back, or None when it was discarded."""
        match self.kind:
            case BindingKind.INSTANCE_PROPERTY:
                return f"this.{self.name}"
            case BindingKind.LOCAL_VARIABLE:
                return self.name
        return None


class HandlerKind(StrEnum):
    """Shape of an event-listener argument."""

    IDENTIFIER = "Identifier"
    THIS_MEMBER = "ThisMember"
    INLINE = "Inline"
    BOUND_CALL = "BoundCall"
    OTHER = "Other"


@dataclass(frozen=True)
class Handler:
    """Listener argument of an ``addEventListener`` call."""

    kind: HandlerKind
    text: str
    span: Span
    node: Node | None = field(default=None, repr=False, compare=False)


class EnclosureKind(StrEnum):
    """Where in the component an acquisition happens."""

    CLASS_METHOD = "ClassMethod"
    CONSTRUCTOR = "Constructor"
    EFFECT_CALLBACK = "EffectCallback"
    FUNCTION_BODY = "FunctionBody"


@dataclass(frozen=True)
class Enclosure:
    """Enclosing lifecycle context of an acquisition."""

    kind: EnclosureKind
    name: str | None = None
    effect: EffectSite | None = None


@dataclass(frozen=True)
class AcquisitionSite:
    """One resource acquisition matching a fix pattern; listener fields are set only for FP2."""

    call_span: Span
    statement_span: Span
    leak_kind: LeakKind
    binding: HandleBinding
    enclosing: Enclosure
    target_text: str | None = None
    event_name: str | None = None
    event_text: str | None = None
    options_text: str | None = None
    handler: Handler | None = None
    call: Node | None = field(default=None, repr=False, compare=False)
    statement: Node | None = field(default=None, repr=False, compare=False)


class CleanupStatus(StrEnum):
    """Whether an acquisition already has cleanup code."""

    MISSING = "Missing"
    PRESENT = "Present"
    UNREPAIRABLE = "Unrepairable"


@dataclass(frozen=True)
class Cleanup:
    """Cleanup verdict, with evidence for Present and a reason for Unrepairable."""

    status: CleanupStatus
    evidence: Span | None = None
    reason: str | None = None


@dataclass(frozen=True)
class LeakCandidate:
    """An acquisition inside a component together with its cleanup verdict."""

    component: FrameworkComponent
    site: AcquisitionSite
    cleanup: Cleanup

    @property
    def kind(self) -> LeakKind:
        """The candidate's leak kind."""
        return self.site.leak_kind


def normalize(text: str) -> str:
    """Canonical form for textual comparison: whitespace dropped, optional chaining treated as plain access."""
    return "".join(text.split()).replace("?.", ".")


def string_value(tree: SyntaxTree, node: Node) -> str | None:
    """Return the value of a plain string literal, or None for any other node."""
    if node.type != "string":
        return None
    return "".join(tree.text(child) for child in node.named_children)


def _unwrap_parent(node: Node) -> tuple[Node, Node | None]:
    child = node
    parent = node.parent
    while parent is not None and parent.type == "parenthesized_expression":
        child = parent
        parent = parent.parent
    return child, parent


def classify_handle_binding(tree: SyntaxTree, call: Node) -> HandleBinding:
    """Classify how the result of an acquisition call is kept.

    :param SyntaxTree tree: The parsed file.
    :param Node call: The acquisition call.
    :return: InstanceProperty for ``this.x = call``, LocalVariable for a declarator or identifier assignment, None when
        the result is discarded.
    """
    child, parent = _unwrap_parent(call)
    if parent is None:
        return HandleBinding()

    if parent.type == "assignment_expression" and parent.child_by_field_name("right") == child:
        left = parent.child_by_field_name("left")
        if left is not None and left.type == "member_expression":
            obj = left.child_by_field_name("object")
            prop = left.child_by_field_name("property")
            if obj is not None and obj.type == "this" and prop is not None:
                return HandleBinding(BindingKind.INSTANCE_PROPERTY, tree.text(prop))
        if left is not None and left.type == "identifier":
            return HandleBinding(BindingKind.LOCAL_VARIABLE, tree.text(left))
    elif parent.type == "variable_declarator" and parent.child_by_field_name("value") == child:
        name = parent.child_by_field_name("name")
        if name is not None and name.type == "identifier":
            return HandleBinding(BindingKind.LOCAL_VARIABLE, tree.text(name))
    elif parent.type in FIELD_TYPES and parent.child_by_field_name("value") == child:
        name = parent.child_by_field_name("name") or parent.child_by_field_name("property")
        if name is not None:
            return HandleBinding(BindingKind.INSTANCE_PROPERTY, tree.text(name))
    return HandleBinding()


def enclosing_statement(call: Node) -> Node:
    """Return the statement (or class field) that contains ``call``."""
    current = call
    while current.parent is not None:
        if current.type in STATEMENT_TYPES or current.parent.type in BLOCK_TYPES:
            return current
        current = current.parent
    return current


def member_root(node: Node) -> Node:
    """Return the innermost object of a member-access chain."""
    current = node
    while current.type == "member_expression" and (obj := current.child_by_field_name("object")) is not None:
        current = obj
    return current


def declares(tree: SyntaxTree, scope: Node, name: str) -> bool:
    """Whether ``name`` is declared (as a variable, function or parameter) anywhere within ``scope``."""
    for node in tree.walk(scope):
        if node.type == "variable_declarator" and (target := node.child_by_field_name("name")) is not None:
            names = (n for n in tree.walk(target) if n.type in ("identifier", "shorthand_property_identifier_pattern"))
            if any(tree.text(n) == name for n in names):
                return True
        elif node.type in ("function_declaration", "class_declaration"):
            if (target := node.child_by_field_name("name")) is not None and tree.text(target) == name:
                return True
        elif node.type in ("formal_parameters",):
            if any(n.type == "identifier" and tree.text(n) == name for n in tree.walk(node)):
                return True
    if scope.type == "arrow_function" and (param := scope.child_by_field_name("parameter")) is not None:
        return tree.text(param) == name
    return False


def _iter_calls(tree: SyntaxTree, component: FrameworkComponent) -> Iterator[Node]:
    if component.body is None:
        return
    stack = [component.body]
    while stack:
        node = stack.pop()
        if node != component.body and node.type in CLASS_TYPES | FUNCTION_TYPES and is_component_node(tree, node):
            continue
        if node.type == "call_expression":
            yield node
        stack.extend(reversed(node.children))


def _timer_kind(tree: SyntaxTree, call: Node) -> LeakKind | None:
    function = call.child_by_field_name("function")
    if function is None:
        return None
    if function.type == "identifier":
        return ACQUIRERS.get(tree.text(function))
    if function.type == "member_expression":
        obj = function.child_by_field_name("object")
        prop = function.child_by_field_name("property")
        if obj is not None and prop is not None and obj.type == "identifier" and tree.text(obj) in GLOBAL_QUALIFIERS:
            return ACQUIRERS.get(tree.text(prop))
    return None


def _has_completing_operator(tree: SyntaxTree, receiver: Node) -> bool:
    """Whether the subscribed stream completes on its own.

    Only the receiver chain is inspected: operators of each `pipe(...)` on the chain count, operators nested
    inside their arguments belong to inner streams and do not.
    """
    current: Node | None = receiver
    while current is not None:
        match current.type:
            case "call_expression":
                name = callee_name(tree, current)
                if name in COMPLETING_OPERATORS or (name == "pipe" and _pipes_completing_operator(tree, current)):
                    return True
                current = current.child_by_field_name("function")
            case "member_expression":
                current = current.child_by_field_name("object")
            case "parenthesized_expression" | "non_null_expression" | "as_expression":
                current = current.named_children[0] if current.named_children else None
            case _:
                current = None
    return False


def _pipes_completing_operator(tree: SyntaxTree, pipe: Node) -> bool:
    arguments = pipe.child_by_field_name("arguments")
    if arguments is None:
        return False
    return any(
        arg.type == "call_expression" and callee_name(tree, arg) in COMPLETING_OPERATORS
        for arg in arguments.named_children
    )


def _listener_target_ok(tree: SyntaxTree, target: Node, call: Node) -> bool:
    if target.type == "identifier":
        name = tree.text(target)
        if name in GLOBAL_TARGETS:
            return True
        scope = enclosing_function(call)
        return scope is None or not declares(tree, scope, name)
    if target.type == "member_expression":
        root = member_root(target)
        return root.type == "this" or (root.type == "identifier" and tree.text(root) == "document")
    return False


def _handler(tree: SyntaxTree, node: Node) -> Handler:
    span = tree.span(node)
    text = tree.text(node)
    if node.type == "identifier":
        return Handler(HandlerKind.IDENTIFIER, text, span, node)
    if node.type in FUNCTION_LITERAL_TYPES:
        return Handler(HandlerKind.INLINE, text, span, node)
    if node.type == "member_expression" and member_root(node).type == "this":
        return Handler(HandlerKind.THIS_MEMBER, text, span, node)
    if node.type == "call_expression" and callee_name(tree, node) == "bind":
        return Handler(HandlerKind.BOUND_CALL, text, span, node)
    return Handler(HandlerKind.OTHER, text, span, node)


def _enclosure(tree: SyntaxTree, component: FrameworkComponent, call: Node) -> Enclosure:
    call_span = tree.span(call)
    if component.kind is ComponentKind.REACT_FUNCTION:
        for effect in component.effect_sites:
            if effect.callback_body_span.contains(call_span):
                return Enclosure(EnclosureKind.EFFECT_CALLBACK, effect=effect)
        return Enclosure(EnclosureKind.FUNCTION_BODY)

    current = call.parent
    member: Node | None = None
    while current is not None and current != component.body:
        member = current
        current = current.parent
    if member is None:
        return Enclosure(EnclosureKind.FUNCTION_BODY)
    if member.type == "method_definition":
        name_node = member.child_by_field_name("name")
        name = tree.text(name_node) if name_node is not None else None
        if name == "constructor":
            return Enclosure(EnclosureKind.CONSTRUCTOR, name)
        return Enclosure(EnclosureKind.CLASS_METHOD, name)
    if member.type in FIELD_TYPES:
        return Enclosure(EnclosureKind.CONSTRUCTOR)
    return Enclosure(EnclosureKind.FUNCTION_BODY)


def _acquisition_kind(
    tree: SyntaxTree, component: FrameworkComponent, call: Node, fp1_scope: Fp1Scope
) -> LeakKind | None:
    if (kind := _timer_kind(tree, call)) is not None:
        return kind

    function = call.child_by_field_name("function")
    if function is None or function.type != "member_expression":
        return None
    prop = function.child_by_field_name("property")
    receiver = function.child_by_field_name("object")
    if prop is None or receiver is None:
        return None

    match tree.text(prop):
        case "subscribe":
            allowed = component.kind is ComponentKind.ANGULAR_CLASS or (
                fp1_scope is Fp1Scope.ALL_CLASSES and component.kind.is_class
            )
            if allowed and not _has_completing_operator(tree, receiver):
                return LeakKind.FP1_SUBSCRIPTION
        case "addEventListener":
            if _listener_args(tree, call) is not None and _listener_target_ok(tree, receiver, call):
                return LeakKind.FP2_EVENT_LISTENER
    return None


def _listener_args(tree: SyntaxTree, call: Node) -> list[Node] | None:
    arguments = call.child_by_field_name("arguments")
    if arguments is None:
        return None
    args = [arg for arg in arguments.named_children if arg.type != "comment"]
    if len(args) < 2 or string_value(tree, args[0]) is None:  # noqa: PLR2004
        return None
    return args


def _acquisition(
    tree: SyntaxTree, component: FrameworkComponent, call: Node, fp1_scope: Fp1Scope
) -> AcquisitionSite | None:
    if (kind := _acquisition_kind(tree, component, call, fp1_scope)) is None:
        return None

    statement = enclosing_statement(call)
    site = AcquisitionSite(
        call_span=tree.span(call),
        statement_span=tree.span(statement),
        leak_kind=kind,
        binding=classify_handle_binding(tree, call),
        enclosing=_enclosure(tree, component, call),
        call=call,
        statement=statement,
    )
    if kind is not LeakKind.FP2_EVENT_LISTENER:
        return site

    args = _listener_args(tree, call) or []
    function = call.child_by_field_name("function")
    receiver = function.child_by_field_name("object") if function is not None else None
    return replace(
        site,
        target_text=tree.text(receiver) if receiver is not None else None,
        event_name=string_value(tree, args[0]),
        event_text=tree.text(args[0]),
        options_text=tree.text(args[2]) if len(args) > 2 else None,  # noqa: PLR2004
        handler=_handler(tree, args[1]),
    )


def _calls_named(tree: SyntaxTree, component: FrameworkComponent, names: Collection[str]) -> Iterator[Node]:
    if component.body is None:
        return
    for node in tree.walk(component.body):
        if node.type == "call_expression" and callee_name(tree, node) in names:
            yield node


def _first_argument(call: Node) -> Node | None:
    arguments = call.child_by_field_name("arguments")
    if arguments is None or not arguments.named_children:
        return None
    return arguments.named_children[0]


def has_cleanup(component: FrameworkComponent, site: AcquisitionSite, tree: SyntaxTree) -> Span | None:
    """Look for existing cleanup of an acquisition anywhere in its component.

    :param FrameworkComponent component: The component the site belongs to.
    :param AcquisitionSite site: The acquisition.
    :param SyntaxTree tree: The parsed file.
    :return: Span of the cleanup call, or None when no cleanup exists.
    """
    if site.leak_kind is LeakKind.FP2_EVENT_LISTENER:
        return _listener_cleanup(component, site, tree)

    if (reference := site.binding.reference) is None:
        return None
    wanted = normalize(reference)

    if site.leak_kind is LeakKind.FP1_SUBSCRIPTION:
        for call in _calls_named(tree, component, {"unsubscribe"}):
            function = call.child_by_field_name("function")
            receiver = function.child_by_field_name("object") if function is not None else None
            if receiver is not None and normalize(tree.text(receiver)) == wanted:
                return tree.span(call)
        return None

    for call in _calls_named(tree, component, {RELEASERS[site.leak_kind]}):
        function = call.child_by_field_name("function")
        if function is not None and function.type == "member_expression":
            obj = function.child_by_field_name("object")
            if obj is None or tree.text(obj) not in GLOBAL_QUALIFIERS:
                continue
        if (argument := _first_argument(call)) is not None and normalize(tree.text(argument)) == wanted:
            return tree.span(call)
    return None


def _listener_cleanup(component: FrameworkComponent, site: AcquisitionSite, tree: SyntaxTree) -> Span | None:
    handler = site.handler
    if handler is None or handler.kind not in (HandlerKind.IDENTIFIER, HandlerKind.THIS_MEMBER):
        return None
    target = normalize(site.target_text or "")
    for call in _calls_named(tree, component, {"removeEventListener"}):
        function = call.child_by_field_name("function")
        receiver = function.child_by_field_name("object") if function is not None else None
        arguments = call.child_by_field_name("arguments")
        if receiver is None or arguments is None or normalize(tree.text(receiver)) != target:
            continue
        args = arguments.named_children
        if len(args) < 2 or string_value(tree, args[0]) != site.event_name:  # noqa: PLR2004
            continue
        if normalize(tree.text(args[1])) == normalize(handler.text):
            return tree.span(call)
    return None


def scan_component(
    component: FrameworkComponent,
    tree: SyntaxTree,
    enabled: Collection[LeakKind] = ALL_LEAK_KINDS,
    fp1_scope: Fp1Scope = Fp1Scope.ANGULAR_ONLY,
) -> list[LeakCandidate]:
    """Find leak candidates of the enabled kinds inside one component.

    :param FrameworkComponent component: A component detected in ``tree``.
    :param SyntaxTree tree: The parsed file.
    :param Collection[LeakKind] enabled: Leak kinds to report.
    :param Fp1Scope fp1_scope: Components in which subscriptions are considered.
    :return: Candidates ordered by call position.
    """
    candidates = []
    for call in _iter_calls(tree, component):
        site = _acquisition(tree, component, call, fp1_scope)
        if site is None or site.leak_kind not in enabled:
            continue

        if site.enclosing.kind is EnclosureKind.FUNCTION_BODY and component.kind is ComponentKind.REACT_FUNCTION:
            cleanup = Cleanup(CleanupStatus.UNREPAIRABLE, reason="outside effect")
        elif (evidence := has_cleanup(component, site, tree)) is not None:
            cleanup = Cleanup(CleanupStatus.PRESENT, evidence=evidence)
        else:
            cleanup = Cleanup(CleanupStatus.MISSING)

        logger.debug(
            "%s at %d:%d in %s: %s",
            site.leak_kind,
            site.call_span.line,
            site.call_span.column,
            component.name,
            cleanup.status,
        )
        candidates.append(LeakCandidate(component, site, cleanup))

    return sorted(candidates, key=lambda candidate: candidate.site.call_span.start)
