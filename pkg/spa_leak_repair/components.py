"""Detection of React and Angular components and their lifecycle teardown sites."""

import logging
from collections.abc import Collection
from dataclasses import dataclass, field, replace
from enum import StrEnum

from tree_sitter import Node

from spa_leak_repair.source_model import Span, SyntaxTree

logger = logging.getLogger(__name__)

REACT_BASES = frozenset({"Component", "PureComponent", "React.Component", "React.PureComponent"})
ANGULAR_DECORATORS = frozenset({"Component", "Directive"})
EFFECT_HOOKS = frozenset({"useEffect", "useLayoutEffect"})

CLASS_TYPES = frozenset({"class_declaration", "abstract_class_declaration", "class"})
FUNCTION_LITERAL_TYPES = frozenset({"function_expression", "function", "arrow_function"})
FUNCTION_TYPES = FUNCTION_LITERAL_TYPES | {
    "function_declaration",
    "generator_function_declaration",
    "method_definition",
}

DEFAULT_NAME = "<default>"
ANONYMOUS_NAME = "<anonymous>"


class ComponentKind(StrEnum):
    """Framework component styles the detector recognises."""

    REACT_CLASS = "ReactClass"
    REACT_FUNCTION = "ReactFunction"
    ANGULAR_CLASS = "AngularClass"

    @property
    def is_class(self) -> bool:
        """Whether components of this kind are class declarations."""
        return self is not ComponentKind.REACT_FUNCTION

    @property
    def teardown_method(self) -> str:
        """Name of the destructor lifecycle method for class components."""
        if self is ComponentKind.ANGULAR_CLASS:
            return "ngOnDestroy"
        return "componentWillUnmount"


ALL_COMPONENT_KINDS = frozenset(ComponentKind)


@dataclass(frozen=True)
class TeardownSite:
    """Destructor method of a class component."""

    method_name: str
    body_span: Span
    insertion_offset: int
    body: Node = field(repr=False, compare=False)


@dataclass(frozen=True)
class EffectSite:
    """A ``useEffect``/``useLayoutEffect`` call of a function component.

    ``cleanup_return`` covers the body of a returned cleanup function. When the effect returns something other than a
    function literal with a block body, the span covers the returned expression and ``cleanup_mergeable`` is false.
    """

    call_span: Span
    callback_body_span: Span
    cleanup_return: Span | None
    cleanup_mergeable: bool = False
    callback_body: Node | None = field(default=None, repr=False, compare=False)
    cleanup_body: Node | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class FrameworkComponent:
    """A detected component with its lifecycle sites."""

    name: str
    kind: ComponentKind
    span: Span
    body_span: Span
    teardown: TeardownSite | None = None
    effect_sites: tuple[EffectSite, ...] = ()
    node: Node | None = field(default=None, repr=False, compare=False)
    body: Node | None = field(default=None, repr=False, compare=False)


def enclosing_function(node: Node) -> Node | None:
    """Return the nearest function-like ancestor of ``node`` (methods included)."""
    current = node.parent
    while current is not None and current.type not in FUNCTION_TYPES:
        current = current.parent
    return current


def callee_name(tree: SyntaxTree, call: Node) -> str | None:
    """Return the called name: the identifier itself or the final property of a member access."""
    if (function := call.child_by_field_name("function")) is None:
        return None
    if function.type == "identifier":
        return tree.text(function)
    if function.type == "member_expression" and (prop := function.child_by_field_name("property")) is not None:
        return tree.text(prop)
    return None


def _heritage(tree: SyntaxTree, node: Node) -> str | None:
    for child in node.children:
        if child.type != "class_heritage":
            continue
        for clause in child.named_children:
            if clause.type == "extends_clause":
                value = clause.child_by_field_name("value") or clause.named_children[0]
                return "".join(tree.text(value).split())
            if clause.type != "implements_clause":
                return "".join(tree.text(clause).split())
    return None


def _decorator_names(tree: SyntaxTree, node: Node) -> list[str]:
    decorators = [child for child in node.children if child.type == "decorator"]
    if node.parent is not None and node.parent.type == "export_statement":
        decorators += [child for child in node.parent.children if child.type == "decorator"]

    names = []
    for decorator in decorators:
        for expression in decorator.named_children:
            if expression.type == "call_expression":
                if (name := callee_name(tree, expression)) is not None:
                    names.append(name)
            elif expression.type == "identifier":
                names.append(tree.text(expression))
            elif expression.type == "member_expression" and (prop := expression.child_by_field_name("property")):
                names.append(tree.text(prop))
    return names


def _declared_name(tree: SyntaxTree, node: Node) -> str | None:
    if (name := node.child_by_field_name("name")) is not None:
        return tree.text(name)
    parent = node.parent
    if parent is None:
        return None
    if parent.type == "variable_declarator" and (target := parent.child_by_field_name("name")) is not None:
        return tree.text(target) if target.type == "identifier" else None
    if parent.type == "export_statement" and any(child.type == "default" for child in parent.children):
        return DEFAULT_NAME
    return None


def _class_component(tree: SyntaxTree, node: Node, kinds: Collection[ComponentKind]) -> FrameworkComponent | None:
    if (body := node.child_by_field_name("body")) is None:
        return None

    kind: ComponentKind | None = None
    if ComponentKind.ANGULAR_CLASS in kinds and ANGULAR_DECORATORS.intersection(_decorator_names(tree, node)):
        kind = ComponentKind.ANGULAR_CLASS
    elif ComponentKind.REACT_CLASS in kinds and _heritage(tree, node) in REACT_BASES:
        kind = ComponentKind.REACT_CLASS
    if kind is None:
        return None

    component = FrameworkComponent(
        name=_declared_name(tree, node) or ANONYMOUS_NAME,
        kind=kind,
        span=tree.span(node),
        body_span=tree.span(body),
        node=node,
        body=body,
    )
    return replace(component, teardown=find_teardown(component, tree))


def _effect_site(tree: SyntaxTree, call: Node) -> EffectSite | None:
    arguments = call.child_by_field_name("arguments")
    if arguments is None or not arguments.named_children:
        return None
    callback = arguments.named_children[0]
    if callback.type not in FUNCTION_LITERAL_TYPES or (body := callback.child_by_field_name("body")) is None:
        return None

    cleanup_return: Span | None = None
    cleanup_body: Node | None = None
    if body.type == "statement_block":
        for statement in body.named_children:
            if statement.type != "return_statement" or not statement.named_children:
                continue
            returned = statement.named_children[0]
            if returned.type in FUNCTION_LITERAL_TYPES and (inner := returned.child_by_field_name("body")) is not None:
                cleanup_body = inner
                cleanup_return = tree.span(inner)
            else:
                cleanup_return = tree.span(returned)
            break

    return EffectSite(
        call_span=tree.span(call),
        callback_body_span=tree.span(body),
        cleanup_return=cleanup_return,
        cleanup_mergeable=cleanup_body is not None and cleanup_body.type == "statement_block",
        callback_body=body,
        cleanup_body=cleanup_body,
    )


def _is_effect_call(tree: SyntaxTree, call: Node) -> bool:
    function = call.child_by_field_name("function")
    if function is None:
        return False
    if function.type == "identifier":
        return tree.text(function) in EFFECT_HOOKS
    if function.type == "member_expression":
        obj = function.child_by_field_name("object")
        prop = function.child_by_field_name("property")
        return obj is not None and prop is not None and tree.text(obj) == "React" and tree.text(prop) in EFFECT_HOOKS
    return False


def _function_component(tree: SyntaxTree, node: Node) -> FrameworkComponent | None:
    name = _declared_name(tree, node)
    if name is None or (name != DEFAULT_NAME and not name[:1].isupper()):
        return None
    if (body := node.child_by_field_name("body")) is None:
        return None

    effects = [
        site
        for call in tree.walk(body)
        if call.type == "call_expression" and _is_effect_call(tree, call) and enclosing_function(call) == node
        if (site := _effect_site(tree, call)) is not None
    ]
    if not effects:
        return None

    return FrameworkComponent(
        name=name,
        kind=ComponentKind.REACT_FUNCTION,
        span=tree.span(node),
        body_span=tree.span(body),
        effect_sites=tuple(effects),
        node=node,
        body=body,
    )


def detect_components(
    tree: SyntaxTree, kinds: Collection[ComponentKind] = ALL_COMPONENT_KINDS
) -> list[FrameworkComponent]:
    """Find every framework component declared in a syntax tree.

    Class components are matched by name: an ``extends`` clause naming a React component base, or a ``@Component`` /
    ``@Directive`` decorator. Function components need an uppercase-initial name (or an anonymous default export) and
    at least one effect hook whose callback is a function literal.

    :param SyntaxTree tree: The parsed file.
    :param Collection[ComponentKind] kinds: Component kinds to look for.
    :return: Components ordered by the start of their declaration.
    """
    components: list[FrameworkComponent] = []
    for node in tree.walk():
        component: FrameworkComponent | None = None
        if node.type in CLASS_TYPES:
            component = _class_component(tree, node, kinds)
        elif node.type in FUNCTION_TYPES - {"method_definition"} and ComponentKind.REACT_FUNCTION in kinds:
            component = _function_component(tree, node)
        if component is not None:
            logger.debug("Detected %s %s at line %d", component.kind, component.name, component.span.line)
            components.append(component)

    return sorted(components, key=lambda c: (c.span.start, c.span.end))


def class_members(component: FrameworkComponent) -> list[Node]:
    """Return the members of a class component's body, comments excluded."""
    if component.body is None or not component.kind.is_class:
        return []
    return [member for member in component.body.named_children if member.type != "comment"]


def member_name(tree: SyntaxTree, member: Node) -> str | None:
    """Return the declared name of a class member."""
    name = member.child_by_field_name("name") or member.child_by_field_name("property")
    return tree.text(name) if name is not None else None


def _is_static(member: Node) -> bool:
    return any(child.type == "static" for child in member.children)


def find_teardown(component: FrameworkComponent, tree: SyntaxTree) -> TeardownSite | None:
    """Locate the destructor method of a class component.

    :param FrameworkComponent component: A ReactClass or AngularClass component.
    :param SyntaxTree tree: The tree the component was detected in.
    :return: The teardown site, or None when the class declares no destructor.
    """
    if not component.kind.is_class:
        return None

    method_name = component.kind.teardown_method
    for member in class_members(component):
        if member.type != "method_definition" or _is_static(member) or member_name(tree, member) != method_name:
            continue
        if (body := member.child_by_field_name("body")) is None:
            continue
        return TeardownSite(
            method_name=method_name,
            body_span=tree.span(body),
            insertion_offset=body.end_byte - 1,
            body=body,
        )
    return None


def is_component_node(tree: SyntaxTree, node: Node, kinds: Collection[ComponentKind] = ALL_COMPONENT_KINDS) -> bool:
    """Whether ``node`` itself declares a framework component."""
    if node.type in CLASS_TYPES:
        return _class_component(tree, node, kinds) is not None
    if node.type in FUNCTION_TYPES - {"method_definition"} and ComponentKind.REACT_FUNCTION in kinds:
        return _function_component(tree, node) is not None
    return False
