"""Glob patterns over project-relative POSIX paths.

Supported syntax: ``*`` (within one path segment), ``?``, ``[...]`` character classes, ``**/`` (any number of
directories, including none), a trailing ``**`` (anything below) and ``{a,b}`` alternatives, which may nest.
"""

import re
from collections.abc import Iterable
from functools import cache


def _character_class(pattern: str, start: int) -> tuple[str, int]:
    end = start + 1
    if end < len(pattern) and pattern[end] in "!^":
        end += 1
    if end < len(pattern) and pattern[end] == "]":
        end += 1
    end = pattern.find("]", end)
    if end == -1:
        msg = f"Unclosed '[' in glob {pattern!r}"
        raise ValueError(msg)

    body = pattern[start + 1 : end]
    negate = body[:1] in ("!", "^")
    if negate:
        body = body[1:]
    body = body.replace("\\", "\\\\")
    return f"[{'^/' if negate else ''}{body}]", end + 1


def translate(pattern: str) -> str:
    """Translate a glob into a regular expression source that must match a whole path.

    :param str pattern: The glob.
    :return: The regular expression source.
    :raises ValueError: If the glob is empty or its brackets or braces are unbalanced.
    """
    if not pattern:
        msg = "Empty glob"
        raise ValueError(msg)

    parts: list[str] = []
    depth = 0
    index = 0
    while index < len(pattern):
        char = pattern[index]
        if pattern.startswith("**/", index):
            parts.append("(?:[^/]*/)*")
            index += 3
            continue
        if pattern.startswith("**", index):
            parts.append(".*")
            index += 2
            continue

        match char:
            case "*":
                parts.append("[^/]*")
            case "?":
                parts.append("[^/]")
            case "[":
                expression, index = _character_class(pattern, index)
                parts.append(expression)
                continue
            case "{":
                depth += 1
                parts.append("(?:")
            case "}" if depth:
                depth -= 1
                parts.append(")")
            case "}":
                msg = f"Unbalanced '}}' in glob {pattern!r}"
                raise ValueError(msg)
            case "," if depth:
                parts.append("|")
            case _:
                parts.append(re.escape(char))
        index += 1

    if depth:
        msg = f"Unclosed '{{' in glob {pattern!r}"
        raise ValueError(msg)
    return "".join(parts)


@cache
def compile_glob(pattern: str) -> re.Pattern[str]:
    """Compile a glob; results are cached.

    :param str pattern: The glob.
    :return: A pattern matching whole paths only.
    :raises ValueError: If the glob is invalid.
    """
    return re.compile(rf"(?s:{translate(pattern)})\Z")


def matches(path: str, patterns: Iterable[str]) -> bool:
    """Whether a project-relative POSIX path matches any of the globs.

    :param str path: The path, with ``/`` separators.
    :param Iterable[str] patterns: The globs.
    :return: True if at least one glob matches the whole path.
    :raises ValueError: If a glob is invalid.
    """
    return any(compile_glob(pattern).match(path) for pattern in patterns)


def prunes_directory(path: str, patterns: Iterable[str]) -> bool:
    """Whether a directory is wholly excluded by a ``.../**`` glob, so the walk need not enter it.

    :param str path: The project-relative directory path, with ``/`` separators.
    :param Iterable[str] patterns: The exclude globs.
    :return: True if a glob ending in ``/**`` matches the directory itself.
    :raises ValueError: If a glob is invalid.
    """
    return any(pattern.endswith("/**") and compile_glob(pattern[:-3]).match(path) for pattern in patterns)
