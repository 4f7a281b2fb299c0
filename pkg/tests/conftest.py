"""Test configuration and fixtures for the spa_leak_repair package."""

from collections.abc import Callable
from pathlib import Path

import pytest

from spa_leak_repair.components import FrameworkComponent, detect_components
from spa_leak_repair.source_model import SourceDialect, SyntaxTree, parse

CORPUS_ROOT = Path(__file__).parent / "corpus"

REACT_CLASS_SOURCE = """\
import React from 'react';

class Router extends React.Component {
  componentDidMount() {
    window.addEventListener('hashchange', this.handleHashChange);
  }

  handleHashChange() {
    this.setState({ hash: window.location.hash });
  }

  render() {
    return <div>{this.state.hash}</div>;
  }
}

export default Router;
"""

REACT_FUNCTION_SOURCE = """\
import { useEffect, useState } from 'react';

export function Clock() {
  const [now, setNow] = useState(Date.now());

  useEffect(() => {
    setInterval(() => setNow(Date.now()), 1000);
  }, []);

  return <time>{now}</time>;
}
"""

ANGULAR_SOURCE = """\
import { Component, OnInit } from '@angular/core';
import { Feed } from './feed';

@Component({ selector: 'app-feed', template: '' })
export class FeedComponent implements OnInit {
  items: string[] = [];

  constructor(private feed: Feed) {}

  ngOnInit(): void {
    this.feed.items$.subscribe((items) => (this.items = items));
  }
}
"""

ParseSource = Callable[[str, SourceDialect], SyntaxTree]
SingleComponent = Callable[[str, SourceDialect], tuple[SyntaxTree, FrameworkComponent]]


@pytest.fixture
def parse_source() -> ParseSource:
    """Fixture returning a parser for source text."""
    return parse


@pytest.fixture
def single_component() -> SingleComponent:
    """Fixture returning a helper that parses source holding exactly one component."""

    def _single(text: str, dialect: SourceDialect) -> tuple[SyntaxTree, FrameworkComponent]:
        tree = parse(text, dialect)
        components = detect_components(tree)
        assert len(components) == 1
        return tree, components[0]

    return _single


@pytest.fixture
def react_class_source() -> str:
    """Fixture for a React class that never removes its hashchange listener."""
    return REACT_CLASS_SOURCE


@pytest.fixture
def react_function_source() -> str:
    """Fixture for a React function component whose effect starts an interval without cleanup."""
    return REACT_FUNCTION_SOURCE


@pytest.fixture
def angular_source() -> str:
    """Fixture for an Angular component with an unbounded subscription."""
    return ANGULAR_SOURCE


@pytest.fixture
def corpus_root() -> Path:
    """Fixture for the bundled golden corpus."""
    return CORPUS_ROOT


@pytest.fixture
def project(tmp_path: Path) -> Path:
    """Fixture for a small project with one leaking component, a clean module, a vendored file and a broken file."""
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "Router.jsx").write_text(REACT_CLASS_SOURCE, encoding="utf-8")
    (tmp_path / "src" / "util.js").write_text("export const add = (a, b) => a + b;\n", encoding="utf-8")
    (tmp_path / "src" / "broken.js").write_text("function (\n", encoding="utf-8")
    (tmp_path / "node_modules" / "lib").mkdir(parents=True)
    (tmp_path / "node_modules" / "lib" / "Widget.jsx").write_text(REACT_CLASS_SOURCE, encoding="utf-8")
    return tmp_path
