"""Shared fixtures for the exporter test suite.

When the exporter package itself is not installed (e.g. running the engine's
suite from the repository root before building this package), every test here
is skipped at collection time instead of erroring on import.
"""

from __future__ import annotations

from pathlib import Path

import pytest

try:
    import eercf_exporter  # noqa: F401  (probe only)
except ImportError:
    collect_ignore_glob = ["test_*.py"]


@pytest.fixture(scope="session")
def corpus(tmp_path_factory: pytest.TempPathFactory) -> tuple[Path, Path]:
    """Session-scoped 10-clip corpus (12 frames each, distinct colors)."""
    from corpus_helpers import build_corpus

    return build_corpus(tmp_path_factory.mktemp("corpus"))
