"""Bundled machines, problems and reference values."""

from .corpus import (
    corpus_root,
    load_document,
    load_manifest,
    package_corpus,
    regenerate,
    write_corpus,
)

__all__ = ["corpus_root", "load_document", "load_manifest", "package_corpus", "regenerate", "write_corpus"]
