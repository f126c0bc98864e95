"""Delimited-file ingestion into Network values.

Edge files carry one ``src,dst`` pair per line (string labels, ``#`` starts
a comment).  The optional attribute table has a ``node,attr1,...`` header;
column kinds are inferred (all-numeric values make a numeric column, anything
else is categorical) and empty fields mark missing entries.  Nodes appearing
only in the attribute table become isolates; nodes appearing only in the edge
file get missing values for every attribute.  Labels map to dense indices in
lexicographic order.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

from .network import AttributeColumn, CATEGORICAL, NUMERIC, Network


class IngestError(ValueError):
    """Malformed input; carries the offending line number where known."""


def parse_edge_text(text: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2 or not all(parts):
            raise IngestError(f"line {lineno}: expected 'src,dst', got {raw!r}")
        src, dst = parts
        if src == dst:
            raise IngestError(f"line {lineno}: self-loop {src!r}")
        pairs.append((src, dst))
    return pairs


def parse_attr_text(text: str) -> tuple[list[str], dict[str, list[str]]]:
    """Header names plus per-node raw string rows."""
    lines = [ln for ln in text.splitlines()]
    header = None
    rows: dict[str, list[str]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if header is None:
            if parts[0] != "node" or len(parts) < 2:
                raise IngestError(
                    f"line {lineno}: attribute header must start with 'node'")
            header = parts[1:]
            if len(set(header)) != len(header):
                raise IngestError(f"line {lineno}: duplicate attribute names")
            continue
        if len(parts) != len(header) + 1:
            raise IngestError(
                f"line {lineno}: expected {len(header) + 1} fields, got {len(parts)}")
        node = parts[0]
        if not node:
            raise IngestError(f"line {lineno}: empty node label")
        if node in rows:
            raise IngestError(f"line {lineno}: duplicate row for node {node!r}")
        rows[node] = parts[1:]
    if header is None:
        raise IngestError("attribute table is empty")
    return header, rows


def _infer_column(raw: list[Optional[str]]) -> AttributeColumn:
    present = [v for v in raw if v is not None]
    as_float = []
    numeric = bool(present)
    for v in present:
        try:
            x = float(v)
        except ValueError:
            numeric = False
            break
        if not math.isfinite(x):
            numeric = False
            break
        as_float.append(x)
    if numeric:
        it = iter(as_float)
        return AttributeColumn(NUMERIC, tuple(
            next(it) if v is not None else None for v in raw))
    return AttributeColumn(CATEGORICAL, tuple(raw))


def build_network(edge_pairs: list[tuple[str, str]], directed: bool,
                  attr_header: Optional[list[str]] = None,
                  attr_rows: Optional[dict[str, list[str]]] = None) -> Network:
    labels = sorted({lab for pair in edge_pairs for lab in pair}
                    | set(attr_rows or {}))
    index = {lab: i for i, lab in enumerate(labels)}
    edges = {(index[a], index[b]) for a, b in edge_pairs}

    attributes = {}
    if attr_header:
        for col_idx, name in enumerate(attr_header):
            raw: list[Optional[str]] = []
            for lab in labels:
                row = (attr_rows or {}).get(lab)
                value = row[col_idx] if row is not None else ""
                raw.append(value if value != "" else None)
            if all(v is None for v in raw):
                continue
            attributes[name] = _infer_column(raw)
    return Network(len(labels), directed, edges, attributes)


def ingest_text(edge_text: str, directed: bool,
                attr_text: Optional[str] = None) -> Network:
    pairs = parse_edge_text(edge_text)
    if attr_text:
        header, rows = parse_attr_text(attr_text)
        return build_network(pairs, directed, header, rows)
    return build_network(pairs, directed)


def ingest(edge_file: str, directed: bool,
           attr_file: Optional[str] = None) -> Network:
    edge_path = Path(edge_file)
    if not edge_path.exists():
        raise IngestError(f"edge file not found: {edge_file}")
    attr_text = None
    if attr_file is not None:
        attr_path = Path(attr_file)
        if not attr_path.exists():
            raise IngestError(f"attribute file not found: {attr_file}")
        attr_text = attr_path.read_text()
    return ingest_text(edge_path.read_text(), directed, attr_text)


def node_labels(edge_text: str, attr_text: Optional[str] = None) -> list[str]:
    """The label order used by ingestion (lexicographic)."""
    pairs = parse_edge_text(edge_text)
    labels = {lab for pair in pairs for lab in pair}
    if attr_text:
        _, rows = parse_attr_text(attr_text)
        labels |= set(rows)
    return sorted(labels)
