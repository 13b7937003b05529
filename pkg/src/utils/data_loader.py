"""
Paired tree file I/O.

A paired tree file is UTF-8, tab-separated text:
- optional comment lines starting with '#'
- an optional anchor line ``#anchor<TAB>x0<TAB>y0`` (default 0 0)
- the header row ``node_id<TAB>parent_id<TAB>x<TAB>y``
- one row per node; the root's parent_id is ``-``; x and y are
  comma-separated decimal lists of equal length

Values are written with 17 significant digits, so a saved dataset reloads
bit-for-bit.
"""

import logging
import math
import os

from ..exceptions import DataFormatError, ParameterError
from ..models.tree_model import PairedTreeData, ensure_valid

logger = logging.getLogger(__name__)

HEADER = ("node_id", "parent_id", "x", "y")
ROOT_PARENT = "-"
ANCHOR_TAG = "#anchor"


def _parse_number(token, line_no):
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"invalid number {token!r}", line_no) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value {token!r}", line_no)
    return value


def _parse_series(field, line_no):
    if not field.strip():
        raise DataFormatError("empty series", line_no)
    return tuple(_parse_number(tok.strip(), line_no) for tok in field.split(","))


def parse_paired_trees(text):
    """
    Parse paired tree file content.

    Args:
        text (str): File content

    Returns:
        PairedTreeData: Validated dataset

    Raises:
        DataFormatError: Malformed content, with its 1-based line number
        TreeValidationError: Well-formed rows describing an invalid tree
    """
    anchor = (0.0, 0.0)
    header_seen = False
    rows = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            fields = line.split("\t")
            if fields[0] == ANCHOR_TAG:
                if len(fields) != 3:
                    raise DataFormatError("anchor line needs exactly two values", line_no)
                anchor = (_parse_number(fields[1], line_no), _parse_number(fields[2], line_no))
            continue

        fields = line.split("\t")
        if not header_seen:
            if tuple(f.strip() for f in fields) != HEADER:
                raise DataFormatError(f"expected header {'<TAB>'.join(HEADER)}", line_no)
            header_seen = True
            continue

        if len(fields) != 4:
            raise DataFormatError(f"expected 4 tab-separated fields, got {len(fields)}", line_no)
        node_id, parent_id = fields[0].strip(), fields[1].strip()
        if not node_id:
            raise DataFormatError("empty node id", line_no)
        xs, ys = _parse_series(fields[2], line_no), _parse_series(fields[3], line_no)
        if len(xs) != len(ys):
            raise DataFormatError("series length mismatch", line_no)
        rows.append((node_id, None if parent_id == ROOT_PARENT else parent_id, xs, ys))

    if not header_seen:
        raise DataFormatError("missing header row")
    if not rows:
        raise DataFormatError("no node rows")
    return ensure_valid(PairedTreeData.from_rows(rows, anchor))


def load_paired_trees(path):
    """
    Load and validate a paired tree file.

    Args:
        path (str): File path

    Returns:
        PairedTreeData: Validated dataset; generations are recomputed from parent links
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"invalid UTF-8 byte 0x{raw[exc.start]:02x}",
                              raw[:exc.start].count(b"\n") + 1) from exc
    data = parse_paired_trees(text)
    logger.info("Loaded %d nodes (%d observations) from %s", len(data.topology), data.observation_count, path)
    return data


def _fmt(value):
    return format(float(value), ".17g")


def format_paired_trees(data: PairedTreeData, comments=()):
    """Serialize a dataset to paired tree file content."""
    for node_id in data.topology.node_ids:
        if any(ch in node_id for ch in "\t\n\r") or node_id == ROOT_PARENT or node_id.startswith("#"):
            raise ParameterError(f"node id {node_id!r} cannot be written to a paired tree file")
    lines = [f"# {c}" for c in comments]
    lines.append(f"{ANCHOR_TAG}\t{_fmt(data.anchor[0])}\t{_fmt(data.anchor[1])}")
    lines.append("\t".join(HEADER))
    for record in data.topology.records:
        parent = ROOT_PARENT if record.parent_id is None else record.parent_id
        xs = ",".join(_fmt(v) for v in data.x_series[record.node_id])
        ys = ",".join(_fmt(v) for v in data.y_series[record.node_id])
        lines.append(f"{record.node_id}\t{parent}\t{xs}\t{ys}")
    return "\n".join(lines) + "\n"


def save_paired_trees(data: PairedTreeData, path, comments=()):
    """Write a dataset as a paired tree file, creating parent directories."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_paired_trees(data, comments))
    logger.info("Saved %d nodes to %s", len(data.topology), path)
