"""Reading and writing the converted-dataset manifest.

One row per frame: ``path,x0,y0,x1,y1,x2,y2,x3,y3,part,group`` where the
``x``/``y`` pairs are the ground-truth document corners in original image
pixels. Tab- and comma-separated files are both accepted; the separator is
taken from the header line.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

COLUMNS = ("path", "x0", "y0", "x1", "y1", "x2", "y2", "x3", "y3", "part", "group")
COORDS = COLUMNS[1:9]


class ManifestError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class DatasetRecord:
    path: str
    quad: tuple[tuple[float, float], ...]
    part: int
    group: str

    @property
    def quad_array(self):
        return np.array(self.quad, dtype=np.float64)


def _header_layout(fields, line_no):
    names = [f.strip() for f in fields]
    if tuple(names) == COLUMNS:
        return 0
    if len(names) == len(COLUMNS) + 1 and tuple(names[1:]) == COLUMNS:
        return 1
    missing = [c for c in COLUMNS if c not in names]
    if missing:
        raise ManifestError(f"header is missing column(s) {', '.join(missing)}", line_no)
    raise ManifestError(f"unexpected header layout {names}", line_no)


def parse_manifest(text):
    """Parse manifest text (a string or an open text stream) into records."""
    if isinstance(text, str):
        text = io.StringIO(text)
    lines = text.read().splitlines()
    if not lines:
        raise ManifestError("manifest is empty (no header)", 1)
    delimiter = "\t" if "\t" in lines[0] else ","
    rows = csv.reader(lines, delimiter=delimiter)
    header = next(rows)
    skip = _header_layout(header, 1)
    width = len(header)
    records = []
    for line_no, row in enumerate(rows, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != width:
            raise ManifestError(f"expected {width} fields, found {len(row)}", line_no)
        values = dict(zip(COLUMNS, (f.strip() for f in row[skip:])))
        try:
            coords = [float(values[c]) for c in COORDS]
        except ValueError as exc:
            raise ManifestError(f"non-numeric coordinate ({exc})", line_no) from None
        if not all(np.isfinite(coords)):
            raise ManifestError("coordinates must be finite", line_no)
        try:
            part = int(values["part"])
        except ValueError:
            raise ManifestError(f"part must be an integer, got {values['part']!r}", line_no) from None
        quad = tuple((coords[i], coords[i + 1]) for i in range(0, 8, 2))
        records.append(DatasetRecord(values["path"], quad, part, values["group"]))
    return records


def read_manifest(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_manifest(fh)


def _num(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def format_manifest(records):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in records:
        coords = [_num(v) for xy in rec.quad for v in xy]
        writer.writerow([rec.path, *coords, rec.part, rec.group])
    return out.getvalue()


def write_manifest(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_manifest(records))
