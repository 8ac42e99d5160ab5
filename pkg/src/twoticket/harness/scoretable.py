"""ScoreTable: externally produced scores for replaying the hiring pipeline.

CSV with a header row. Columns, in order::

    candidate_id,group,label,score_original,score_candidate_llm,hirer_draw_1,...,hirer_draw_k

``group`` is ``P`` or ``U``; ``label`` is ``0`` or ``1``. An empty
``score_candidate_llm`` means the candidate had no LLM; an empty hirer cell means
that ticket produced no resume. Every present score must be a finite real.
Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""

import csv
import io
import math
import re
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, ParseError
from ..schemes import RealizedScores

BASE_COLUMNS = ("candidate_id", "group", "label", "score_original", "score_candidate_llm")
_HIRER = re.compile(r"^hirer_draw_(\d+)$")


def _parse_score(text, column, line, optional):
    text = text.strip()
    if text == "":
        if optional:
            return -math.inf
        raise ParseError(f"missing value in column {column!r}", line)
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric score {text!r} in column {column!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"score in column {column!r} must be finite, got {text!r}", line)
    return value


def _format_score(value):
    return repr(float(value)) if math.isfinite(value) else ""


@dataclass
class ScoreTable:
    """Column-wise score table; ``candidate`` and ``hirer`` use minus infinity for empty cells."""

    ids: list
    group: np.ndarray
    label: np.ndarray
    original: np.ndarray
    candidate: np.ndarray
    hirer: np.ndarray

    def __len__(self):
        return len(self.ids)

    @property
    def hirer_draws(self):
        return self.hirer.shape[1]

    def to_realized(self):
        return RealizedScores(self.original, self.candidate, self.hirer, self.group, self.label, list(self.ids))

    @classmethod
    def from_realized(cls, realized):
        ids = list(realized.ids)
        return cls(ids, realized.group.copy(), realized.label.copy(), realized.original.copy(),
                   realized.candidate.copy(), realized.hirer.copy())

    def require_hirer_draws(self, tickets):
        if tickets > self.hirer_draws:
            missing = f"hirer_draw_{self.hirer_draws + 1}"
            raise ConfigurationError(
                f"{tickets} hirer ticket(s) requested but the table has no column {missing!r}")

    def write_csv(self, path_or_file):
        header = list(BASE_COLUMNS) + [f"hirer_draw_{j + 1}" for j in range(self.hirer_draws)]
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(len(self)):
                w.writerow([self.ids[i], self.group[i], int(self.label[i]), _format_score(self.original[i]),
                            _format_score(self.candidate[i])]
                           + [_format_score(v) for v in self.hirer[i]])
        finally:
            if own:
                fh.close()

    def to_csv_string(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def parse_score_table(lines):
    """Parse CSV text lines into a :class:`ScoreTable`; errors carry the offending line number."""
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty score table", 1) from None
    if tuple(header[:len(BASE_COLUMNS)]) != BASE_COLUMNS:
        raise ParseError(f"header must start with {','.join(BASE_COLUMNS)}", 1)
    extra = header[len(BASE_COLUMNS):]
    for j, name in enumerate(extra):
        m = _HIRER.match(name)
        if not m or int(m.group(1)) != j + 1:
            raise ParseError(f"unexpected column {name!r}; expected hirer_draw_{j + 1}", 1)
    k = len(extra)
    ids, groups, labels, orig, cand, hirer = [], [], [], [], [], []
    seen = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        cid = row[0].strip()
        if not cid:
            raise ParseError("empty candidate_id", line)
        if cid in seen:
            raise ParseError(f"duplicate candidate_id {cid!r}", line)
        seen.add(cid)
        g = row[1].strip()
        if g not in ("P", "U"):
            raise ParseError(f"group must be P or U, got {g!r}", line)
        lab = row[2].strip()
        if lab not in ("0", "1"):
            raise ParseError(f"label must be 0 or 1, got {lab!r}", line)
        ids.append(cid)
        groups.append(g)
        labels.append(int(lab))
        orig.append(_parse_score(row[3], "score_original", line, optional=False))
        cand.append(_parse_score(row[4], "score_candidate_llm", line, optional=True))
        hirer.append([_parse_score(row[5 + j], header[5 + j], line, optional=True) for j in range(k)])
    if not ids:
        raise ParseError("score table has no rows", 2)
    return ScoreTable(ids, np.array(groups, dtype="<U1"), np.array(labels, dtype=np.int8),
                      np.array(orig), np.array(cand), np.array(hirer, dtype=float).reshape(len(ids), k))


def read_score_table(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return parse_score_table(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"score table not found: {path}") from None
