"""Reading inputs, writing results atomically, and the JSON result document."""

import csv
import json
import os
import re
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ZData
from .regression import RegressionData

SCHEMA_VERSION = "1"
INTERCEPT_NAME = "(Intercept)"

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class InputError(ValueError):
    """Malformed input file; ``line`` / ``column`` locate the problem."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    @property
    def diagnostics(self):
        return {k: v for k, v in (("line", self.line), ("column", self.column)) if v is not None}


def parse_number(token):
    """Locale-independent float parsing; '.' is the only decimal mark."""
    token = token.strip().replace("−", "-")
    if not _NUMBER.fullmatch(token):
        raise ValueError(f"not a number: {token!r}")
    return float(token)


def read_zdata(path):
    """Read one z-value per line.

    Blank lines and lines starting with '#' are skipped.  A single
    non-numeric first line is taken as a CSV header.
    """
    path = Path(path)
    values = []
    seen_data = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "," in line:
                raise InputError(f"{path}:{lineno}: expected a single column, got {line!r}",
                                 line=lineno)
            try:
                values.append(parse_number(line))
            except ValueError:
                if not seen_data:
                    seen_data = True
                    continue
                raise InputError(f"{path}:{lineno}: non-numeric value {line!r}", line=lineno)
            seen_data = True
    if not values:
        raise InputError(f"{path}: no z-values found")
    return ZData(np.array(values), label=path.stem)


def read_regression_csv(path, response, intercept=True):
    """Read a CSV with a header into ``RegressionData``.

    The ``response`` column becomes ``y``; every other column goes into
    ``X``, preceded by an intercept column unless ``intercept`` is false.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        raise InputError(
            f"{path}: response column {response!r} not found; available columns: "
            + ", ".join(header)
        )
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}", line=i)
        for j, cell in enumerate(row):
            try:
                data[i - 2, j] = parse_number(cell)
            except ValueError:
                raise InputError(
                    f"{path}: row {i}, column {header[j]!r}: non-numeric value {cell!r}",
                    line=i, column=header[j],
                ) from None
    r = header.index(response)
    y = data[:, r]
    names = [h for j, h in enumerate(header) if j != r]
    X = np.delete(data, r, axis=1)
    if intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = [INTERCEPT_NAME] + names
    return RegressionData(X, y, tuple(names))


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


@dataclass
class ResultDocument:
    """Versioned JSON envelope around a result payload."""

    kind: str
    label: str
    payload: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        self.payload = _plain(self.payload)

    def to_dict(self):
        return {"schema_version": self.schema_version, "kind": self.kind,
                "label": self.label, **self.payload}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        version = d.pop("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version!r}")
        return cls(kind=d.pop("kind"), label=d.pop("label"), payload=d, schema_version=version)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def error_document(exc):
    diagnostics = getattr(exc, "diagnostics", None) or {}
    return {
        "schema_version": SCHEMA_VERSION,
        "error": {"type": type(exc).__name__, "message": str(exc),
                  "diagnostics": _plain(diagnostics)},
    }


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_files(directory, files):
    """Write a mapping ``name -> text`` into ``directory``.

    Everything is staged in a sibling temporary directory first, so a
    failure part-way leaves none of the target files behind.
    """
    directory = Path(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{directory.name}.", dir=directory.parent))
    try:
        for name, text in files.items():
            with open(stage / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        directory.mkdir(exist_ok=True)
        for name in files:
            os.replace(stage / name, directory / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def format_values(values):
    return "".join(f"{float(v)!r}\n" for v in values)
