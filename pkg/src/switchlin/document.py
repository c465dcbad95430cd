"""System documents: YAML files holding matrices, a signal, and metadata.

A continuous document::

    format_version: 1
    mode: continuous
    name: "scalar pair"
    description: ""
    matrices:
      - [[-1.0]]
      - [[0.5]]
    signal:
      prefix: []
      tail: [[1, 2.0], [2, 1.0]]

Discrete documents list bare indices in ``prefix``/``tail``. Hybrid
documents add ``jump_matrices`` and nest the two schedules as
``signal: {flow: {...}, jump: {...}}``. Omitting ``tail`` (or writing
``null``) makes a signal finite.

:func:`dump_document` writes a canonical form; loading and dumping it again
reproduces the same bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import yaml

from .errors import DocumentError, SwitchlinError
from .model import (CONTINUOUS, DISCRETE, ContinuousSignal, DiscreteSignal, HybridSignal,
                    HybridSystem, SwitchedSystem)

FORMAT_VERSION = 1
HYBRID = "hybrid"
MODES = (CONTINUOUS, DISCRETE, HYBRID)


@dataclass(frozen=True, eq=False)
class SystemDocument:
    mode: str
    matrices: tuple
    signal: Union[ContinuousSignal, DiscreteSignal, HybridSignal]
    jump_matrices: Optional[tuple] = None
    name: str = ""
    description: str = ""
    format_version: int = FORMAT_VERSION

    def system(self) -> Union[SwitchedSystem, HybridSystem]:
        if self.mode == HYBRID:
            return HybridSystem(SwitchedSystem(self.matrices, CONTINUOUS),
                                SwitchedSystem(self.jump_matrices, DISCRETE))
        return SwitchedSystem(self.matrices, self.mode)

    @property
    def dim(self) -> int:
        return np.asarray(self.matrices[0]).shape[0]

    def __eq__(self, other):
        if not isinstance(other, SystemDocument):
            return NotImplemented
        return dump_document(self) == dump_document(other)

    __hash__ = None


def _marks(node, path=(), out=None):
    """Map field paths to the source position of their YAML node."""
    out = {} if out is None else out
    out[path] = node.start_mark
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            _marks(value, path + (str(key.value),), out)
    elif isinstance(node, yaml.SequenceNode):
        for k, value in enumerate(node.value):
            _marks(value, path + (k,), out)
    return out


class _Reader:
    def __init__(self, marks):
        self.marks = marks

    def fail(self, message, path):
        p = tuple(path)
        while p not in self.marks and p:
            p = p[:-1]
        mark = self.marks.get(p)
        field = ".".join(str(x) for x in path) or None
        if mark is None:
            raise DocumentError(message, field=field)
        raise DocumentError(message, line=mark.line + 1, column=mark.column + 1, field=field)

    def number(self, value, path):
        if isinstance(value, bool):
            self.fail("expected a number, got a boolean", path)
        if isinstance(value, (int, float)):
            x = float(value)
        elif isinstance(value, str):
            try:
                x = float(value)
            except ValueError:
                self.fail(f"expected a number, got {value!r}", path)
        else:
            self.fail(f"expected a number, got {type(value).__name__}", path)
        if not math.isfinite(x):
            self.fail("number must be finite", path)
        return x

    def integer(self, value, path):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"expected an integer index, got {value!r}", path)
        return value

    def seq(self, value, path, what="a list"):
        if not isinstance(value, list):
            self.fail(f"expected {what}", path)
        return value

    def matrix(self, value, path):
        if not isinstance(value, list):
            return ((self.number(value, path),),)
        rows = []
        for r, row in enumerate(self.seq(value, path, "a list of rows")):
            rows.append(tuple(self.number(v, path + [r, c])
                              for c, v in enumerate(self.seq(row, path + [r], "a row list"))))
        if not rows or any(len(row) != len(rows) for row in rows):
            self.fail(f"matrix must be square and non-empty, got {len(rows)} rows of lengths "
                      f"{[len(row) for row in rows]}", path)
        return tuple(rows)

    def matrices(self, value, path):
        mats = tuple(self.matrix(m, path + [k])
                     for k, m in enumerate(self.seq(value, path, "a list of matrices")))
        if not mats:
            self.fail("at least one matrix is required", path)
        dims = {len(m) for m in mats}
        if len(dims) != 1:
            self.fail(f"matrices have mixed dimensions {sorted(dims)}", path)
        return mats

    def _parts(self, value, path):
        if not isinstance(value, dict):
            self.fail("expected a mapping with 'prefix' and/or 'tail'", path)
        unknown = set(value) - {"prefix", "tail"}
        if unknown:
            self.fail(f"unknown signal keys {sorted(unknown)}", path)
        prefix = value.get("prefix") or []
        tail = value.get("tail")
        if not prefix and not tail:
            self.fail("signal needs a non-empty prefix or tail", path)
        return prefix, tail

    def continuous_signal(self, value, path):
        prefix, tail = self._parts(value, path)

        def pairs(items, sub):
            out = []
            for k, item in enumerate(self.seq(items, path + [sub])):
                p = path + [sub, k]
                if not isinstance(item, list) or len(item) != 2:
                    self.fail("expected an [index, duration] pair", p)
                out.append((self.integer(item[0], p + [0]), self.number(item[1], p + [1])))
            return tuple(out)

        return ContinuousSignal(prefix=pairs(prefix, "prefix"),
                                tail=None if tail is None else pairs(tail, "tail"))

    def discrete_signal(self, value, path):
        prefix, tail = self._parts(value, path)

        def indices(items, sub):
            return tuple(self.integer(v, path + [sub, k])
                         for k, v in enumerate(self.seq(items, path + [sub])))

        return DiscreteSignal(prefix=indices(prefix, "prefix"),
                              tail=None if tail is None else indices(tail, "tail"))


_KEYS = {"format_version", "mode", "name", "description", "matrices", "jump_matrices", "signal"}


def load_document(text: str) -> SystemDocument:
    """Parse document text; raises :class:`DocumentError` with a position."""
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            data = loader.construct_document(node) if node is not None else None
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise DocumentError(f"YAML syntax error: {exc.problem}",
                            line=mark.line + 1 if mark else None,
                            column=mark.column + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise DocumentError(f"YAML error: {exc}") from None
    if not isinstance(data, dict):
        raise DocumentError("document must be a mapping", line=1, column=1)
    r = _Reader(_marks(node))
    unknown = set(data) - _KEYS
    if unknown:
        r.fail(f"unknown keys {sorted(unknown)}", [sorted(unknown)[0]])
    for key in ("format_version", "mode", "matrices", "signal"):
        if key not in data:
            raise DocumentError(f"missing required key '{key}'", line=1, column=1, field=key)
    version = data["format_version"]
    if version != FORMAT_VERSION:
        r.fail(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})",
               ["format_version"])
    mode = data["mode"]
    if mode not in MODES:
        r.fail(f"mode must be one of {', '.join(MODES)}, got {mode!r}", ["mode"])
    name = data.get("name") or ""
    description = data.get("description") or ""
    for key, val in (("name", name), ("description", description)):
        if not isinstance(val, str):
            r.fail("expected a string", [key])
    matrices = r.matrices(data["matrices"], ["matrices"])
    jump = None
    sig = data["signal"]
    try:
        if mode == HYBRID:
            if "jump_matrices" not in data:
                raise DocumentError("hybrid documents need 'jump_matrices'", line=1, column=1,
                                    field="jump_matrices")
            jump = r.matrices(data["jump_matrices"], ["jump_matrices"])
            if len(jump[0]) != len(matrices[0]):
                r.fail("jump matrices must match the flow dimension", ["jump_matrices"])
            if not isinstance(sig, dict) or set(sig) != {"flow", "jump"}:
                r.fail("hybrid signal needs exactly 'flow' and 'jump' entries", ["signal"])
            signal = HybridSignal(r.continuous_signal(sig["flow"], ["signal", "flow"]),
                                  r.discrete_signal(sig["jump"], ["signal", "jump"]))
        else:
            if "jump_matrices" in data:
                r.fail("'jump_matrices' only belongs in hybrid documents", ["jump_matrices"])
            if mode == CONTINUOUS:
                signal = r.continuous_signal(sig, ["signal"])
            else:
                signal = r.discrete_signal(sig, ["signal"])
    except DocumentError:
        raise
    except SwitchlinError as exc:
        r.fail(str(exc), ["signal"])
    return SystemDocument(mode=mode, matrices=matrices, jump_matrices=jump, signal=signal,
                          name=name, description=description, format_version=version)


def read_document(path) -> SystemDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return load_document(fh.read())


def format_float(x: float) -> str:
    """Shortest round-trip repr, spelled so YAML resolves it as a float."""
    s = repr(float(x))
    if "e" in s:
        mant, exp = s.split("e")
        if "." not in mant:
            mant += ".0"
        if exp[0] not in "+-":
            exp = "+" + exp
        s = f"{mant}e{exp}"
    return s


def _matrix_text(M):
    return "[" + ", ".join("[" + ", ".join(format_float(v) for v in row) + "]"
                           for row in np.asarray(M, dtype=float)) + "]"


def _cont_signal_lines(sig, indent):
    pad = " " * indent

    def pairs(items):
        return "[" + ", ".join(f"[{i}, {format_float(d)}]" for i, d in items) + "]"

    tail = "null" if sig.tail is None else pairs(sig.tail)
    return [f"{pad}prefix: {pairs(sig.prefix)}", f"{pad}tail: {tail}"]


def _disc_signal_lines(sig, indent):
    pad = " " * indent

    def ints(items):
        return "[" + ", ".join(str(i) for i in items) + "]"

    tail = "null" if sig.tail is None else ints(sig.tail)
    return [f"{pad}prefix: {ints(sig.prefix)}", f"{pad}tail: {tail}"]


def dump_document(doc: SystemDocument) -> str:
    lines = [f"format_version: {doc.format_version}",
             f"mode: {doc.mode}",
             f"name: {json.dumps(doc.name)}",
             f"description: {json.dumps(doc.description)}",
             "matrices:"]
    lines += [f"  - {_matrix_text(M)}" for M in doc.matrices]
    if doc.mode == HYBRID:
        lines.append("jump_matrices:")
        lines += [f"  - {_matrix_text(M)}" for M in doc.jump_matrices]
        lines += ["signal:", "  flow:"] + _cont_signal_lines(doc.signal.sigma1, 4)
        lines += ["  jump:"] + _disc_signal_lines(doc.signal.sigma2, 4)
    elif doc.mode == CONTINUOUS:
        lines += ["signal:"] + _cont_signal_lines(doc.signal, 2)
    else:
        lines += ["signal:"] + _disc_signal_lines(doc.signal, 2)
    return "\n".join(lines) + "\n"


def write_document(doc: SystemDocument, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_document(doc))


def document_from(system: SwitchedSystem, signal, name="", description="") -> SystemDocument:
    return SystemDocument(mode=system.role, matrices=tuple(system.matrices), signal=signal,
                          name=name, description=description)
