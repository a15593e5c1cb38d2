"""Frequency-of-frequencies tables and the ratio-plot regression points.

A frequency table records, for each count ``x >= 1``, how many units were
observed exactly ``x`` times (``f_x``). Units observed zero times are never
recorded. Some sources collapse the right tail into a single
"more than ``x``" cell; that mass is kept separately as ``tail``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "FrequencyTable",
    "RatioPoints",
    "FrequencyTableError",
    "parse_frequency_table",
    "format_frequency_table",
    "read_frequency_table",
    "truncate",
    "ratio_points",
]


class FrequencyTableError(ValueError):
    """Raised for malformed or inconsistent frequency-table input."""


class FrequencyTable:
    """Immutable sparse map ``count -> frequency``.

    Parameters
    ----------
    entries : mapping or iterable of (int, float)
        Counts ``x >= 1`` and their frequencies. Zero frequencies are dropped.
    tail : tuple (int, float), optional
        Collapsed tail ``(threshold, mass)`` meaning ``sum_{j > threshold} f_j
        = mass``. The threshold must be at least the largest exact count.
    name : str, optional
        Label used in reports.
    """

    __slots__ = ("_entries", "_tail", "_name")

    def __init__(self, entries, tail=None, name=None):
        items = entries.items() if isinstance(entries, Mapping) else entries
        clean = {}
        for x, f in items:
            if isinstance(x, bool) or int(x) != x:
                raise FrequencyTableError(f"count must be an integer, got {x!r}")
            x = int(x)
            f = float(f)
            if x < 1:
                raise FrequencyTableError(f"counts must be >= 1, got {x}")
            if not math.isfinite(f) or f < 0:
                raise FrequencyTableError(f"frequency for x={x} must be finite and >= 0")
            if x in clean:
                raise FrequencyTableError(f"duplicate count {x}")
            if f > 0:
                clean[x] = f
        if tail is not None:
            threshold, mass = int(tail[0]), float(tail[1])
            if clean and threshold < max(clean):
                raise FrequencyTableError(
                    f"tail threshold {threshold} is below the largest exact count {max(clean)}"
                )
            if not math.isfinite(mass) or mass < 0:
                raise FrequencyTableError("tail mass must be finite and >= 0")
            tail = (threshold, mass) if mass > 0 else None
        if not clean and tail is None:
            raise FrequencyTableError("empty frequency table")
        self._entries = dict(sorted(clean.items()))
        self._tail = tail
        self._name = name

    # -- read-only views ---------------------------------------------------
    @property
    def name(self):
        return self._name

    @property
    def tail(self):
        """Collapsed tail ``(threshold, mass)`` or ``None``."""
        return self._tail

    @property
    def entries(self) -> dict[int, float]:
        return dict(self._entries)

    @property
    def counts(self) -> np.ndarray:
        return np.fromiter(self._entries.keys(), dtype=int, count=len(self._entries))

    @property
    def freqs(self) -> np.ndarray:
        return np.fromiter(self._entries.values(), dtype=float, count=len(self._entries))

    @property
    def n(self) -> float:
        """Number of observed units, collapsed tail included."""
        return sum(self._entries.values()) + (self._tail[1] if self._tail else 0.0)

    @property
    def max_count(self) -> int:
        """Largest count with an exact, positive frequency."""
        return max(self._entries) if self._entries else 0

    def f(self, x: int) -> float:
        return self._entries.get(int(x), 0.0)

    __getitem__ = f

    def dense(self, upto: int) -> np.ndarray:
        """Frequencies ``f_0 .. f_upto`` as an array (``f_0`` is always 0)."""
        out = np.zeros(upto + 1)
        for x, f in self._entries.items():
            if x <= upto:
                out[x] = f
        return out

    def scaled(self, c: float) -> "FrequencyTable":
        """Return the table with every frequency multiplied by ``c > 0``."""
        if not c > 0:
            raise ValueError("scale factor must be positive")
        tail = (self._tail[0], self._tail[1] * c) if self._tail else None
        return FrequencyTable({x: f * c for x, f in self._entries.items()}, tail, self._name)

    def with_name(self, name) -> "FrequencyTable":
        return FrequencyTable(self._entries, self._tail, name)

    def __eq__(self, other):
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return self._entries == other._entries and self._tail == other._tail

    def __hash__(self):
        return hash((tuple(self._entries.items()), self._tail))

    def __repr__(self):
        label = f"{self._name!r}, " if self._name else ""
        tail = f", tail={self._tail}" if self._tail else ""
        return f"FrequencyTable({label}n={self.n:g}, max_count={self.max_count}{tail})"


@dataclass(frozen=True)
class RatioPoints:
    """Regression data ``(x, log((x+1) f_{x+1} / f_x))``.

    ``skipped`` lists the ``x`` in ``1..source_m-1`` whose ratio is undefined
    because ``f_x`` or ``f_{x+1}`` is zero.
    """

    x: np.ndarray
    y: np.ndarray
    source_m: int
    skipped: tuple[int, ...] = field(default=())

    def __len__(self):
        return len(self.x)

    @property
    def ratios(self) -> np.ndarray:
        """The untransformed ratios ``(x+1) f_{x+1} / f_x``."""
        return np.exp(self.y)

    def __eq__(self, other):
        if not isinstance(other, RatioPoints):
            return NotImplemented
        return (
            self.source_m == other.source_m
            and self.skipped == other.skipped
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


def _parse_number(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FrequencyTableError(f"line {lineno}: {what} {token!r} is not numeric") from None
    if not math.isfinite(value):
        raise FrequencyTableError(f"line {lineno}: {what} must be finite")
    return value


def parse_frequency_table(text: str | Iterable[str], name=None) -> FrequencyTable:
    """Parse the two-column text format.

    Each record is ``x f_x``. A record of the form ``>x f`` (or ``> x f``)
    declares collapsed tail mass ``sum_{j>x} f_j = f``. Blank lines and lines
    starting with ``#`` are ignored. Frequencies must be integer valued.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    entries: dict[int, float] = {}
    tail = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        is_tail = line.startswith(">")
        if is_tail:
            line = line[1:].strip()
        parts = line.split()
        if len(parts) != 2:
            raise FrequencyTableError(f"line {lineno}: expected 'x f_x', got {raw!r}")
        try:
            x = int(parts[0])
        except ValueError:
            raise FrequencyTableError(f"line {lineno}: count {parts[0]!r} is not an integer") from None
        f = _parse_number(parts[1], lineno, "frequency")
        if f < 0:
            raise FrequencyTableError(f"line {lineno}: negative frequency {parts[1]}")
        if f != int(f):
            raise FrequencyTableError(f"line {lineno}: frequency {parts[1]} is not an integer")
        if is_tail:
            if tail is not None:
                raise FrequencyTableError(f"line {lineno}: more than one tail record")
            tail = (x, f)
            continue
        if x < 1:
            raise FrequencyTableError(f"line {lineno}: counts must be >= 1, got {x}")
        if x in entries:
            raise FrequencyTableError(f"line {lineno}: duplicate count {x}")
        entries[x] = f
    if not any(v > 0 for v in entries.values()) and (tail is None or tail[1] == 0):
        raise FrequencyTableError("empty frequency table")
    return FrequencyTable(entries, tail, name)


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def format_frequency_table(t: FrequencyTable, header: str | None = None) -> str:
    """Serialize ``t`` in ascending count order, one record per line."""
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"{x} {_fmt(f)}" for x, f in t.entries.items())
    if t.tail:
        lines.append(f">{t.tail[0]} {_fmt(t.tail[1])}")
    return "\n".join(lines) + "\n"


def read_frequency_table(path, name=None) -> FrequencyTable:
    with open(path, encoding="utf-8") as fh:
        return parse_frequency_table(fh.read(), name=name)


def truncate(t: FrequencyTable, m: int) -> tuple[FrequencyTable, float]:
    """Split ``t`` into the cells ``x <= m`` and the mass above ``m``.

    Raises ``ValueError`` for ``m < 2``, for ``m`` above a collapsed tail
    threshold, and when no count is ``<= m`` (an empty table is not
    representable).
    """
    if m < 2:
        raise ValueError(f"truncation point must be >= 2, got {m}")
    if t.tail and m > t.tail[0]:
        raise ValueError(
            f"cannot truncate at m={m}: counts above {t.tail[0]} are only known in aggregate"
        )
    head = {x: f for x, f in t.entries.items() if x <= m}
    tail_count = sum(f for x, f in t.entries.items() if x > m)
    if t.tail:
        tail_count += t.tail[1]
    if not head:
        raise ValueError(f"no observed counts at or below m={m}")
    return FrequencyTable(head, name=t.name), tail_count


def ratio_points(t: FrequencyTable, m: int) -> RatioPoints:
    """Log ratios ``log((x+1) f_{x+1} / f_x)`` for ``x = 1 .. m-1``.

    Only pairs with both frequencies positive produce a point; the rest are
    listed in ``skipped``.
    """
    if m < 2:
        raise ValueError(f"truncation point must be >= 2, got {m}")
    xs, ys, skipped = [], [], []
    for x in range(1, m):
        fx, fx1 = t.f(x), t.f(x + 1)
        if fx > 0 and fx1 > 0:
            xs.append(x)
            ys.append(math.log((x + 1) * fx1 / fx))
        else:
            skipped.append(x)
    return RatioPoints(np.array(xs, dtype=int), np.array(ys, dtype=float), m, tuple(skipped))
