"""Pixel-query access layer.

Testers never touch image storage directly; they go through a PixelOracle
that answers point probes, counts every probe (with multiplicity), and can
optionally keep the full probe log.  The oracle also virtually pads its
source with white pixels up to a larger working side, so a tester can run on
the padded geometry while the backing data stays small.

Two access disciplines are supported:

* adaptive - probes are answered immediately, one call at a time, so later
  probes may depend on earlier answers.
* nonadaptive - the client first registers every position it may read
  (collect phase), then seals the oracle, which answers the whole batch at
  once; afterwards only registered positions can be read back.  The answered
  multiset is fixed at seal time, so the probe count cannot depend on the
  image contents.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from .image import Image


class OutOfRange(IndexError):
    """A probe lies outside the oracle's coordinate range."""


class PhaseViolation(RuntimeError):
    """A nonadaptive oracle was used out of phase order."""


@runtime_checkable
class PixelSource(Protocol):
    """Anything that can answer vectorized pixel probes on an n x n grid."""

    @property
    def side(self) -> int: ...

    def probe_many(self, xs, ys): ...


class AllWhiteSource:
    """A blank image of arbitrary side, materializing nothing."""

    def __init__(self, side: int):
        if side < 1:
            raise ValueError("side must be at least 1")
        self._side = side

    @property
    def side(self) -> int:
        return self._side

    def probe_many(self, xs, ys):
        return np.zeros(np.shape(xs), dtype=bool)


class FunctionSource:
    """Pixel source computed by a vectorized predicate fn(xs, ys) -> bool[]."""

    def __init__(self, side: int, fn):
        if side < 1:
            raise ValueError("side must be at least 1")
        self._side = side
        self._fn = fn

    @property
    def side(self) -> int:
        return self._side

    def probe_many(self, xs, ys):
        return np.asarray(self._fn(np.asarray(xs), np.asarray(ys)), dtype=bool)


_CHUNK = 1 << 16


class _ProbeLog:
    """Append-only probe log stored as chunked coordinate arrays."""

    def __init__(self, record: bool):
        self.record = record
        self.count = 0
        self._chunks: list[tuple[np.ndarray, np.ndarray]] = []
        self._pending_x: list[int] = []
        self._pending_y: list[int] = []

    def add_one(self, x: int, y: int):
        self.count += 1
        if self.record:
            self._pending_x.append(x)
            self._pending_y.append(y)
            if len(self._pending_x) >= _CHUNK:
                self._flush()

    def add_many(self, xs: np.ndarray, ys: np.ndarray):
        self.count += len(xs)
        if self.record and len(xs):
            self._flush()
            self._chunks.append(
                (xs.astype(np.int64, copy=True), ys.astype(np.int64, copy=True))
            )

    def _flush(self):
        if self._pending_x:
            self._chunks.append(
                (
                    np.array(self._pending_x, dtype=np.int64),
                    np.array(self._pending_y, dtype=np.int64),
                )
            )
            self._pending_x = []
            self._pending_y = []

    def positions(self):
        """All logged probes in order as (xs, ys) arrays."""
        if not self.record:
            raise ValueError("probe log was not recorded")
        self._flush()
        if not self._chunks:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy()
        xs = np.concatenate([c[0] for c in self._chunks])
        ys = np.concatenate([c[1] for c in self._chunks])
        return xs, ys


class PixelOracle:
    """Counting pixel-probe front end over a PixelSource.

    side gives the working grid; when it exceeds the source side, the extra
    ring of positions answers white.  Every probe is counted, duplicates
    included.
    """

    def __init__(self, source: PixelSource, side: int | None = None,
                 record_log: bool = True):
        if isinstance(source, np.ndarray):
            source = Image(source)
        self._source = source
        self._side = source.side if side is None else int(side)
        if self._side < source.side:
            raise ValueError(
                f"working side {self._side} smaller than source side {source.side}"
            )
        self._log = _ProbeLog(record_log)

    @property
    def side(self) -> int:
        return self._side

    @property
    def count(self) -> int:
        """Total probes answered so far, with multiplicity."""
        return self._log.count

    def log_positions(self):
        return self._log.positions()

    def distinct_count(self) -> int:
        xs, ys = self.log_positions()
        if len(xs) == 0:
            return 0
        return len(np.unique(xs * self._side + ys))

    def _check_bounds(self, xs, ys):
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        if len(xs) != len(ys):
            raise ValueError("coordinate arrays must have equal length")
        if len(xs) and (
            xs.min() < 0 or ys.min() < 0
            or xs.max() >= self._side or ys.max() >= self._side
        ):
            raise OutOfRange(
                f"probe outside [0, {self._side})^2"
            )
        return xs, ys

    def _answer(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        inner = self._source.side
        if inner == self._side:
            return np.asarray(self._source.probe_many(xs, ys), dtype=bool)
        out = np.zeros(len(xs), dtype=bool)
        mask = (xs < inner) & (ys < inner)
        if mask.any():
            out[mask] = self._source.probe_many(xs[mask], ys[mask])
        return out

    def query(self, x: int, y: int) -> bool:
        """Answer one probe immediately (adaptive use)."""
        x = int(x)
        y = int(y)
        if not (0 <= x < self._side and 0 <= y < self._side):
            raise OutOfRange(f"probe ({x}, {y}) outside [0, {self._side})^2")
        self._log.add_one(x, y)
        inner = self._source.side
        if x >= inner or y >= inner:
            return False
        return bool(
            self._source.probe_many(
                np.array([x], dtype=np.int64), np.array([y], dtype=np.int64)
            )[0]
        )

    def query_many(self, xs, ys) -> np.ndarray:
        """Answer a batch of probes immediately (adaptive use)."""
        xs, ys = self._check_bounds(xs, ys)
        self._log.add_many(xs, ys)
        return self._answer(xs, ys)


class NonadaptiveOracle(PixelOracle):
    """PixelOracle enforcing the collect / seal / read phase discipline.

    Registration and read-back stream in matching chunks so the full
    position multiset is never held in memory: collect() counts a chunk and
    returns a token carrying its length and checksum, seal() freezes the
    multiset, and answers() replays the same chunk to read its colors.  The
    checksum ties each read-back to the registration it claims to replay,
    which keeps the query plan image-independent while allowing the caller
    to regenerate positions deterministically instead of storing them.
    """

    def __init__(self, source: PixelSource, side: int | None = None,
                 record_log: bool = True):
        super().__init__(source, side=side, record_log=record_log)
        self._sealed = False
        self._footprints: list[tuple[int, int]] = []
        self._registered_codes: set | None = None

    @property
    def sealed(self) -> bool:
        return self._sealed

    def _footprint(self, xs: np.ndarray, ys: np.ndarray) -> tuple[int, int]:
        codes = xs.astype(np.uint64) * np.uint64(self._side) + ys.astype(np.uint64)
        return len(xs), int(codes.sum(dtype=np.uint64))

    def collect(self, xs, ys) -> int:
        """Register a chunk of positions; returns a read-back token."""
        if self._sealed:
            raise PhaseViolation("collect after seal")
        xs, ys = self._check_bounds(xs, ys)
        self._log.add_many(xs, ys)
        self._footprints.append(self._footprint(xs, ys))
        return len(self._footprints) - 1

    def seal(self):
        """Freeze the registered multiset; only read-back is allowed after."""
        if self._sealed:
            raise PhaseViolation("oracle already sealed")
        self._sealed = True

    def answers(self, token: int, xs, ys) -> np.ndarray:
        """Colors for a registered chunk, replayed position for position."""
        if not self._sealed:
            raise PhaseViolation("read before seal")
        if not 0 <= token < len(self._footprints):
            raise PhaseViolation(f"unknown chunk token {token}")
        xs, ys = self._check_bounds(xs, ys)
        if self._footprint(xs, ys) != self._footprints[token]:
            raise PhaseViolation(
                f"chunk {token} read-back does not match its registration"
            )
        return self._answer(xs, ys)

    def _registered(self) -> set:
        if self._registered_codes is None:
            if not self._log.record:
                raise PhaseViolation(
                    "single-position read-back requires record_log=True"
                )
            xs, ys = self.log_positions()
            self._registered_codes = set(
                (xs * self._side + ys).tolist()
            )
        return self._registered_codes

    def query(self, x: int, y: int) -> bool:
        """Read back one registered position (recorded oracles only)."""
        if not self._sealed:
            raise PhaseViolation("read before seal")
        x = int(x)
        y = int(y)
        if not (0 <= x < self._side and 0 <= y < self._side):
            raise OutOfRange(f"probe ({x}, {y}) outside [0, {self._side})^2")
        if x * self._side + y not in self._registered():
            raise PhaseViolation(f"position ({x}, {y}) was never registered")
        inner = self._source.side
        if x >= inner or y >= inner:
            return False
        return bool(
            self._source.probe_many(
                np.array([x], dtype=np.int64), np.array([y], dtype=np.int64)
            )[0]
        )

    def query_many(self, xs, ys) -> np.ndarray:
        if not self._sealed:
            raise PhaseViolation("read before seal")
        xs, ys = self._check_bounds(xs, ys)
        registered = self._registered()
        for x, y in zip(xs.tolist(), ys.tolist()):
            if x * self._side + y not in registered:
                raise PhaseViolation(f"position ({x}, {y}) was never registered")
        return self._answer(xs, ys)
