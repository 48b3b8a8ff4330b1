"""Set-associative LRU metadata cache, write-back and write-allocate, with optional sectoring."""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import constants
from model.scheme_model import CacheStats

logger = logging.getLogger(__name__)

Transfer = tuple[int, int]  # (address, nbytes)


@dataclass
class _Line:
    valid: set[int] = field(default_factory=set)
    dirty: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class CacheAccess:
    hit: bool
    fill: Transfer | None = None
    writebacks: tuple[Transfer, ...] = ()


class MetadataCache:
    """
    LRU order is kept per set in an OrderedDict keyed by line index (oldest first).

    With sector_bytes < line_bytes a line is filled and written back sector by sector.
    write_fills=False means a write always overwrites a whole sector, so a write
    miss allocates the sector without reading it first.
    """

    def __init__(
        self,
        name: str,
        capacity_bytes: int,
        line_bytes: int = constants.CACHE_LINE_BYTES,
        ways: int = constants.CACHE_WAYS,
        sector_bytes: int | None = None,
        write_fills: bool = True,
    ):
        sector_bytes = sector_bytes or line_bytes
        if line_bytes % sector_bytes:
            raise ValueError("sector size must divide the line size")
        n_lines = capacity_bytes // line_bytes
        if n_lines < ways:
            raise ValueError(f"{name}: {capacity_bytes} B cannot hold one {ways}-way set of {line_bytes} B lines")
        self.name = name
        self.capacity_bytes = capacity_bytes
        self.line_bytes = line_bytes
        self.ways = ways
        self.sector_bytes = sector_bytes
        self.write_fills = write_fills
        self.n_sets = n_lines // ways
        self.sets: list[OrderedDict[int, _Line]] = [OrderedDict() for _ in range(self.n_sets)]
        self.stats = CacheStats(name=name, capacity_bytes=capacity_bytes)
        self._valid_sectors = 0

    def _locate(self, address: int) -> tuple[OrderedDict[int, _Line], int, int]:
        line_index = address // self.line_bytes
        sector = (address % self.line_bytes) // self.sector_bytes
        return self.sets[line_index % self.n_sets], line_index, sector

    def _sector_address(self, line_index: int, sector: int) -> int:
        return line_index * self.line_bytes + sector * self.sector_bytes

    def _dirty_runs(self, line_index: int, line: _Line) -> list[Transfer]:
        runs: list[Transfer] = []
        for sector in sorted(line.dirty):
            address = self._sector_address(line_index, sector)
            if runs and runs[-1][0] + runs[-1][1] == address:
                runs[-1] = (runs[-1][0], runs[-1][1] + self.sector_bytes)
            else:
                runs.append((address, self.sector_bytes))
        return runs

    def _write_back(self, line_index: int, line: _Line) -> list[Transfer]:
        runs = self._dirty_runs(line_index, line)
        for _, nbytes in runs:
            self.stats.writebacks += 1
            self.stats.writeback_bytes += nbytes
        line.dirty.clear()
        return runs

    def _set_dirty(self, line: _Line, sector: int) -> None:
        if sector not in line.dirty:
            line.dirty.add(sector)
            self.stats.dirty_bytes_created += self.sector_bytes

    def access(self, address: int, write: bool = False) -> CacheAccess:
        cache_set, line_index, sector = self._locate(address)
        self.stats.lookups += 1
        writebacks: list[Transfer] = []

        line = cache_set.get(line_index)
        if line is not None:
            cache_set.move_to_end(line_index)
        else:
            if len(cache_set) >= self.ways:
                victim_index, victim = cache_set.popitem(last=False)
                writebacks.extend(self._write_back(victim_index, victim))
                self._valid_sectors -= len(victim.valid)
            line = cache_set[line_index] = _Line()

        hit = sector in line.valid
        fill = None
        if hit:
            self.stats.hits += 1
        else:
            self.stats.misses += 1
            if not write or self.write_fills:
                fill = (self._sector_address(line_index, sector), self.sector_bytes)
                self.stats.fill_bytes += self.sector_bytes
            line.valid.add(sector)
            self._valid_sectors += 1
            self.stats.peak_occupancy_bytes = max(self.stats.peak_occupancy_bytes, self.occupancy_bytes)
        if write:
            self._set_dirty(line, sector)
        return CacheAccess(hit=hit, fill=fill, writebacks=tuple(writebacks))

    def mark_dirty(self, address: int) -> bool:
        """Dirty a resident sector without touching LRU order or counters."""
        cache_set, line_index, sector = self._locate(address)
        line = cache_set.get(line_index)
        if line is None or sector not in line.valid:
            return False
        self._set_dirty(line, sector)
        return True

    def flush(self) -> list[Transfer]:
        writebacks: list[Transfer] = []
        for cache_set in self.sets:
            for line_index, line in cache_set.items():
                writebacks.extend(self._write_back(line_index, line))
        if writebacks:
            logger.debug("%s: flushed %d dirty runs", self.name, len(writebacks))
        return writebacks

    @property
    def occupancy_bytes(self) -> int:
        return self._valid_sectors * self.sector_bytes
