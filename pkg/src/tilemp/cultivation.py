"""Magic-state cultivation on idle ancilla tiles.

Every ancilla tile is Idle, Routing (claimed by a workload), Cultivating or
holding a ready magic state.  The field is stored lazily: a cultivating tile
keeps the cycle its current run started and the cycle it will be ready, so
the engine can jump between events without stepping every tile each cycle.
:func:`tick_tiles` is the explicit one-cycle transition and agrees with the
lazy view at every cycle.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

NEVER = np.int64(2**62)


class TilePhase(str, Enum):
    IDLE = "Idle"
    ROUTING = "Routing"
    CULTIVATING = "Cultivating"
    READY = "ReadyMagic"


LEGAL_TILE_TRANSITIONS = {
    (TilePhase.IDLE, TilePhase.ROUTING),
    (TilePhase.IDLE, TilePhase.CULTIVATING),
    (TilePhase.CULTIVATING, TilePhase.IDLE),
    (TilePhase.CULTIVATING, TilePhase.READY),
    (TilePhase.CULTIVATING, TilePhase.ROUTING),
    (TilePhase.READY, TilePhase.IDLE),
    (TilePhase.READY, TilePhase.ROUTING),
    (TilePhase.ROUTING, TilePhase.IDLE),
}


@dataclass(frozen=True)
class CultivationParams:
    latency: int = 26
    p_fail: float = 0.0


class CultivationField:
    """Lazy per-tile cultivation state over a fixed set of ancilla tiles.

    ``start[a]`` is the cycle the current cultivation run began (-1 when the
    tile is Idle or Routing) and ``ready_at[a]`` the cycle it first holds a
    ready state, accounting for any post-selection failures drawn at start.
    """

    def __init__(self, n, tiles, params: CultivationParams = CultivationParams(), rng=None, t0=0, pre_ready=False):
        self.n = n
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.tiles = np.asarray(sorted(tiles), dtype=np.int64)
        self.member = np.zeros(n, dtype=np.bool_)
        self.member[self.tiles] = True
        self.claimed = np.zeros(n, dtype=np.bool_)
        self.start = np.full(n, -1, dtype=np.int64)
        self.ready_at = np.full(n, NEVER, dtype=np.int64)
        self.consumed = 0
        self.discarded = 0
        if pre_ready:
            self.start[self.tiles] = t0 - params.latency
            self.ready_at[self.tiles] = t0
        else:
            self._begin(self.tiles, t0 + 1)

    def _draw_ready(self, s, count):
        lat = self.params.latency
        if self.params.p_fail <= 0.0:
            return np.full(count, s + lat, dtype=np.int64)
        # failures before the first escape; each failed run costs one extra idle cycle
        fails = self.rng.geometric(1.0 - self.params.p_fail, size=count) - 1
        return s + fails * (lat + 1) + lat

    def _begin(self, tiles, s):
        tiles = np.asarray(tiles, dtype=np.int64)
        if tiles.size == 0:
            return
        tiles = np.sort(tiles)
        self.start[tiles] = s
        self.ready_at[tiles] = self._draw_ready(s, tiles.size)

    # -- views -------------------------------------------------------------
    def ready_mask(self, t):
        return self.member & ~self.claimed & (self.ready_at <= t)

    def ready_set(self, t):
        return set(np.flatnonzero(self.ready_mask(t)).tolist())

    def phase(self, a, t):
        if not self.member[a]:
            raise KeyError(f"tile {a} is not a cultivation tile")
        if self.claimed[a]:
            return TilePhase.ROUTING, 0
        if self.ready_at[a] <= t:
            return TilePhase.READY, 0
        s = int(self.start[a])
        if s < 0 or t < s:
            return TilePhase.IDLE, 0
        lat = self.params.latency
        # position inside the current attempt (attempt length lat, plus one idle cycle between failures)
        k = (t - s) % (lat + 1)
        if k == lat:
            return TilePhase.IDLE, 0
        return TilePhase.CULTIVATING, k

    def next_ready(self, t):
        """Earliest cycle > t at which an unclaimed tile becomes ready (NEVER if none)."""
        m = self.member & ~self.claimed & (self.ready_at > t)
        return int(self.ready_at[m].min()) if m.any() else int(NEVER)

    def escapes(self, t):
        """Ready states produced up to t: consumed, discarded by claims, or still waiting."""
        return self.consumed + self.discarded + int(np.count_nonzero(self.ready_mask(t)))

    # -- transitions ---------------------------------------------------------
    def claim(self, tiles, t):
        """Routing claims preempt cultivation and discard ready states."""
        tiles = np.asarray(list(tiles), dtype=np.int64)
        if tiles.size == 0:
            return
        tiles = tiles[self.member[tiles]]
        self.discarded += int(np.count_nonzero(self.ready_mask(t)[tiles]))
        self.claimed[tiles] = True
        self.start[tiles] = -1
        self.ready_at[tiles] = NEVER

    def release(self, tiles, t):
        """Released tiles are Idle at t and cultivate from t + 1."""
        tiles = np.asarray(list(tiles), dtype=np.int64)
        if tiles.size == 0:
            return
        tiles = tiles[self.member[tiles]]
        self.claimed[tiles] = False
        self._begin(tiles, t + 1)

    def consume(self, tiles, t):
        tiles = np.asarray(list(tiles), dtype=np.int64)
        if tiles.size == 0:
            return
        if not np.all(self.ready_mask(t)[tiles]):
            raise ValueError("consuming a tile that holds no ready state")
        self.consumed += int(tiles.size)
        self._begin(tiles, t + 1)


def tick_tiles(phases, progress, claims, latency=26, p_fail=0.0, rng=None, consumes=()):
    """One explicit cycle of the tile state machine.

    ``phases``/``progress`` map tile -> (TilePhase, cycles in phase);
    ``claims`` is the set of tiles claimed for routing this cycle (claims
    win over everything); ``consumes`` holds ready tiles measured out this
    cycle.  Returns new ``(phases, progress)`` dicts.
    """
    new_p, new_k = {}, {}
    for a, ph in phases.items():
        k = progress.get(a, 0)
        if a in claims:
            new_p[a], new_k[a] = TilePhase.ROUTING, 0
        elif ph is TilePhase.ROUTING or ph is TilePhase.IDLE:
            # released routing tiles idle for a cycle before cultivating
            new_p[a], new_k[a] = (TilePhase.IDLE, 0) if ph is TilePhase.ROUTING else (TilePhase.CULTIVATING, 0)
        elif ph is TilePhase.CULTIVATING:
            if k + 1 >= latency:
                failed = p_fail > 0 and rng is not None and rng.random() < p_fail
                new_p[a], new_k[a] = (TilePhase.IDLE, 0) if failed else (TilePhase.READY, 0)
            else:
                new_p[a], new_k[a] = TilePhase.CULTIVATING, k + 1
        elif a in consumes:
            new_p[a], new_k[a] = TilePhase.IDLE, 0
        else:
            new_p[a], new_k[a] = TilePhase.READY, 0
    return new_p, new_k


def assign_magic(ready, mu, dvec):
    """The ``mu`` ready tiles nearest the workload (ties by tile id), or None to delay."""
    if mu < 1:
        raise ValueError("mu must be at least 1")
    if len(ready) < mu:
        return None
    return sorted(ready, key=lambda a: (int(dvec[a]), a))[:mu]
