"""Counter-based random streams.

Every draw is addressed by ``(seed, stream, index)``: rows are generated in
fixed-size blocks, each block from its own Philox key.  Any slice of a
stream is therefore reproducible on its own, so results do not depend on
how work is split across calls, chunks or workers.
"""

from __future__ import annotations

import numpy as np

BLOCK = 4096
_MASK64 = (1 << 64) - 1

# stream identifiers, one per consumer
MC_PC = 1
SWEEP = 2
CALIBRATION = 3
COVERAGE = 4
HIT_MISS = 5
CATALOG = 6


def _generator(seed, stream, block):
    key = (int(seed) & _MASK64) | (int(stream) & 0xFFFFFFFF) << 64 | (int(block) & 0xFFFFFFFF) << 96
    return np.random.Generator(np.random.Philox(key=key))


def _draw(seed, stream, start, count, width, kind):
    out = np.empty((count, width))
    row = start
    while row < start + count:
        block, offset = divmod(row, BLOCK)
        take = min(BLOCK - offset, start + count - row)
        gen = _generator(seed, stream, block)
        if kind == "normal":
            values = gen.standard_normal((BLOCK, width))
        else:
            values = gen.random((BLOCK, width))
        out[row - start : row - start + take] = values[offset : offset + take]
        row += take
    return out


def uniforms(seed, stream, start, count, width=1):
    """Rows ``start .. start + count`` of a stream of U[0, 1) rows of ``width``."""
    return _draw(seed, stream, start, count, width, "uniform")


def normals(seed, stream, start, count, width=1):
    """Rows ``start .. start + count`` of a stream of standard normal rows."""
    return _draw(seed, stream, start, count, width, "normal")
