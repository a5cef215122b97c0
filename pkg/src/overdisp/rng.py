"""Per-replication random streams.

A stream is keyed by ``(master_seed, cell_id, rep)``. The triple is folded
into one 64-bit key with the SplitMix64 finaliser::

    key = mix(mix(mix(master_seed) ^ cell_id) ^ rep)
    mix(x): x += 0x9E3779B97F4A7C15
            x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
            x = (x ^ (x >> 27)) * 0x94D049BB133111EB
            return x ^ (x >> 31)            # all arithmetic mod 2**64

and the key seeds numpy's PCG64 (via ``SeedSequence``). Every variate in the
package is built from the stream's uniforms, so draws depend only on the
triple, never on scheduling.
"""
import math

import numpy as np

_MASK = (1 << 64) - 1
_BLOCK = 256


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def stream_key(master_seed, cell_id, rep):
    k = splitmix64(int(master_seed) & _MASK)
    k = splitmix64(k ^ (int(cell_id) & _MASK))
    return splitmix64(k ^ (int(rep) & _MASK))


class RngStream:
    """Uniform and normal variates for one replication. Not thread-safe."""

    def __init__(self, master_seed, cell_id=0, rep=0):
        self.key = stream_key(master_seed, cell_id, rep)
        self._gen = np.random.Generator(np.random.PCG64(self.key))
        self._buf = []
        self._pos = 0
        self._spare = None

    def uniform(self):
        """Next uniform on (0, 1]."""
        if self._pos == len(self._buf):
            self._buf = (1.0 - self._gen.random(_BLOCK)).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def normal(self):
        """Standard normal by Box-Muller; the second variate is cached."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        r = math.sqrt(-2.0 * math.log(self.uniform()))
        theta = 2.0 * math.pi * self.uniform()
        self._spare = r * math.sin(theta)
        return r * math.cos(theta)
