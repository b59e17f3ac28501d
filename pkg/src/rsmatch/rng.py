"""Portable pseudo-random streams.

All randomness in rsmatch comes from the PCG64 generator (PCG XSL-RR 128/64)
seeded through ``numpy.random.SeedSequence``.  Only the raw 64-bit output of
the bit generator is consumed; every transformation on top of it is written
out here so another implementation can reproduce the exact streams:

* uniform doubles: ``(raw >> 11) * 2**-53``, in ``[0, 1)``;
* standard normals: Box-Muller over consecutive raw pairs ``(r0, r1)`` with
  ``u0 = ((r0 >> 11) + 1) * 2**-53`` (in ``(0, 1]``), ``u1 = (r1 >> 11) * 2**-53``,
  emitting ``sqrt(-2 ln u0) * cos(2 pi u1)`` then ``sqrt(-2 ln u0) * sin(2 pi u1)``;
* bounded integers ``[0, n)``: Lemire's multiply-shift with rejection;
* sampling without replacement: partial Fisher-Yates over the ascending
  population, one bounded draw per selected element.

Independent streams are keyed by a tuple of unsigned integers
(``(seed, stream_tag, ...)``) fed to ``SeedSequence``.
"""

import numpy as np

_U53 = 2.0 ** -53
_MASK64 = (1 << 64) - 1

# stream tags keep the generator's uses decorrelated for a shared user seed
STREAM_SYNTH = 0x53594E54
STREAM_REFERENCES = 0x52454653
STREAM_SEPARATION = 0x53455041


class PortableRng:
    def __init__(self, *key):
        key = [int(k) for k in key]
        if any(k < 0 or k > _MASK64 for k in key):
            raise ValueError("stream key entries must be unsigned 64-bit integers")
        self._bitgen = np.random.PCG64(np.random.SeedSequence(key))

    def raw(self, n):
        return self._bitgen.random_raw(int(n))

    def uniform(self, n):
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _U53

    def normal(self, n):
        n = int(n)
        pairs = (n + 1) // 2
        raw = self.raw(2 * pairs).reshape(pairs, 2)
        u0 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
        u1 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _U53
        radius = np.sqrt(-2.0 * np.log(u0))
        angle = 2.0 * np.pi * u1
        out = np.empty((pairs, 2))
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out.reshape(-1)[:n]

    def bounded(self, n):
        """Uniform integer in ``[0, n)`` (Lemire's nearly divisionless method)."""
        if n <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 64) % n
        while True:
            product = int(self.raw(1)[0]) * n
            if (product & _MASK64) >= threshold:
                return product >> 64

    def sample(self, population, m):
        """Draw ``m`` distinct items from ``population`` (kept in draw order).

        Swaps are tracked sparsely, so the cost is O(m) regardless of the
        population size.
        """
        size = len(population)
        if m > size:
            raise ValueError("sample larger than population")
        swapped = {}
        out = []
        for k in range(m):
            pick = k + self.bounded(size - k)
            chosen = swapped.get(pick, pick)
            swapped[pick] = swapped.get(k, k)
            out.append(population[chosen])
        return out
