"""Counter-based random streams.

Every stream is a Philox generator keyed by a 64-bit seed.  Sub-streams
(subjects of a simulated sample, bootstrap resamples, Monte-Carlo
replicates) are addressed through the high word of the Philox counter, so
the stream for index ``i`` does not depend on how many other indices are
drawn.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed, index):
    """Generator for sub-stream ``index`` of ``seed``."""
    key = int(seed) & _MASK64
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(index) & _MASK64])
    return np.random.Generator(bitgen)


def derive_seed(seed, index):
    """A fresh 64-bit seed for nested streams (replicate ``index`` of ``seed``)."""
    key = int(seed) & _MASK64
    bitgen = np.random.Philox(key=key, counter=[0, 0, 1, int(index) & _MASK64])
    return int(bitgen.random_raw())


def raw_uniforms(seed, index, size):
    """``size`` uniforms on the open interval (0, 1) from sub-stream ``index``."""
    key = int(seed) & _MASK64
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(index) & _MASK64])
    raw = bitgen.random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
