"""Per-sample seed derivation for reproducible parallel generation.

Sample i under global seed g gets the i-th output of the splitmix64 stream
seeded with g. The derived value is recorded in each sample's manifest, so a
single sample can be regenerated without replaying the whole run.
"""

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(global_seed: int, sample_index: int) -> int:
    if sample_index < 0:
        raise ValueError("sample_index must be non-negative")
    return splitmix64(global_seed + (sample_index + 1) * _GOLDEN)
