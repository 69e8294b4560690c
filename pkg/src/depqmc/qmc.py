"""Uniform sample sources: pseudo-random and randomized Sobol' point sets.

High-dimensional dependent paths are driven by a single point set whose
columns are blocked into consecutive groups: a point set with n_pth rows and
n_gen * d columns yields n_pth paths of n_gen d-dimensional samples.  Both
the pseudo-random and the quasi-random source produce the same layout, so
everything downstream is agnostic of which one generated the uniforms.

The Sobol' generator uses the Joe-Kuo D(6) direction numbers (21201
dimensions), Gray-code ordering, and skips the all-zeros first point.
Randomization is a per-dimension digital (XOR) shift, which keeps the net
structure while making every coordinate marginally uniform.
"""

import importlib.resources
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, ParseError, UnsupportedDimensionError

MAX_SOBOL_DIM = 21201

# Points are built on a 52-bit integer grid so every value is an exact double.
_NBITS = 52
_SCALE = 2.0 ** -_NBITS

# Open-interval clamp: downstream quantile functions never see 0 or 1.
UNIT_LO = 2.0 ** -53
UNIT_HI = 1.0 - 2.0 ** -53


@dataclass(frozen=True)
class PointSet:
    """n x d matrix of uniforms in (0,1) plus provenance (kind, seed)."""

    points: np.ndarray
    kind: str  # "pseudo" or "sobol"
    seed: int

    def __post_init__(self):
        self.points.flags.writeable = False

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class BlockedPaths:
    """n_pth x n_gen x d cube of uniforms obtained by column blocking."""

    cube: np.ndarray

    @property
    def n_pth(self):
        return self.cube.shape[0]

    @property
    def n_gen(self):
        return self.cube.shape[1]

    @property
    def d(self):
        return self.cube.shape[2]


class DirectionNumbers:
    """Joe-Kuo direction numbers parsed from their published text format.

    Each row of the file reads ``d s a m_1 ... m_s``; dimension 1 (van der
    Corput in base 2) is implicit and not part of the file.  Direction
    vectors are expanded lazily to ``_NBITS`` bits and cached.
    """

    def __init__(self, path):
        self.path = str(path)
        self._rows = []
        with open(path) as f:
            header = f.readline()  # "d s a m_i"
            if header.split()[:1] != ["d"]:
                raise ParseError(f"{path}: unrecognized header {header!r}")
            for line in f:
                parts = line.split()
                if not parts:
                    continue
                d, s, a = int(parts[0]), int(parts[1]), int(parts[2])
                m = [int(x) for x in parts[3:]]
                if len(m) != s or d != len(self._rows) + 2:
                    raise ParseError(f"{path}: malformed row for d={d}")
                self._rows.append((s, a, m))
        self.max_dim = len(self._rows) + 1
        self._vectors = np.zeros((0, _NBITS), dtype=np.uint64)

    def vectors(self, dim):
        """Direction vectors for the first `dim` dimensions, (dim, _NBITS)."""
        if dim > self.max_dim:
            raise UnsupportedDimensionError(
                f"dimension {dim} exceeds the {self.max_dim} available "
                f"direction numbers in {self.path}"
            )
        have = self._vectors.shape[0]
        if dim > have:
            fresh = self._expand_block(have, dim)
            self._vectors = np.vstack([self._vectors, fresh])
        return self._vectors[:dim]

    def _expand_block(self, lo, hi):
        """Direction vectors for 0-based dimensions lo..hi-1, vectorized.

        The recurrence v_k = v_{k-s} ^ (v_{k-s} >> s) ^ xor_i a_i v_{k-i}
        runs over bit index k for all dimensions at once; dimension 0 is the
        base-2 van der Corput sequence.
        """
        n = hi - lo
        V = np.zeros((n, _NBITS), dtype=np.uint64)
        s_arr = np.ones(n, dtype=np.int64)
        a_arr = np.zeros(n, dtype=np.int64)
        m_arr = np.ones((n, _NBITS), dtype=np.uint64)
        for j in range(lo, hi):
            r = j - lo
            if j == 0:
                s_arr[r] = _NBITS  # van der Corput: every bit seeded with m_k = 1
                continue
            s, a, m = self._rows[j - 1]
            s_arr[r], a_arr[r] = s, a
            m_arr[r, :min(s, _NBITS)] = m[:_NBITS]
        rows = np.arange(n)
        for k in range(_NBITS):
            seeded = k < s_arr
            vk = np.where(
                seeded, m_arr[:, k] << np.uint64(_NBITS - 1 - k), np.uint64(0)
            )
            rec = ~seeded
            if np.any(rec):
                back = np.where(rec, k - s_arr, 0)
                prev = V[rows, back]
                vk = np.where(rec, prev ^ (prev >> s_arr.astype(np.uint64)), vk)
                for i in range(1, int(s_arr.max())):
                    hit = rec & (i < s_arr) & (((a_arr >> (s_arr - 1 - i)) & 1) == 1)
                    if np.any(hit):
                        vk = np.where(hit, vk ^ V[rows, k - i], vk)
            V[:, k] = vk
        return V


_tables = {}


def load_direction_numbers(path=None):
    """Load (and cache) a direction-number table; defaults to the bundled one."""
    if path is None:
        path = importlib.resources.files("depqmc").joinpath(
            "data/new-joe-kuo-6.21201.txt"
        )
    key = str(path)
    if key not in _tables:
        _tables[key] = DirectionNumbers(path)
    return _tables[key]


def sobol_points(n, dim, seed=0, randomize=True, direction_file=None):
    """First n Sobol' points in `dim` dimensions, optionally digitally shifted.

    Gray-code ordering with the all-zeros point skipped, so the first point
    is (0.5, ..., 0.5).  With ``randomize`` a per-dimension XOR shift drawn
    from ``seed`` is applied; the same (seed, n, dim) always reproduces the
    same matrix.  All entries are clamped into [2^-53, 1 - 2^-53].
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if dim < 1:
        raise DomainError(f"need dim >= 1, got {dim}")
    table = load_direction_numbers(direction_file)
    v = table.vectors(dim)  # (dim, _NBITS)

    idx = np.arange(1, n + 1, dtype=np.uint64)
    low = idx & (~idx + np.uint64(1))  # lowest set bit of the index
    c = np.log2(low.astype(np.float64)).astype(np.int64)  # trailing zeros
    ints = np.bitwise_xor.accumulate(v[:, c].T, axis=0)  # (n, dim)

    if randomize:
        rng = np.random.default_rng(seed)
        shift = rng.integers(0, 1 << _NBITS, size=dim, dtype=np.uint64)
        ints = ints ^ shift

    pts = np.clip(ints.astype(np.float64) * _SCALE, UNIT_LO, UNIT_HI)
    return PointSet(points=pts, kind="sobol", seed=int(seed))


def pseudo_uniforms(n, dim, seed=0):
    """n x dim iid uniforms in (0,1) from a seeded PCG64 generator."""
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    if dim < 1:
        raise DomainError(f"need dim >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    pts = np.clip(rng.random((n, dim)), UNIT_LO, UNIT_HI)
    return PointSet(points=pts, kind="pseudo", seed=int(seed))


def block_paths(ps, n_pth, n_gen, d):
    """Reshape an (n_pth, n_gen*d) point set into an (n_pth, n_gen, d) cube.

    Row i, columns (k-1)d+1 ... kd of the point set become cube[i][k].
    """
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps)
    if pts.shape != (n_pth, n_gen * d):
        raise DimensionError(
            f"point set of shape {pts.shape} cannot be blocked into "
            f"({n_pth}, {n_gen}, {d})"
        )
    return BlockedPaths(cube=pts.reshape(n_pth, n_gen, d))
