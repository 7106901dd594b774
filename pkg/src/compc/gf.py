"""Prime-field arithmetic and dense matrices over GF(p).

Field elements are canonical Python ints in [0, p). Matrices are dense
row-major int64 numpy arrays, reduced mod p after every operation. The
default prime 2**31 - 1 keeps any single product of two canonical
elements below 2**62, so int64 intermediates are safe as long as sums
are reduced before they accumulate more than two raw products; the
helpers below take care of that.
"""

import numpy as np

from .errors import DimensionMismatch, DivisionByZero, IndivisibleSplit

DEFAULT_PRIME = 2_147_483_647  # 2**31 - 1

MAX_DIM = 64

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n):
    """Deterministic Miller-Rabin, exact for anything below 3.3e24."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def check_prime(p):
    if not is_prime(p):
        raise ValueError(f"modulus {p} is not prime")
    return p


# -- scalar ops ---------------------------------------------------------

def fe_add(a, b, p):
    return (a + b) % p


def fe_sub(a, b, p):
    return (a - b) % p


def fe_mul(a, b, p):
    return a * b % p


def fe_neg(a, p):
    return -a % p


def fe_inv(a, p):
    """Multiplicative inverse by Fermat's little theorem (p prime)."""
    a %= p
    if a == 0:
        raise DivisionByZero("cannot invert 0")
    return pow(a, p - 2, p)


def fe_pow(a, e, p):
    return pow(a % p, e, p)


# -- raw ndarray helpers (internal fast path) ---------------------------

def arr(values, p):
    """Canonicalize to an int64 array reduced mod p."""
    return np.asarray(values, dtype=np.int64) % p


def mat_mul(a, b, p):
    """Exact modular matmul via a 16-bit split of the left operand.

    Splitting keeps every accumulated sum below 2**53 for any p < 2**31
    and inner dimension up to 64, so plain int64 matmul never wraps.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    hi, lo = a >> 16, a & 0xFFFF
    return ((hi @ b % p) * 65536 + lo @ b) % p


def mat_inv_vec(v, p):
    """Elementwise inverse of a vector of nonzero elements."""
    out = np.empty_like(v)
    for i, x in enumerate(v.tolist()):
        out[i] = fe_inv(x, p)
    return out


def rref(a, p):
    """Reduced row echelon form mod p. Returns (R, pivot_columns)."""
    r = arr(a, p).copy()
    rows, cols = r.shape
    pivots = []
    lead = 0
    for col in range(cols):
        if lead >= rows:
            break
        piv = None
        for i in range(lead, rows):
            if r[i, col]:
                piv = i
                break
        if piv is None:
            continue
        if piv != lead:
            r[[lead, piv]] = r[[piv, lead]]
        r[lead] = r[lead] * fe_inv(int(r[lead, col]), p) % p
        for i in range(rows):
            if i != lead and r[i, col]:
                r[i] = (r[i] - r[i, col] * r[lead]) % p
        pivots.append(col)
        lead += 1
    return r, pivots


def nullspace_raw(a, p):
    """Basis (rows) of {x : a @ x = 0 mod p}, canonical rref form."""
    a = arr(a, p)
    _, cols = a.shape
    r, pivots = rref(a, p)
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.int64)
    for k, fcol in enumerate(free):
        basis[k, fcol] = 1
        for i, pcol in enumerate(pivots):
            basis[k, pcol] = (-r[i, fcol]) % p
    return basis


def solve_particular(a, b, p):
    """One exact solution x of a @ x = b mod p, or None if inconsistent.

    b may have multiple right-hand sides (2-D). Free variables are set
    to zero, which makes the answer deterministic.
    """
    a = arr(a, p)
    b = arr(b, p)
    single = b.ndim == 1
    if single:
        b = b[:, None]
    rows, cols = a.shape
    aug = np.concatenate([a, b], axis=1)
    r, pivots = rref(aug, p)
    # a pivot inside the RHS block means an inconsistent system
    for pc in pivots:
        if pc >= cols:
            return None
    x = np.zeros((cols, b.shape[1]), dtype=np.int64)
    for i, pc in enumerate(pivots):
        x[pc] = r[i, cols:]
    return x[:, 0] if single else x


# -- matrices -----------------------------------------------------------

class FMatrix:
    """Dense matrix over GF(p). Immutable by convention."""

    __slots__ = ("a", "p")

    def __init__(self, values, p):
        a = np.asarray(values, dtype=np.int64)
        if a.ndim != 2:
            raise DimensionMismatch(f"expected 2-D data, got {a.ndim}-D")
        if a.shape[0] > MAX_DIM or a.shape[1] > MAX_DIM:
            raise DimensionMismatch(f"dimension above {MAX_DIM}: {a.shape}")
        self.a = a % p
        self.p = p

    @classmethod
    def zeros(cls, rows, cols, p):
        return cls(np.zeros((rows, cols), dtype=np.int64), p)

    @classmethod
    def identity(cls, n, p):
        return cls(np.eye(n, dtype=np.int64), p)

    @classmethod
    def random(cls, rows, cols, p, rng):
        return cls(rng.integers(0, p, size=(rows, cols), dtype=np.int64), p)

    @property
    def shape(self):
        return self.a.shape

    @property
    def rows(self):
        return self.a.shape[0]

    @property
    def cols(self):
        return self.a.shape[1]

    def _check(self, other, op):
        if self.p != other.p:
            raise ValueError(f"mixed moduli {self.p} and {other.p}")
        if op in ("add", "sub") and self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} vs {other.shape}")
        if op == "mul" and self.cols != other.rows:
            raise DimensionMismatch(f"{self.shape} @ {other.shape}")

    def __add__(self, other):
        self._check(other, "add")
        return FMatrix((self.a + other.a) % self.p, self.p)

    def __sub__(self, other):
        self._check(other, "sub")
        return FMatrix((self.a - other.a) % self.p, self.p)

    def __matmul__(self, other):
        self._check(other, "mul")
        return FMatrix(mat_mul(self.a, other.a, self.p), self.p)

    def scalar_mul(self, c):
        return FMatrix(self.a * (c % self.p) % self.p, self.p)

    def __neg__(self):
        return FMatrix((-self.a) % self.p, self.p)

    @property
    def T(self):
        return FMatrix(self.a.T, self.p)

    def transpose(self):
        return self.T

    def __eq__(self, other):
        if not isinstance(other, FMatrix):
            return NotImplemented
        return self.p == other.p and self.shape == other.shape and bool(
            np.array_equal(self.a, other.a))

    def __hash__(self):
        return hash((self.p, self.shape, self.a.tobytes()))

    def block_split(self, m, axis=1):
        """Split into m equal blocks along axis (1 = columns)."""
        size = self.shape[axis]
        if m <= 0 or size % m:
            raise IndivisibleSplit(f"{m} blocks of dimension {size}")
        return [FMatrix(piece, self.p)
                for piece in np.split(self.a, m, axis=axis)]

    def to_lists(self):
        return self.a.tolist()

    def __repr__(self):
        return f"FMatrix({self.a.tolist()}, p={self.p})"


def hconcat(mats):
    if not mats:
        raise DimensionMismatch("nothing to concatenate")
    p = mats[0].p
    if any(m.p != p for m in mats) or len({m.rows for m in mats}) != 1:
        raise DimensionMismatch("row counts or moduli differ")
    return FMatrix(np.concatenate([m.a for m in mats], axis=1), p)


def vconcat(mats):
    if not mats:
        raise DimensionMismatch("nothing to concatenate")
    p = mats[0].p
    if any(m.p != p for m in mats) or len({m.cols for m in mats}) != 1:
        raise DimensionMismatch("column counts or moduli differ")
    return FMatrix(np.concatenate([m.a for m in mats], axis=0), p)


def solve_nullspace(m):
    """Right-nullspace basis of an FMatrix; rows of the result span it."""
    return FMatrix(nullspace_raw(m.a, m.p), m.p)
