"""Configurable-precision complex scalars, dense square matrices and spectra.

Storage is delegated to Arb (through python-flint).  Every value kept in a
:class:`Matrix` or :class:`Spectrum` is an exact binary midpoint: results of
ball operations are collapsed back to their midpoints, so the package behaves
like ordinary floating point arithmetic at ``prec`` bits with an unbounded
exponent range.  Comparisons are therefore always decidable.

Precision rule: an operation on several operands runs at the largest of their
precisions; the narrower operands are widened (exactly) first.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
from flint import acb, acb_mat, arb, ctx

from .errors import DimensionMismatch, NonFiniteError

MIN_PREC = 24
DOUBLE = 53

__all__ = [
    "DOUBLE", "Matrix", "Spectrum", "working", "to_arb", "to_acb",
    "identity", "zeros", "diagonal", "matmul", "matadd", "matsub",
    "diag_of", "off_of", "norm_inf", "norm_frobenius", "norm_lower_tri_max",
    "make_rng", "box_muller", "gaussian_array", "random_gaussian",
    "matrix_to_json", "matrix_from_json", "save_matrix", "load_matrix",
    "spectrum_to_json", "spectrum_from_json", "format_sci", "to_float",
    "log10",
]


def working(prec):
    """Context manager fixing Arb's working precision to ``prec`` bits."""
    return ctx.workprec(prec)


def _check_prec(prec):
    prec = int(prec)
    if prec < MIN_PREC:
        raise ValueError(f"precision must be at least {MIN_PREC} bits, got {prec}")
    return prec


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------

def _round(x, prec):
    with working(prec):
        return (x * 1).mid()


def to_arb(x, prec=DOUBLE) -> arb:
    """Convert a real value to an exact ``arb`` midpoint rounded to ``prec`` bits.

    Accepts ints, floats, :class:`~fractions.Fraction`, decimal strings,
    mpmath numbers and Arb balls.  Decimal strings are rounded to nearest.
    """
    if isinstance(x, arb):
        y = _round(x.mid(), prec)
    elif isinstance(x, (int, np.integer)):
        y = _round(arb(int(x)), prec)
    elif isinstance(x, (float, np.floating)):
        # a double is already exact at 53 bits or more
        y = arb(float(x)) if prec >= DOUBLE else _round(arb(float(x)), prec)
    elif isinstance(x, Fraction):
        with working(prec):
            y = (arb(x.numerator) / x.denominator).mid()
    elif isinstance(x, str):
        with mpmath.workprec(prec):
            y = arb(mpmath.mpf(x.strip()))
    elif isinstance(x, mpmath.mpf):
        y = _round(arb(x), prec)
    else:
        raise TypeError(f"cannot convert {type(x).__name__} to a real scalar")
    if not y.is_finite():
        raise NonFiniteError(f"non-finite scalar {x!r}")
    return y


def to_acb(x, prec=DOUBLE) -> acb:
    """Convert a real or complex value to an exact ``acb`` midpoint.

    A 2-sequence is read as ``(re, im)``.
    """
    if isinstance(x, acb):
        return acb(to_arb(x.real, prec), to_arb(x.imag, prec))
    if isinstance(x, (complex, np.complexfloating)):
        return acb(to_arb(float(x.real), prec), to_arb(float(x.imag), prec))
    if isinstance(x, mpmath.mpc):
        return acb(to_arb(x.real, prec), to_arb(x.imag, prec))
    if isinstance(x, (tuple, list)):
        re, im = x
        return acb(to_arb(re, prec), to_arb(im, prec))
    return acb(to_arb(x, prec))


def to_float(x) -> float:
    """Nearest double of a real ball midpoint (may underflow to 0.0)."""
    if isinstance(x, acb):
        x = abs(x)
    if isinstance(x, arb):
        return float(x.mid())
    return float(x)


def log10(x) -> float:
    """Decimal logarithm of a non-negative real, robust below the double range."""
    x = x if isinstance(x, arb) else arb(float(x))
    if x.mid() <= 0:
        return -math.inf
    with working(64):
        return float(x.mid().log_base(10).mid())


def format_sci(x, digits=8) -> str:
    """Scientific notation with ``digits`` significant digits.

    Works for magnitudes far outside the double range (for example 1e-400).
    """
    if isinstance(x, arb):
        m = mpmath.mpf(x.mid())
    else:
        m = mpmath.mpf(x)
    return mpmath.libmp.to_str(m._mpf_, max(1, int(digits)), min_fixed=1, max_fixed=0)


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

def _check_finite(entries):
    for z in entries:
        if not z.is_finite():
            raise NonFiniteError("matrix entry is NaN or infinite")


class Matrix:
    """Immutable dense square complex matrix at a fixed binary precision."""

    __slots__ = ("_m", "prec")

    def __init__(self, data: acb_mat, prec: int):
        if data.nrows() != data.ncols():
            raise DimensionMismatch(f"matrix must be square, got {data.nrows()}x{data.ncols()}")
        object.__setattr__(self, "_m", data)
        object.__setattr__(self, "prec", _check_prec(prec))

    def __setattr__(self, name, value):
        raise AttributeError("Matrix is immutable")

    # construction -----------------------------------------------------------

    @classmethod
    def _wrap(cls, data, prec):
        """Collapse ``data`` to midpoints and wrap it without copying entries."""
        return cls(data.mid(), prec)

    @classmethod
    def from_rows(cls, rows, prec=DOUBLE) -> "Matrix":
        rows = [list(r) for r in rows]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionMismatch("rows do not form a square matrix")
        prec = _check_prec(prec)
        flat = [to_acb(v, prec) for r in rows for v in r]
        _check_finite(flat)
        return cls(acb_mat(n, n, flat), prec)

    @classmethod
    def from_numpy(cls, a, prec=DOUBLE) -> "Matrix":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square 2-d array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("array contains NaN or infinity")
        n = a.shape[0]
        if np.iscomplexobj(a):
            flat = [acb(float(z.real), float(z.imag)) for z in a.ravel()]
        else:
            flat = [acb(float(z)) for z in a.ravel()]
        m = Matrix(acb_mat(n, n, flat), max(DOUBLE, _check_prec(prec)))
        return m if prec >= DOUBLE else m.at_precision(prec)

    # basic accessors ---------------------------------------------------------

    @property
    def n(self) -> int:
        return self._m.nrows()

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def entries(self) -> list:
        """Row-major list of the ``n*n`` entries as ``acb``."""
        return self._m.entries()

    def rows(self) -> list:
        n, e = self.n, self.entries
        return [e[i * n:(i + 1) * n] for i in range(n)]

    def column(self, k) -> list:
        n = self.n
        return [self._m[i, k] for i in range(n)]

    def __getitem__(self, ij) -> acb:
        i, j = ij
        return self._m[i, j]

    def diagonal(self) -> list:
        return [self._m[i, i] for i in range(self.n)]

    def is_real(self) -> bool:
        return all(z.imag == 0 for z in self.entries)

    def to_numpy(self) -> np.ndarray:
        """Round every entry to complex128 (real arrays when the matrix is real)."""
        vals = [complex(float(z.real.mid()), float(z.imag.mid())) for z in self.entries]
        a = np.array(vals, dtype=complex).reshape(self.n, self.n)
        if not a.imag.any():
            return a.real.copy()
        return a

    def at_precision(self, prec) -> "Matrix":
        """Return the same matrix at ``prec`` bits (rounded when narrowing)."""
        prec = _check_prec(prec)
        if prec >= self.prec:
            return Matrix(self._m, prec)
        with working(prec):
            return Matrix._wrap(self._m * 1, prec)

    widen = at_precision

    # algebra -----------------------------------------------------------------

    @property
    def T(self) -> "Matrix":
        return Matrix(self._m.transpose(), self.prec)

    @property
    def H(self) -> "Matrix":
        """Conjugate transpose."""
        return Matrix(self._m.transpose().conjugate(), self.prec)

    def conj(self) -> "Matrix":
        return Matrix(self._m.conjugate(), self.prec)

    def __matmul__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return matmul(self, other)

    def __add__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return matadd(self, other)

    def __sub__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return matsub(self, other)

    def __neg__(self):
        return Matrix(-self._m, self.prec)

    def __mul__(self, c):
        if isinstance(c, Matrix):
            raise TypeError("use @ for matrix products")
        c = to_acb(c, self.prec)
        with working(self.prec):
            return Matrix._wrap(self._m * c, self.prec)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = to_acb(c, self.prec)
        with working(self.prec):
            return Matrix._wrap(self._m * (1 / c), self.prec)

    def __eq__(self, other):
        if not isinstance(other, Matrix) or other.n != self.n:
            return NotImplemented
        return all(a == b for a, b in zip(self.entries, other.entries))

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"Matrix(n={self.n}, prec={self.prec})"

    def trace(self) -> acb:
        with working(self.prec):
            return self._m.trace().mid()


def _common(*ms):
    n = ms[0].n
    for m in ms[1:]:
        if m.n != n:
            raise DimensionMismatch(f"dimension mismatch: {n} vs {m.n}")
    return max(m.prec for m in ms)


def identity(n, prec=DOUBLE) -> Matrix:
    m = acb_mat(n, n)
    for i in range(n):
        m[i, i] = 1
    return Matrix(m, prec)


def zeros(n, prec=DOUBLE) -> Matrix:
    return Matrix(acb_mat(n, n), prec)


def diagonal(values, prec=None) -> Matrix:
    """Diagonal matrix from a sequence of scalars or a :class:`Spectrum`."""
    if isinstance(values, Spectrum):
        prec = values.prec if prec is None else prec
        values = values.values
    prec = DOUBLE if prec is None else prec
    vals = [to_acb(v, prec) for v in values]
    n = len(vals)
    m = acb_mat(n, n)
    for i, v in enumerate(vals):
        m[i, i] = v
    return Matrix(m, prec)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    prec = _common(a, b)
    with working(prec):
        return Matrix._wrap(a._m * b._m, prec)


def matadd(a: Matrix, b: Matrix) -> Matrix:
    prec = _common(a, b)
    with working(prec):
        return Matrix._wrap(a._m + b._m, prec)


def matsub(a: Matrix, b: Matrix) -> Matrix:
    prec = _common(a, b)
    with working(prec):
        return Matrix._wrap(a._m - b._m, prec)


def diag_of(a: Matrix) -> Matrix:
    """Keep the diagonal, zero everything else."""
    return diagonal(a.diagonal(), a.prec)


def off_of(a: Matrix) -> Matrix:
    """Zero the diagonal."""
    m = acb_mat(a._m)
    for i in range(a.n):
        m[i, i] = 0
    return Matrix(m, a.prec)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def norm_inf(a: Matrix) -> arb:
    """Maximum absolute row sum."""
    n, e = a.n, a.entries
    best = arb(0)
    with working(a.prec):
        for i in range(n):
            s = arb(0)
            for z in e[i * n:(i + 1) * n]:
                s += abs(z)
            s = s.mid()
            if not s.is_finite():
                raise NonFiniteError("non-finite entry in norm evaluation")
            if s > best:
                best = s
    return best


def norm_frobenius(a: Matrix) -> arb:
    with working(a.prec):
        s = arb(0)
        for z in a.entries:
            s += (z.real * z.real + z.imag * z.imag).mid()
        if not s.is_finite():
            raise NonFiniteError("non-finite entry in norm evaluation")
        return s.mid().sqrt().mid()


def norm_lower_tri_max(a: Matrix) -> arb:
    """Largest modulus strictly below the diagonal (0 for ``n == 1``)."""
    n = a.n
    best = arb(0)
    with working(a.prec):
        for i in range(1, n):
            for j in range(i):
                v = abs(a._m[i, j]).mid()
                if not v.is_finite():
                    raise NonFiniteError("non-finite entry in norm evaluation")
                if v > best:
                    best = v
    return best


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

class Spectrum:
    """Ordered diagonal entries ``sigma_1 .. sigma_n``; the order is never changed."""

    __slots__ = ("values", "prec")

    def __init__(self, values, prec=DOUBLE):
        prec = _check_prec(prec)
        values = list(values)
        if values and all(isinstance(v, acb) for v in values):
            with working(prec):          # one rounding pass instead of one per entry
                vals = tuple((v * 1).mid() for v in values)
        else:
            vals = tuple(to_acb(v, prec) for v in values)
        if not vals:
            raise ValueError("empty spectrum")
        _check_finite(vals)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "prec", prec)

    def __setattr__(self, name, value):
        raise AttributeError("Spectrum is immutable")

    @classmethod
    def from_matrix(cls, a: Matrix) -> "Spectrum":
        return cls(a.diagonal(), a.prec)

    def __len__(self):
        return len(self.values)

    @property
    def n(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def __repr__(self):
        shown = ", ".join(format_sci(v.real, 6) + ("" if v.imag == 0 else f"{format_sci(v.imag, 6)}j")
                          for v in self.values[:6])
        more = ", ..." if self.n > 6 else ""
        return f"Spectrum([{shown}{more}], prec={self.prec})"

    def __eq__(self, other):
        if not isinstance(other, Spectrum) or other.n != self.n:
            return NotImplemented
        return all(a == b for a, b in zip(self.values, other.values))

    def __hash__(self):
        return id(self)

    def __add__(self, other: "Spectrum") -> "Spectrum":
        if other.n != self.n:
            raise DimensionMismatch("spectra of different lengths")
        prec = max(self.prec, other.prec)
        with working(prec):
            return Spectrum([(a + b).mid() for a, b in zip(self.values, other.values)], prec)

    def __sub__(self, other: "Spectrum") -> "Spectrum":
        if other.n != self.n:
            raise DimensionMismatch("spectra of different lengths")
        prec = max(self.prec, other.prec)
        with working(prec):
            return Spectrum([(a - b).mid() for a, b in zip(self.values, other.values)], prec)

    def at_precision(self, prec) -> "Spectrum":
        return Spectrum(self.values, prec)

    def as_matrix(self) -> Matrix:
        return diagonal(self)

    def max_abs(self) -> arb:
        with working(self.prec):
            return max(abs(v).mid() for v in self.values)

    def norm_inf(self) -> arb:
        """Infinity norm of the diagonal matrix, i.e. :meth:`max_abs`."""
        return self.max_abs()

    def min_gap(self):
        """Smallest ``|sigma_i - sigma_j|`` over ``i != j``, or ``None`` when ``n == 1``."""
        vals = self.values
        best = None
        with working(self.prec):
            for i in range(len(vals)):
                vi = vals[i]
                for j in range(i + 1, len(vals)):
                    g = abs(vi - vals[j]).mid()
                    if best is None or g < best:
                        best = g
        return best

    def is_real(self) -> bool:
        return all(v.imag == 0 for v in self.values)

    def to_numpy(self) -> np.ndarray:
        a = np.array([complex(float(v.real.mid()), float(v.imag.mid())) for v in self.values])
        return a.real.copy() if not a.imag.any() else a


# ---------------------------------------------------------------------------
# random matrices
# ---------------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; passes an existing Generator through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


def box_muller(rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` standard normal doubles from pairs of uniforms (Box-Muller)."""
    pairs = (count + 1) // 2
    u1 = 1.0 - rng.random(pairs)      # (0, 1]; avoids log(0)
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(2.0 * np.pi * u2)
    out[1::2] = r * np.sin(2.0 * np.pi * u2)
    return out[:count]


def gaussian_array(rng, shape, field="real") -> np.ndarray:
    """Standard normal array; complex fields get independent real/imaginary parts."""
    rng = make_rng(rng)
    size = int(np.prod(shape))
    if field == "real":
        return box_muller(rng, size).reshape(shape)
    if field == "complex":
        z = box_muller(rng, 2 * size)
        return (z[0::2] + 1j * z[1::2]).reshape(shape)
    raise ValueError(f"field must be 'real' or 'complex', got {field!r}")


def random_gaussian(n, field="real", seed=0, unit_frobenius=False, prec=DOUBLE) -> Matrix:
    """Random ``n x n`` Gaussian matrix, reproducible for a fixed seed.

    Sampling happens at double precision; the result is widened to ``prec``.
    With ``unit_frobenius`` the matrix is rescaled at ``prec`` bits so that its
    Frobenius norm is 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m = Matrix.from_numpy(gaussian_array(seed, (n, n), field), DOUBLE).at_precision(max(prec, DOUBLE))
    if unit_frobenius:
        m = m / norm_frobenius(m)
    return m if prec >= DOUBLE else m.at_precision(prec)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def _dec(x: arb, prec) -> str:
    # repr_dps digits are enough for a correctly rounded read-back at prec bits
    with mpmath.workprec(prec):
        return mpmath.libmp.to_str(mpmath.mpf(x.mid())._mpf_, mpmath.libmp.repr_dps(prec))


def matrix_to_json(a: Matrix, field=None) -> dict:
    field = field or ("real" if a.is_real() else "complex")
    return {
        "n": a.n,
        "field": field,
        "precision_bits": a.prec,
        "entries": [[[_dec(z.real, a.prec), _dec(z.imag, a.prec)] for z in row] for row in a.rows()],
    }


def matrix_from_json(obj) -> Matrix:
    n = int(obj["n"])
    prec = int(obj["precision_bits"])
    rows = obj["entries"]
    if len(rows) != n:
        raise DimensionMismatch(f"declared n={n} but found {len(rows)} rows")
    m = Matrix.from_rows([[tuple(e) if isinstance(e, (list, tuple)) else e for e in r] for r in rows], prec)
    if obj.get("field", "complex") == "real" and not m.is_real():
        raise ValueError("matrix declared real has non-zero imaginary parts")
    return m


def save_matrix(path, a: Matrix, field=None):
    Path(path).write_text(json.dumps(matrix_to_json(a, field)))


def load_matrix(path) -> Matrix:
    return matrix_from_json(json.loads(Path(path).read_text()))


def spectrum_to_json(s: Spectrum) -> dict:
    return {
        "n": s.n,
        "precision_bits": s.prec,
        "values": [[_dec(v.real, s.prec), _dec(v.imag, s.prec)] for v in s.values],
    }


def spectrum_from_json(obj, prec=None) -> Spectrum:
    """Read a spectrum object, a bare list of values, or the diagonal of a matrix object."""
    if isinstance(obj, dict) and "entries" in obj:
        return Spectrum.from_matrix(matrix_from_json(obj))
    if isinstance(obj, dict):
        prec = int(obj.get("precision_bits", prec or DOUBLE))
        values = obj["values"]
    else:
        prec = prec or DOUBLE
        values = obj
    return Spectrum([tuple(v) if isinstance(v, (list, tuple)) else v for v in values], prec)
