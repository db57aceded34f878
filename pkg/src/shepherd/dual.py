"""Forward-mode derivative engine with multi-lane tangents.

A :class:`Dual` bundles a float array with one directional-derivative lane
per tracked parameter; the tangent axis is always last, so a value of shape
``S`` carries a tangent of shape ``S + (lanes,)``. Every kernel in this
module also accepts plain numpy arrays (treated as constants), which lets
the same numeric code run with or without derivative tracking. There is no
tape and no global state: results are pure functions of their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericalError

SOLVE_RESIDUAL_TOL = 1e-8


class Dual:
    """Value plus per-lane directional derivatives (tangent axis last)."""

    __slots__ = ("value", "tangent")

    # Make ndarray <op> Dual defer to the reflected Dual methods instead of
    # numpy silently building an object array.
    __array_ufunc__ = None

    def __init__(self, value, tangent):
        self.value = np.asarray(value, dtype=np.float64)
        self.tangent = np.asarray(tangent, dtype=np.float64)
        if self.tangent.shape[: self.value.ndim] != self.value.shape:
            raise ValueError(
                f"tangent shape {self.tangent.shape} does not extend "
                f"value shape {self.value.shape}"
            )

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def lanes(self):
        return self.tangent.shape[-1]

    def __repr__(self):
        return f"Dual(value={self.value!r}, lanes={self.lanes})"

    # -- arithmetic ---------------------------------------------------------

    def _tangent_for(self, value):
        """Tangent broadcast to match a (possibly widened) value shape."""
        if self.tangent.shape[: value.ndim] == value.shape:
            return self.tangent
        return np.broadcast_to(self.tangent, value.shape + (self.lanes,))

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        val = self.value + np.asarray(other)
        return Dual(val, self._tangent_for(val))

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.tangent - other.tangent)
        val = self.value - np.asarray(other)
        return Dual(val, self._tangent_for(val))

    def __rsub__(self, other):
        val = np.asarray(other) - self.value
        return Dual(val, -self._tangent_for(val))

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.tangent * other.value[..., None]
                + self.value[..., None] * other.tangent,
            )
        other = np.asarray(other, dtype=np.float64)
        return Dual(self.value * other, self.tangent * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if np.any(other.value == 0.0):
                raise DomainError("dual division requires a nonzero denominator")
            inv = 1.0 / other.value
            val = self.value * inv
            tan = (self.tangent - val[..., None] * other.tangent) * inv[..., None]
            return Dual(val, tan)
        other = np.asarray(other, dtype=np.float64)
        if np.any(other == 0.0):
            raise DomainError("dual division requires a nonzero denominator")
        return Dual(self.value / other, self.tangent / other[..., None])

    def __rtruediv__(self, other):
        if np.any(self.value == 0.0):
            raise DomainError("dual division requires a nonzero denominator")
        other = np.asarray(other, dtype=np.float64)
        val = other / self.value
        tan = -val[..., None] * self.tangent / self.value[..., None]
        return Dual(val, tan)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise TypeError("dual __pow__ supports integer exponents only")
        val = self.value**exponent
        tan = exponent * self.value ** (exponent - 1)
        return Dual(val, tan[..., None] * self.tangent)

    # -- structure ----------------------------------------------------------

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.value[idx], self.tangent[idx + (slice(None),)])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Dual(
            self.value.reshape(shape), self.tangent.reshape(shape + (self.lanes,))
        )

    def copy(self):
        return Dual(self.value.copy(), self.tangent.copy())


# -- construction -------------------------------------------------------------


def seed(values):
    """Lift a parameter vector into duals with one identity lane per entry.

    ``values`` may have leading batch axes; lanes index the trailing axis, so
    each batch row tracks derivatives with respect to its own parameters.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[-1]
    tangent = np.broadcast_to(np.eye(n), values.shape + (n,)).copy()
    return Dual(values, tangent)


def seed_many(arrays):
    """Lift several parameter arrays into duals sharing one lane space.

    Returns ``(duals, total_lanes)``; lane ``k`` is the k-th scalar in the
    flattened concatenation of the inputs.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    sizes = [a.size for a in arrays]
    total = int(sum(sizes))
    eye = np.eye(total)
    duals, offset = [], 0
    for a, size in zip(arrays, sizes):
        tan = eye[offset : offset + size].reshape(a.shape + (total,))
        duals.append(Dual(a, tan.copy()))
        offset += size
    return duals, total


def constant(values, lanes):
    """Wrap an array as a dual with zero tangents in the given lane space."""
    values = np.asarray(values, dtype=np.float64)
    return Dual(values, np.zeros(values.shape + (lanes,)))


def value_of(x):
    return x.value if isinstance(x, Dual) else np.asarray(x, dtype=np.float64)


def tangent_of(x):
    if not isinstance(x, Dual):
        raise TypeError("tangent_of expects a Dual")
    return x.tangent


def _as_dual(x, lanes):
    return x if isinstance(x, Dual) else constant(x, lanes)


def _is_dual(*xs):
    return any(isinstance(x, Dual) for x in xs)


def _lanes(*xs):
    for x in xs:
        if isinstance(x, Dual):
            return x.lanes
    raise TypeError("no Dual operand")


# -- elementwise kernels -------------------------------------------------------


def sigmoid(x):
    """Numerically stable logistic squashing; derivative s*(1-s)."""
    v = value_of(x)
    pos = v >= 0
    s = np.empty_like(v, dtype=np.float64)
    s[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ex = np.exp(v[~pos])
    s[~pos] = ex / (1.0 + ex)
    if isinstance(x, Dual):
        return Dual(s, (s * (1.0 - s))[..., None] * x.tangent)
    return s


def tanh(x):
    if isinstance(x, Dual):
        t = np.tanh(x.value)
        return Dual(t, (1.0 - t * t)[..., None] * x.tangent)
    return np.tanh(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.value)
        return Dual(e, e[..., None] * x.tangent)
    return np.exp(x)


def log(x):
    v = value_of(x)
    if np.any(v <= 0.0):
        raise DomainError("log requires strictly positive input")
    if isinstance(x, Dual):
        return Dual(np.log(v), x.tangent / v[..., None])
    return np.log(v)


# -- reductions and linear algebra --------------------------------------------


def total(x, axis=None):
    """Sum along ``axis`` (all value axes when None)."""
    if not isinstance(x, Dual):
        return np.sum(x, axis=axis)
    if axis is None:
        axes = tuple(range(x.ndim))
    elif isinstance(axis, (int, np.integer)):
        axes = (axis % x.ndim,)
    else:
        axes = tuple(a % x.ndim for a in axis)
    return Dual(np.sum(x.value, axis=axes), np.sum(x.tangent, axis=axes))


def mean(x, axis=None):
    if not isinstance(x, Dual):
        return np.mean(x, axis=axis)
    count = x.value.size if axis is None else x.value.shape[axis % x.ndim]
    return total(x, axis=axis) / float(count)


def dot(a, b):
    """Contraction over the last axis, broadcasting leading axes."""
    if not _is_dual(a, b):
        return np.einsum("...i,...i->...", a, b)
    lanes = _lanes(a, b)
    a, b = _as_dual(a, lanes), _as_dual(b, lanes)
    val = np.einsum("...i,...i->...", a.value, b.value)
    tan = np.einsum("...il,...i->...l", a.tangent, b.value) + np.einsum(
        "...i,...il->...l", a.value, b.tangent
    )
    return Dual(val, tan)


def matvec(a, x):
    """Matrix-vector product ``a @ x`` over the trailing two/one axes."""
    if not _is_dual(a, x):
        return np.einsum("...ij,...j->...i", a, x)
    lanes = _lanes(a, x)
    a, x = _as_dual(a, lanes), _as_dual(x, lanes)
    val = np.einsum("...ij,...j->...i", a.value, x.value)
    tan = np.einsum("...ijl,...j->...il", a.tangent, x.value) + np.einsum(
        "...ij,...jl->...il", a.value, x.tangent
    )
    return Dual(val, tan)


def vecmat(x, a):
    """Vector-matrix product ``x @ a`` over the trailing axes."""
    if not _is_dual(a, x):
        return np.einsum("...i,...ij->...j", x, a)
    lanes = _lanes(a, x)
    a, x = _as_dual(a, lanes), _as_dual(x, lanes)
    val = np.einsum("...i,...ij->...j", x.value, a.value)
    tan = np.einsum("...il,...ij->...jl", x.tangent, a.value) + np.einsum(
        "...i,...ijl->...jl", x.value, a.tangent
    )
    return Dual(val, tan)


def transpose(a):
    """Swap the trailing two value axes."""
    if isinstance(a, Dual):
        return Dual(
            np.swapaxes(a.value, -1, -2), np.swapaxes(a.tangent, -2, -3)
        )
    return np.swapaxes(a, -1, -2)


def _plain_solve(a, b, residual_tol):
    try:
        x = np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"linear solve failed: {err}") from err
    residual = np.max(np.abs(np.einsum("...ij,...j->...i", a, x) - b))
    if not residual < residual_tol:
        raise NumericalError(f"linear solve residual {residual:.3e} exceeds {residual_tol:.1e}")
    return x


def solve(a, b, residual_tol=SOLVE_RESIDUAL_TOL):
    """Solve ``a @ x = b`` for a vector ``b``, lifted to tangents.

    The value part solves the plain system; per lane, the tangent solves
    ``a @ dx = db - da @ x``. Raises :class:`NumericalError` when the value
    system is singular or the residual check fails.
    """
    if not _is_dual(a, b):
        return _plain_solve(np.asarray(a, float), np.asarray(b, float), residual_tol)
    lanes = _lanes(a, b)
    a, b = _as_dual(a, lanes), _as_dual(b, lanes)
    x_val = _plain_solve(a.value, b.value, residual_tol)
    rhs = b.tangent - np.einsum("...ijl,...j->...il", a.tangent, x_val)
    try:
        x_tan = np.linalg.solve(a.value, rhs)
    except np.linalg.LinAlgError as err:  # pragma: no cover - caught above
        raise NumericalError(f"lifted solve failed: {err}") from err
    return Dual(x_val, x_tan)


def softmax(x):
    """Softmax over the last axis; the constant max-shift keeps exp in range."""
    shift = np.max(value_of(x), axis=-1, keepdims=True)
    e = exp(x - shift)
    return e / expand_last(total(e, axis=-1))


def clip01(x):
    """Project onto [0, 1]; tangents are zeroed where the projection binds."""
    if isinstance(x, Dual):
        clipped = np.clip(x.value, 0.0, 1.0)
        inside = ((x.value > 0.0) & (x.value < 1.0))[..., None]
        return Dual(clipped, np.where(inside, x.tangent, 0.0))
    return np.clip(x, 0.0, 1.0)


# -- shape helpers -------------------------------------------------------------


def expand_last(x):
    """Append a trailing value axis of size one (for broadcasting scalars)."""
    if isinstance(x, Dual):
        return Dual(x.value[..., None], x.tangent[..., None, :])
    return np.asarray(x)[..., None]


def stack(parts, axis=0):
    if not _is_dual(*parts):
        return np.stack(parts, axis=axis)
    lanes = _lanes(*parts)
    parts = [_as_dual(p, lanes) for p in parts]
    shapes = [p.shape for p in parts]
    target = np.broadcast_shapes(*shapes)
    vals = [np.broadcast_to(p.value, target) for p in parts]
    tans = [np.broadcast_to(p.tangent, target + (lanes,)) for p in parts]
    axis = axis % (len(target) + 1)
    return Dual(np.stack(vals, axis=axis), np.stack(tans, axis=axis))


def concatenate(parts, axis=-1):
    if not _is_dual(*parts):
        return np.concatenate(parts, axis=axis)
    lanes = _lanes(*parts)
    parts = [_as_dual(p, lanes) for p in parts]
    ndim = parts[0].ndim
    axis = axis % ndim
    return Dual(
        np.concatenate([p.value for p in parts], axis=axis),
        np.concatenate([p.tangent for p in parts], axis=axis),
    )
