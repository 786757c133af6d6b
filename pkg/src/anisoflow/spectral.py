"""Periodic fields on the unit 3-torus.

Fields carry a nodal array (values at the points ``x = i/n``) and/or its
Fourier coefficients.  Coefficients are normalised so that

    f(x) = sum_k fhat(k) exp(2 pi i k.x),

i.e. ``fhat = fftn(f) / n**3``, which makes the k=0 coefficient the mean and
gives a derivative symbol of ``2 pi i k``.  Arrays use numpy's FFT ordering,
so index ``j`` along an axis holds wavenumber ``fftfreq(n, 1/n)[j]`` in
``{-n/2, ..., n/2-1}``.

Scalar fields have shape ``(n, n, n)`` and vector fields ``(3, n, n, n)``;
the leading axis of a vector field is the component index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

AXES = (-3, -2, -1)
DUMP_MAGIC = "anisoflow-field v1"


@dataclass(frozen=True)
class Grid:
    """Uniform cubic grid with ``n`` points per direction and unit period."""

    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 4 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 4, got {n!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def size(self) -> int:
        return self.n**3

    @cached_property
    def x(self) -> np.ndarray:
        """Nodal coordinates, shape (3, n, n, n)."""
        s = np.arange(self.n) / self.n
        return np.array(np.meshgrid(s, s, s, indexing="ij"))

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers, shape (3, n, n, n)."""
        s = np.fft.fftfreq(self.n, 1.0 / self.n)
        return np.array(np.meshgrid(s, s, s, indexing="ij"))

    @cached_property
    def kd(self) -> np.ndarray:
        """Wavenumbers for odd derivatives: the Nyquist mode -n/2 is zeroed."""
        kd = self.k.copy()
        kd[kd == -self.n // 2] = 0.0
        return kd

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 including the Nyquist mode (used by Laplacians)."""
        return np.sum(self.k**2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where every |k_i| <= n/3 (the 2/3 rule)."""
        return np.all(3 * np.abs(self.k) <= self.n, axis=0)

    def mode_index(self, k) -> tuple[int, int, int]:
        """Array index of the integer wavenumber triple ``k``."""
        idx = tuple(int(ki) % self.n for ki in k)
        if any(not (-self.n // 2 <= int(ki) < self.n // 2) for ki in k):
            raise ValueError(f"wavenumber {tuple(k)} not representable on n={self.n}")
        return idx


def _freeze(a):
    if a is not None:
        a = np.asarray(a)
        a.flags.writeable = False
    return a


class Field:
    """Base class for periodic fields.

    Instances are immutable.  Whichever representation is missing is
    computed on first access and cached.
    """

    rank = 0

    def __init__(self, grid: Grid, nodal=None, spectral=None):
        if nodal is None and spectral is None:
            raise ValueError("field needs a nodal or spectral representation")
        expected = (3,) * self.rank + grid.shape
        for name, arr in (("nodal", nodal), ("spectral", spectral)):
            if arr is not None and np.shape(arr) != expected:
                raise ValueError(f"{name} array has shape {np.shape(arr)}, expected {expected}")
        self.grid = grid
        self._nodal = _freeze(None if nodal is None else np.asarray(nodal, dtype=float))
        self._spectral = _freeze(None if spectral is None else np.asarray(spectral, dtype=complex))

    # representations -----------------------------------------------------

    @property
    def nodal(self) -> np.ndarray:
        if self._nodal is None:
            a = np.fft.ifftn(self._spectral, axes=AXES).real * self.grid.size
            self._nodal = _freeze(a)
        return self._nodal

    @property
    def spectral(self) -> np.ndarray:
        if self._spectral is None:
            a = np.fft.fftn(self._nodal, axes=AXES) / self.grid.size
            self._spectral = _freeze(a)
        return self._spectral

    @property
    def has_nodal(self) -> bool:
        return self._nodal is not None

    @property
    def has_spectral(self) -> bool:
        return self._spectral is not None

    # construction helpers ------------------------------------------------

    @classmethod
    def zeros(cls, grid: Grid):
        return cls(grid, spectral=np.zeros((3,) * cls.rank + grid.shape, dtype=complex))

    def with_nodal(self, nodal):
        return type(self)(self.grid, nodal=nodal)

    def with_spectral(self, spectral):
        return type(self)(self.grid, spectral=spectral)

    # arithmetic ------------------------------------------------------------

    def _combine(self, other, op):
        if isinstance(other, Field):
            if other.grid != self.grid or other.rank != self.rank:
                raise ValueError("fields live on different grids or have different ranks")
            if self.has_nodal and other.has_nodal and not (self.has_spectral and other.has_spectral):
                return self.with_nodal(op(self.nodal, other.nodal))
            return self.with_spectral(op(self.spectral, other.spectral))
        if np.isscalar(other):
            if self.has_nodal:
                return self.with_nodal(op(self.nodal, other))
            # scalar addition only touches the mean
            s = np.zeros_like(self.spectral)
            s[(...,) + (0, 0, 0)] = 1.0
            return self.with_spectral(op(self.spectral, other * s) if op in (np.add, np.subtract)
                                      else op(self.spectral, other))
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return (-self)._combine(other, np.add)

    def __neg__(self):
        if self.has_spectral:
            return self.with_spectral(-self.spectral)
        return self.with_nodal(-self.nodal)

    def __mul__(self, other):
        if np.isscalar(other):
            if self.has_spectral:
                return self.with_spectral(self.spectral * other)
            return self.with_nodal(self.nodal * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        return NotImplemented

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n})"


class ScalarField(Field):
    rank = 0

    def times(self, other: "ScalarField") -> "ScalarField":
        """Pointwise product (not dealiased)."""
        return ScalarField(self.grid, nodal=self.nodal * other.nodal)


class VectorField(Field):
    rank = 1

    @classmethod
    def from_components(cls, *components: ScalarField) -> "VectorField":
        if len(components) != 3:
            raise ValueError("a vector field has three components")
        grid = components[0].grid
        if all(c.has_spectral for c in components):
            return cls(grid, spectral=np.stack([c.spectral for c in components]))
        return cls(grid, nodal=np.stack([c.nodal for c in components]))

    def __getitem__(self, i) -> ScalarField:
        if self.has_spectral:
            return ScalarField(self.grid, spectral=self.spectral[i])
        return ScalarField(self.grid, nodal=self.nodal[i])

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return (self[0], self[1], self[2])

    def is_mean_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.spectral[:, 0, 0, 0]) <= tol))


# transforms and projections -----------------------------------------------


def to_spectral(f: Field) -> Field:
    f.spectral
    return f


def to_nodal(f: Field) -> Field:
    f.nodal
    return f


def mean(f: Field):
    """Mean over the torus; a 3-vector for vector fields."""
    m = f.spectral[(...,) + (0, 0, 0)].real
    return float(m) if f.rank == 0 else np.array(m)


def project_mean_zero(f: Field) -> Field:
    s = f.spectral.copy()
    s[(...,) + (0, 0, 0)] = 0.0
    return f.with_spectral(s)


def dealias(f: Field) -> Field:
    """Zero every coefficient with some |k_i| > n/3."""
    return f.with_spectral(np.where(f.grid.dealias_mask, f.spectral, 0.0))


def is_band_limited(f: Field, tol: float = 0.0) -> bool:
    return bool(np.all(np.abs(f.spectral[..., ~f.grid.dealias_mask]) <= tol))


def resample(f: Field, n: int) -> Field:
    """Spectral interpolation (n larger) or truncation (n smaller) onto a new grid.

    The Nyquist plane of the source is dropped when refining, so that the
    result stays real and exact for trigonometric polynomials of degree < n/2.
    """
    src = f.grid
    dst = Grid(n)
    out = np.zeros((3,) * f.rank + dst.shape, dtype=complex)
    m = min(src.n, dst.n) // 2
    # wavenumbers -m+1 .. m-1 are common to both lattices
    idx = np.r_[0:m, -m + 1:0]
    sel = np.ix_(idx, idx, idx)
    out[(...,) + sel] = f.spectral[(...,) + sel]
    return type(f)(dst, spectral=out)


# norms and inner products --------------------------------------------------


def integral(f: ScalarField) -> float:
    return mean(f)


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product (grid quadrature, |T^3| = 1)."""
    return float(np.mean(np.sum(f.nodal * g.nodal, axis=0) if f.rank else f.nodal * g.nodal))


def l2_norm(f: Field) -> float:
    """Discrete L2 norm computed from the coefficients (Parseval)."""
    return float(np.sqrt(np.sum(np.abs(f.spectral) ** 2)))


def lp_norm(values: np.ndarray, p: float) -> float:
    """Discrete L^p norm of nodal values; vector values use the pointwise Euclidean norm."""
    a = np.asarray(values)
    if a.ndim == 4:
        a = np.sqrt(np.sum(a**2, axis=0))
    elif a.ndim == 5:
        a = np.sqrt(np.sum(a**2, axis=(0, 1)))
    a = np.abs(a)
    if np.isinf(p):
        return float(a.max())
    return float(np.mean(a**p) ** (1.0 / p))


# derivatives -----------------------------------------------------------------


def partial(f: ScalarField, axis: int) -> ScalarField:
    return f.with_spectral(2j * np.pi * f.grid.kd[axis] * f.spectral)


def grad(f: ScalarField) -> VectorField:
    return VectorField(f.grid, spectral=2j * np.pi * f.grid.kd * f.spectral)


def div(u: VectorField) -> ScalarField:
    return ScalarField(u.grid, spectral=2j * np.pi * np.sum(u.grid.kd * u.spectral, axis=0))


def laplacian(f: Field) -> Field:
    return f.with_spectral(-4 * np.pi**2 * f.grid.k2 * f.spectral)


def gradient_tensor(u: VectorField) -> np.ndarray:
    """Nodal array G[i, j] = d_j u^i, shape (3, 3, n, n, n)."""
    g = 2j * np.pi * u.grid.kd[None, :] * u.spectral[:, None]
    return np.fft.ifftn(g, axes=AXES).real * u.grid.size


def single_mode(grid: Grid, k, amplitude=1.0, kind: str = "cos") -> ScalarField:
    """cos(2 pi k.x) or sin(2 pi k.x) times ``amplitude``."""
    phase = 2 * np.pi * np.tensordot(np.asarray(k, dtype=float), grid.x, axes=1)
    fn = np.cos if kind == "cos" else np.sin
    return ScalarField(grid, nodal=amplitude * fn(phase))


def random_trig(grid: Grid, rng: np.random.Generator, rank: int = 0, kmax: int | None = None,
                mean_zero: bool = False, decay: float = 0.0) -> Field:
    """Random real trigonometric polynomial with |k_i| <= kmax (default n/3)."""
    kmax = grid.n // 3 if kmax is None else kmax
    shape = (3,) * rank + grid.shape
    noise = rng.standard_normal(shape)
    s = np.fft.fftn(noise, axes=AXES) / grid.size
    keep = np.all(np.abs(grid.k) <= kmax, axis=0)
    weight = np.where(keep, 1.0 / (1.0 + grid.k2) ** (decay / 2), 0.0)
    s = s * weight
    if mean_zero:
        s[(...,) + (0, 0, 0)] = 0.0
    cls = VectorField if rank else ScalarField
    # round-trip through nodal space so the coefficients are exactly Hermitian
    return cls(grid, nodal=np.fft.ifftn(s, axes=AXES).real * grid.size)


# field dumps -------------------------------------------------------------------


def write_field(path, f: Field) -> None:
    """Text header line, then little-endian float64 nodal values, x fastest."""
    kind = "vector" if f.rank else "scalar"
    header = f"{DUMP_MAGIC} {kind} n={f.grid.n}\n".encode("ascii")
    arrays = f.nodal if f.rank else f.nodal[None]
    with open(path, "wb") as fh:
        fh.write(header)
        for comp in arrays:
            fh.write(np.asarray(comp, dtype="<f8").ravel(order="F").tobytes())


def read_field(path) -> Field:
    data = Path(path).read_bytes()
    head, _, body = data.partition(b"\n")
    parts = head.decode("ascii").split()
    if " ".join(parts[:2]) != DUMP_MAGIC or len(parts) != 4 or not parts[3].startswith("n="):
        raise ValueError(f"{path}: not an anisoflow field dump")
    kind, n = parts[2], int(parts[3][2:])
    grid = Grid(n)
    ncomp = {"scalar": 1, "vector": 3}[kind]
    flat = np.frombuffer(body, dtype="<f8")
    if flat.size != ncomp * grid.size:
        raise ValueError(f"{path}: expected {ncomp * grid.size} values, found {flat.size}")
    comps = [flat[c * grid.size:(c + 1) * grid.size].reshape(grid.shape, order="F")
             for c in range(ncomp)]
    if kind == "scalar":
        return ScalarField(grid, nodal=comps[0].astype(float))
    return VectorField(grid, nodal=np.stack(comps).astype(float))


# padded-grid products ------------------------------------------------------------


def padded_nodal(f: Field, factor: int = 2) -> np.ndarray:
    """Nodal values of ``f`` on the grid refined by ``factor`` (spectral interpolation)."""
    return resample(f, f.grid.n * factor).nodal


def from_padded(values: np.ndarray, grid: Grid, cls=None) -> Field:
    """Restrict nodal values given on a refined grid back to ``grid`` and dealias.

    Products of band-limited fields evaluated on a grid twice as fine carry
    no aliasing error in the retained modes, so this is the exact
    dealiased product.
    """
    values = np.asarray(values, dtype=float)
    rank = values.ndim - 3
    cls = cls or (VectorField if rank == 1 else ScalarField)
    fine = Grid(values.shape[-1])
    return dealias(resample(cls(fine, nodal=values), grid.n))


def product(*fields: Field) -> Field:
    """Dealiased pointwise product of scalar fields, or of one vector field with scalars."""
    grid = fields[0].grid
    out = 1.0
    vec = False
    for f in fields:
        v = padded_nodal(f)
        vec = vec or f.rank == 1
        out = out * v
    return from_padded(out, grid, VectorField if vec else ScalarField)
