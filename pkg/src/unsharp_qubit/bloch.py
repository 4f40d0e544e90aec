"""Exact 2x2 operator algebra for a single qubit in the Bloch parametrization.

A density matrix is written rho = (1 + r.sigma)/2 with a real polarization
vector |r| <= 1, so the unit trace and Hermiticity are structural and only
positivity (|r| <= 1) needs checking.  Non-Hermitian operators (products of
measurement back-action operators) are carried separately as
c0*1 + c.sigma with complex coefficients.

Everything here is an immutable value; the sampling helpers are pure given
their random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec3 = tuple[float, float, float]
CVec3 = tuple[complex, complex, complex]

# |r| may exceed 1 by at most this much before a state is rejected.
POSITIVITY_SLACK = 1e-12

# below this Bloch length the two eigenvalues are treated as degenerate
DEGENERACY_TOL = 1e-14

_PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)


def _dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _norm(a) -> float:
    return math.sqrt(_dot(a, a))


@dataclass(frozen=True)
class DensityMatrix:
    """Qubit state rho = (1 + bloch.sigma)/2."""

    bloch: Vec3

    def __post_init__(self):
        r = tuple(float(x) for x in self.bloch)
        if len(r) != 3 or not all(math.isfinite(x) for x in r):
            raise ValueError(f"bloch vector must be a finite 3-vector, got {self.bloch!r}")
        if _dot(r, r) > (1.0 + POSITIVITY_SLACK) ** 2:
            raise ValueError(f"bloch vector leaves the unit ball: |r| = {_norm(r)!r}")
        object.__setattr__(self, "bloch", r)

    @classmethod
    def clipped(cls, bloch) -> "DensityMatrix":
        """Build a state, rescaling onto the unit sphere if |r| > 1.

        Policy for constructing operations whose floating-point result may
        overshoot the Bloch ball by rounding.
        """
        r = tuple(float(x) for x in bloch)
        n = _norm(r)
        if n > 1.0:
            r = (r[0] / n, r[1] / n, r[2] / n)
        return cls(r)

    def matrix(self) -> np.ndarray:
        """Dense 2x2 complex representation."""
        r = self.bloch
        return 0.5 * (np.eye(2, dtype=complex) + r[0] * _PAULI[0] + r[1] * _PAULI[1] + r[2] * _PAULI[2])

    def as_array(self) -> np.ndarray:
        return np.array(self.bloch, dtype=float)


FULLY_MIXED = DensityMatrix((0.0, 0.0, 0.0))


@dataclass(frozen=True)
class MeasurementAxis:
    """Unit spatial direction n; the measured observable is n.sigma."""

    direction: Vec3

    def __post_init__(self):
        n = tuple(float(x) for x in self.direction)
        if not all(math.isfinite(x) for x in n):
            raise ValueError(f"axis must be finite, got {self.direction!r}")
        if abs(_norm(n) - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, |n| = {_norm(n)!r}")
        object.__setattr__(self, "direction", n)

    @classmethod
    def from_vector(cls, v) -> "MeasurementAxis":
        """Normalize an arbitrary nonzero 3-vector into an axis."""
        n = _norm(v)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls((v[0] / n, v[1] / n, v[2] / n))

    def matrix(self) -> np.ndarray:
        n = self.direction
        return n[0] * _PAULI[0] + n[1] * _PAULI[1] + n[2] * _PAULI[2]


@dataclass(frozen=True)
class GeneralOperator:
    """General 2x2 operator scalar*1 + vector.sigma, possibly non-Hermitian."""

    scalar: complex
    vector: CVec3

    def __post_init__(self):
        object.__setattr__(self, "scalar", complex(self.scalar))
        object.__setattr__(self, "vector", tuple(complex(x) for x in self.vector))

    @classmethod
    def identity(cls) -> "GeneralOperator":
        return cls(1.0, (0.0, 0.0, 0.0))

    @property
    def is_hermitian(self) -> bool:
        return self.scalar.imag == 0.0 and all(c.imag == 0.0 for c in self.vector)

    def adjoint(self) -> "GeneralOperator":
        return GeneralOperator(
            self.scalar.conjugate(), tuple(c.conjugate() for c in self.vector)
        )

    def scaled(self, factor) -> "GeneralOperator":
        return GeneralOperator(factor * self.scalar, tuple(factor * c for c in self.vector))

    def matrix(self) -> np.ndarray:
        v = self.vector
        return self.scalar * np.eye(2, dtype=complex) + v[0] * _PAULI[0] + v[1] * _PAULI[1] + v[2] * _PAULI[2]


def pauli_product(a: GeneralOperator, b: GeneralOperator) -> GeneralOperator:
    """Operator product a*b via the Pauli composition rule.

    (a0 + a.s)(b0 + b.s) = (a0 b0 + a.b) + (a0 b + b0 a + i a x b).s
    """
    av, bv = a.vector, b.vector
    scalar = a.scalar * b.scalar + av[0] * bv[0] + av[1] * bv[1] + av[2] * bv[2]
    cross = (
        av[1] * bv[2] - av[2] * bv[1],
        av[2] * bv[0] - av[0] * bv[2],
        av[0] * bv[1] - av[1] * bv[0],
    )
    vector = tuple(
        a.scalar * bv[i] + b.scalar * av[i] + 1.0j * cross[i] for i in range(3)
    )
    return GeneralOperator(scalar, vector)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues and rank-1 eigenprojectors of a qubit state."""

    eigenvalue_plus: float
    eigenvalue_minus: float
    projector_plus: DensityMatrix
    projector_minus: DensityMatrix
    degenerate: bool = False


def purity(state: DensityMatrix) -> float:
    """tr[rho^2] = (1 + |r|^2)/2, in [1/2, 1]."""
    r = state.bloch
    return 0.5 * (1.0 + _dot(r, r))


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Bilinear overlap tr[a b] = (1 + r_a.r_b)/2; symmetric in its arguments."""
    return 0.5 * (1.0 + _dot(a.bloch, b.bloch))


def spectral_decompose(state: DensityMatrix) -> SpectralDecomposition:
    """Eigenvalues (1 +- |r|)/2 with eigenprojectors along +-r/|r|.

    A fully mixed input (|r| below the degeneracy tolerance) is flagged and
    the projectors default to the +-z axis; callers that need a random
    tie-break handle the flag themselves.
    """
    r = state.bloch
    n = _norm(r)
    if n < DEGENERACY_TOL:
        return SpectralDecomposition(
            0.5, 0.5, DensityMatrix((0.0, 0.0, 1.0)), DensityMatrix((0.0, 0.0, -1.0)), True
        )
    u = (r[0] / n, r[1] / n, r[2] / n)
    return SpectralDecomposition(
        0.5 * (1.0 + n),
        0.5 * (1.0 - n),
        DensityMatrix.clipped(u),
        DensityMatrix.clipped((-u[0], -u[1], -u[2])),
        False,
    )


def _random_unit(rng: np.random.Generator) -> Vec3:
    # normalized 3-component Gaussian draw: branch-free and exactly isotropic
    while True:
        v = rng.standard_normal(3)
        n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        if n > 0.0:
            return (v[0] / n, v[1] / n, v[2] / n)


def random_pure_state(rng: np.random.Generator) -> DensityMatrix:
    """Pure state with Bloch direction uniform on the unit sphere."""
    return DensityMatrix.clipped(_random_unit(rng))


def random_axis(rng: np.random.Generator) -> MeasurementAxis:
    """Measurement direction uniform on the unit sphere."""
    return MeasurementAxis(_random_unit(rng))
