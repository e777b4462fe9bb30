"""Operator algebra and Lindblad propagation on composite Hilbert spaces.

Composite spaces are ordered tensor products of truncated bosons and
two-level systems.  Density matrices are propagated in Liouville space
using column-stacking vectorization, vec(A rho B) = (B^T kron A) vec(rho),
under d/dt rho = -i[H, rho] + sum_m (F_m rho F_m^+ - (1/2){F_m^+ F_m, rho})
with H in rad/ps and rates in 1/ps.

All objects are immutable after construction; the only mutable state is a
lazily computed spectral cache on Superoperator, which is reused across
repeated propagations of the same generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

__all__ = [
    "Boson",
    "TwoLevel",
    "HilbertSpace",
    "Operator",
    "DensityMatrix",
    "Superoperator",
    "build_space",
    "factor_operator",
    "liouvillian",
    "propagate",
    "expectation",
    "vectorize",
    "unvectorize",
]

# Density-matrix kinds.  "physical" states satisfy Hermiticity, unit trace
# and positivity; "branch" states are perturbative response branches
# (results of drive kicks) and carry no such constraints.
PHYSICAL = "physical"
BRANCH = "branch"

HERMITICITY_RTOL = 1e-12

# Above this Liouville dimension a full eigendecomposition is not worth the
# cubic cost; propagation falls back to Krylov exp(Mt)v products.
_SPECTRAL_DIM_LIMIT = 2100


@dataclass(frozen=True)
class Boson:
    """Bosonic factor truncated at Fock state `cutoff` (dimension cutoff+1)."""

    cutoff: int

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError(f"boson cutoff must be >= 1, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class TwoLevel:
    """Two-level factor with basis order (ground, excited)."""

    @property
    def dim(self) -> int:
        return 2


class HilbertSpace:
    """Ordered tensor product of Boson / TwoLevel factors.

    The factor order is fixed at construction; every operator built from
    the space records its identity, and cross-space arithmetic is rejected.
    """

    def __init__(self, factors):
        factors = tuple(factors)
        if not factors:
            raise ValueError("a Hilbert space needs at least one factor")
        for f in factors:
            if not isinstance(f, (Boson, TwoLevel)):
                raise TypeError(f"unsupported factor {f!r}")
        self._factors = factors
        self._dims = tuple(f.dim for f in factors)
        self._dim = int(np.prod(self._dims))

    @property
    def factors(self):
        return self._factors

    @property
    def dims(self):
        return self._dims

    @property
    def dim(self) -> int:
        return self._dim

    def identity(self) -> np.ndarray:
        return np.eye(self._dim, dtype=complex)

    def basis_index(self, occupations) -> int:
        """Flat index of the basis state with the given per-factor levels."""
        occupations = tuple(occupations)
        if len(occupations) != len(self._factors):
            raise ValueError("one occupation per factor required")
        idx = 0
        for n, d in zip(occupations, self._dims):
            if not 0 <= n < d:
                raise ValueError(f"occupation {n} out of range for dim {d}")
            idx = idx * d + n
        return idx

    def basis_state(self, occupations) -> np.ndarray:
        ket = np.zeros(self._dim, dtype=complex)
        ket[self.basis_index(occupations)] = 1.0
        return ket

    def vacuum(self) -> "DensityMatrix":
        """|0><0| with every factor in its lowest level."""
        rho = np.zeros((self._dim, self._dim), dtype=complex)
        rho[0, 0] = 1.0
        return DensityMatrix(self, rho, kind=PHYSICAL)

    def __eq__(self, other):
        return self is other or (
            isinstance(other, HilbertSpace) and self._factors == other._factors
        )

    def __hash__(self):
        return hash(self._factors)

    def __repr__(self):
        return f"HilbertSpace({list(self._factors)!r}, dim={self._dim})"


def build_space(factors) -> HilbertSpace:
    """Build a composite space from an ordered list of factor descriptors."""
    return HilbertSpace(factors)


def _check_same_space(a, b):
    if a.space != b.space:
        raise ValueError("operands live on different Hilbert spaces")


class Operator:
    """Dense operator bound to a HilbertSpace.

    With hermitian=True the matrix is verified against
    max|M - M^+| <= 1e-12 max|M| at construction.
    """

    def __init__(self, space: HilbertSpace, matrix, hermitian: bool = False):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (space.dim, space.dim):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match space dim {space.dim}"
            )
        if hermitian:
            scale = max(np.abs(matrix).max(), 1e-300)
            dev = np.abs(matrix - matrix.conj().T).max()
            if dev > HERMITICITY_RTOL * scale:
                raise ValueError(
                    f"operator marked hermitian deviates by {dev:.3e} "
                    f"(allowed {HERMITICITY_RTOL * scale:.3e})"
                )
        self.space = space
        self.matrix = matrix
        self.hermitian = hermitian

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, hermitian=self.hermitian)

    def __add__(self, other):
        _check_same_space(self, other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        _check_same_space(self, other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        _check_same_space(self, other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __repr__(self):
        return f"Operator(dim={self.space.dim}, hermitian={self.hermitian})"


class DensityMatrix:
    """Density matrix of kind PHYSICAL or BRANCH (perturbative response)."""

    def __init__(self, space: HilbertSpace, matrix, kind: str = PHYSICAL):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (space.dim, space.dim):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match space dim {space.dim}"
            )
        if kind not in (PHYSICAL, BRANCH):
            raise ValueError(f"unknown density-matrix kind {kind!r}")
        self.space = space
        self.matrix = matrix
        self.kind = kind

    def validate(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10):
        """Check the PHYSICAL invariants; BRANCH states are unconstrained."""
        if self.kind != PHYSICAL:
            return
        scale = max(np.abs(self.matrix).max(), 1e-300)
        dev = np.abs(self.matrix - self.matrix.conj().T).max()
        if dev > herm_tol * scale:
            raise ValueError(f"physical state not Hermitian (deviation {dev:.3e})")
        tr = self.matrix.trace()
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"physical state trace {tr} != 1")
        lo = scipy.linalg.eigvalsh(self.matrix).min()
        if lo < -eig_tol:
            raise ValueError(f"physical state has eigenvalue {lo:.3e} < 0")

    def trace(self) -> complex:
        return complex(self.matrix.trace())

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self):
        return f"DensityMatrix(dim={self.space.dim}, kind={self.kind!r})"


def vectorize(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a dim x dim matrix into a dim^2 vector."""
    return np.asarray(matrix, dtype=complex).reshape(-1, order="F")


def unvectorize(vec: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vec, dtype=complex).reshape((dim, dim), order="F")


_BOSON_KINDS = ("lower", "raise", "number")
_TWOLEVEL_KINDS = ("sigma_minus", "sigma_plus")


def _single_factor_matrix(factor, kind: str) -> np.ndarray:
    d = factor.dim
    if kind == "identity":
        return np.eye(d, dtype=complex)
    if isinstance(factor, Boson):
        if kind not in _BOSON_KINDS:
            raise ValueError(f"kind {kind!r} is not valid on a Boson factor")
        a = np.zeros((d, d), dtype=complex)
        for n in range(1, d):
            a[n - 1, n] = np.sqrt(n)
        if kind == "lower":
            return a
        if kind == "raise":
            return a.conj().T
        return a.conj().T @ a
    if kind not in _TWOLEVEL_KINDS:
        raise ValueError(f"kind {kind!r} is not valid on a TwoLevel factor")
    sm = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    return sm if kind == "sigma_minus" else sm.conj().T


def factor_operator(space: HilbertSpace, index: int, kind: str) -> Operator:
    """Single-factor operator embedded by Kronecker products with identities.

    kind is one of "lower", "raise", "number" (Boson), "sigma_minus",
    "sigma_plus" (TwoLevel), or "identity" (any factor).
    """
    if not 0 <= index < len(space.factors):
        raise ValueError(f"factor index {index} out of range")
    block = _single_factor_matrix(space.factors[index], kind)
    mat = np.eye(1, dtype=complex)
    for i, f in enumerate(space.factors):
        mat = np.kron(mat, block if i == index else np.eye(f.dim, dtype=complex))
    hermitian = kind in ("number", "identity")
    return Operator(space, mat, hermitian=hermitian)


class Superoperator:
    """Liouville-space generator M acting on column-stacked vec(rho).

    d/dt vec(rho) = M vec(rho).  Propagation caches one eigendecomposition
    of M and reuses it for every requested time; if the eigenvector basis
    is unreliable (or the dimension too large) it falls back to Krylov
    matrix-exponential products per time point.
    """

    def __init__(self, space: HilbertSpace, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        n = space.dim * space.dim
        if matrix.shape != (n, n):
            raise ValueError(f"superoperator shape {matrix.shape} != ({n}, {n})")
        self.space = space
        self.matrix = matrix
        self._spectral_cache = None

    def apply(self, rho_matrix: np.ndarray) -> np.ndarray:
        d = self.space.dim
        return unvectorize(self.matrix @ vectorize(rho_matrix), d)

    def _spectral(self):
        """(eigvals, V, V^-1) of M, or None when not usable."""
        if self._spectral_cache is None:
            n = self.matrix.shape[0]
            if n > _SPECTRAL_DIM_LIMIT:
                self._spectral_cache = (False, None)
            else:
                w, v = np.linalg.eig(self.matrix)
                try:
                    vinv = np.linalg.inv(v)
                except np.linalg.LinAlgError:
                    self._spectral_cache = (False, None)
                    return None
                # Defective or near-defective generators reconstruct badly;
                # detect that and refuse the cache rather than lose accuracy.
                resid = np.abs((v * w) @ vinv - self.matrix).max()
                scale = max(np.abs(self.matrix).max(), 1e-300)
                if resid > 1e-9 * scale:
                    self._spectral_cache = (False, None)
                else:
                    self._spectral_cache = (True, (w, v, vinv))
        ok, data = self._spectral_cache
        return data if ok else None

    def evolve_vecs(self, vecs: np.ndarray, t: float) -> np.ndarray:
        """exp(M t) applied to one vector or to each column of a matrix."""
        spectral = self._spectral()
        if spectral is not None:
            w, v, vinv = spectral
            y = vinv @ vecs
            if y.ndim == 1:
                return v @ (np.exp(w * t) * y)
            return v @ (np.exp(w * t)[:, None] * y)
        return scipy.sparse.linalg.expm_multiply(self.matrix * t, vecs)

    def evolve_grid(self, vec: np.ndarray, times: np.ndarray) -> np.ndarray:
        """exp(M t) vec for every t; returns an (n, len(times)) array."""
        times = np.asarray(times, dtype=float)
        spectral = self._spectral()
        if spectral is not None:
            w, v, vinv = spectral
            y = vinv @ vec
            phases = np.exp(np.outer(w, times))
            return v @ (phases * y[:, None])
        cols = [self.evolve_vecs(vec, t) for t in times]
        return np.stack(cols, axis=1)


def liouvillian(H: Operator, jumps) -> Superoperator:
    """Assemble the Lindblad generator for Hamiltonian H and jump operators.

    The vectorized identity is a left null vector of the result, so the
    propagation is trace preserving for any jump set in Lindblad form.
    """
    if not H.hermitian:
        scale = max(np.abs(H.matrix).max(), 1e-300)
        if np.abs(H.matrix - H.matrix.conj().T).max() > HERMITICITY_RTOL * scale:
            raise ValueError("liouvillian requires a Hermitian Hamiltonian")
    space = H.space
    d = space.dim
    eye = np.eye(d, dtype=complex)
    m = np.zeros((d * d, d * d), dtype=complex)
    m -= 1j * (np.kron(eye, H.matrix) - np.kron(H.matrix.T, eye))
    for F in jumps:
        if F.space != space:
            raise ValueError("jump operator lives on a different space")
        f = F.matrix
        ff = f.conj().T @ f
        m += np.kron(f.conj(), f)
        m -= 0.5 * np.kron(eye, ff)
        m -= 0.5 * np.kron(ff.T, eye)
    return Superoperator(space, m)


def propagate(
    L: Superoperator,
    rho: DensityMatrix,
    t: float,
    method: str = "exact",
    dt: float | None = None,
) -> DensityMatrix:
    """Evolve rho by exp(M t); kind is preserved.

    method="exact" applies the matrix exponential through the cached
    eigendecomposition of M (Krylov products beyond the size limit).
    method="rk4" integrates d/dt vec(rho) = M vec(rho) with a fixed step
    no larger than dt.
    """
    if L.space != rho.space:
        raise ValueError("superoperator and state live on different spaces")
    if t < 0:
        raise ValueError("propagation time must be >= 0")
    if t == 0:
        return DensityMatrix(rho.space, rho.matrix.copy(), kind=rho.kind)
    vec = vectorize(rho.matrix)
    if method == "exact":
        out = L.evolve_vecs(vec, t)
    elif method == "rk4":
        if dt is None or dt <= 0:
            raise ValueError("rk4 requires dt > 0")
        if dt > t:
            raise ValueError("rk4 requires dt <= t")
        out = _rk4(L.matrix, vec, t, dt)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    if not np.all(np.isfinite(out)):
        raise RuntimeError(
            "non-finite entries after propagation; reduce dt or check the generator"
        )
    return DensityMatrix(rho.space, unvectorize(out, rho.space.dim), kind=rho.kind)


def _rk4(m: np.ndarray, vec: np.ndarray, t: float, dt: float) -> np.ndarray:
    n_steps = max(1, int(np.ceil(t / dt - 1e-12)))
    h = t / n_steps
    y = vec.astype(complex)
    for _ in range(n_steps):
        k1 = m @ y
        k2 = m @ (y + 0.5 * h * k1)
        k3 = m @ (y + 0.5 * h * k2)
        k4 = m @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def expectation(O: Operator, rho: DensityMatrix) -> complex:
    """Tr(O rho)."""
    _check_same_space(O, rho)
    return complex(np.trace(O.matrix @ rho.matrix))
