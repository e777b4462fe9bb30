"""Two-cavity Tavis-Cummings model with dissipative photon transfer.

Each cavity contributes one bright photon mode coupled to one collective
vibration (two-level approximation).  The factor order of the composite
space is fixed to (photon_A, photon_B, vib_A, vib_B).  The Hamiltonian is
written in a rotating frame so that dynamics happen at detunings instead
of optical frequencies; reported frequencies always add the frame back.

Dissipation channels: photon and vibration decay per cavity, plus the
one-way photon transfer a_B^+ a_A that moves excitation from the
higher-frequency cavity A into cavity B and never back.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .constants import angular_to_wavenumber, wavenumber_to_angular
from .qdyn import (
    BRANCH,
    Boson,
    DensityMatrix,
    HilbertSpace,
    Operator,
    TwoLevel,
    build_space,
    factor_operator,
)

POLARITON_LABELS = ("UP_A", "UP_B", "LP_A", "LP_B")

# Factor indices in the fixed composite order.
_PHOTON_A, _PHOTON_B, _VIB_A, _VIB_B = 0, 1, 2, 3


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the coupled-cavity model.

    Frequencies and g in cm^-1, rates in 1/ps, drive couplings
    dimensionless.  gamma holds (photon_A, photon_B, vib_A, vib_B,
    transfer A->B); gamma_phi optionally adds inter-cavity pure dephasing.
    The decay rates are calibration parameters chosen so that polariton
    lines are a few cm^-1 wide and coherences die within a few ps.
    """

    omega_a: float = 1998.2
    omega_b: float = 1971.4
    omega_0: float = 1983.0
    g: float = 18.7
    mu_a: float = 1.0
    mu_b: float = 1.0
    gamma: tuple[float, float, float, float, float] = (0.3, 0.3, 0.15, 0.15, 0.5)
    gamma_phi: float = 0.0
    n_max: int = 2
    frame: float = 1983.0

    def __post_init__(self):
        for name in ("omega_a", "omega_b", "omega_0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0 cm^-1")
        object.__setattr__(self, "gamma", tuple(float(x) for x in self.gamma))
        if len(self.gamma) != 5:
            raise ValueError("gamma must hold exactly five rates")
        if any(x < 0 for x in self.gamma) or self.gamma_phi < 0:
            raise ValueError("decay rates must be >= 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.g < 0 or self.g >= min(self.omega_a, self.omega_b):
            raise ValueError("coupling g must satisfy 0 <= g < min(omega_a, omega_b)")


@lru_cache(maxsize=8)
def _space_for_cutoff(n_max: int) -> HilbertSpace:
    return build_space([Boson(n_max), Boson(n_max), TwoLevel(), TwoLevel()])


def model_space(p: ModelParams) -> HilbertSpace:
    """Composite space in the fixed order (photon_A, photon_B, vib_A, vib_B)."""
    return _space_for_cutoff(p.n_max)


def build_hamiltonian(p: ModelParams) -> Operator:
    """Rotating-frame Hamiltonian in rad/ps; conserves total excitation."""
    space = model_space(p)
    n_a = factor_operator(space, _PHOTON_A, "number").matrix
    n_b = factor_operator(space, _PHOTON_B, "number").matrix
    h = wavenumber_to_angular(p.omega_a - p.frame) * n_a
    h = h + wavenumber_to_angular(p.omega_b - p.frame) * n_b
    g_ang = wavenumber_to_angular(p.g)
    d0 = wavenumber_to_angular(p.omega_0 - p.frame)
    for ph, vib in ((_PHOTON_A, _VIB_A), (_PHOTON_B, _VIB_B)):
        sp = factor_operator(space, vib, "sigma_plus").matrix
        sm = factor_operator(space, vib, "sigma_minus").matrix
        adag = factor_operator(space, ph, "raise").matrix
        a = factor_operator(space, ph, "lower").matrix
        h = h + d0 * (sp @ sm) + g_ang * (adag @ sm + a @ sp)
    return Operator(space, h, hermitian=True)


def total_excitation(p: ModelParams) -> Operator:
    """n_A + n_B + vibration populations; commutes with the Hamiltonian."""
    space = model_space(p)
    m = factor_operator(space, _PHOTON_A, "number").matrix.copy()
    m += factor_operator(space, _PHOTON_B, "number").matrix
    for vib in (_VIB_A, _VIB_B):
        sp = factor_operator(space, vib, "sigma_plus").matrix
        sm = factor_operator(space, vib, "sigma_minus").matrix
        m += sp @ sm
    return Operator(space, m, hermitian=True)


def drive_operator(p: ModelParams) -> Operator:
    """Laser coupling mu_A (a_A^+ + a_A) + mu_B (a_B^+ + a_B)."""
    space = model_space(p)
    m = p.mu_a * (
        factor_operator(space, _PHOTON_A, "raise").matrix
        + factor_operator(space, _PHOTON_A, "lower").matrix
    )
    m += p.mu_b * (
        factor_operator(space, _PHOTON_B, "raise").matrix
        + factor_operator(space, _PHOTON_B, "lower").matrix
    )
    return Operator(space, m, hermitian=True)


def emission_operator(p: ModelParams) -> Operator:
    """Positive-frequency (lowering) part of the drive, mu_A a_A + mu_B a_B.

    Heterodyne detection measures the analytic emission amplitude, so
    detected traces are Tr of this operator times the state; using the
    lowering part alone keeps reported traces independent of the rotating
    frame and avoids spurious mirror peaks folded in by the frame.
    """
    space = model_space(p)
    m = p.mu_a * factor_operator(space, _PHOTON_A, "lower").matrix
    m += p.mu_b * factor_operator(space, _PHOTON_B, "lower").matrix
    return Operator(space, m)


def jump_operators(p: ModelParams) -> list[Operator]:
    """Lindblad jump set [F1..F5] plus optional inter-cavity dephasing.

    F5 = sqrt(gamma_5) a_B^+ a_A transfers photons from cavity A to B and
    annihilates any B-only excitation, which makes the transfer one-way.
    Zero-rate channels are kept as zero operators for positional stability.
    """
    space = model_space(p)
    g1, g2, g3, g4, g5 = p.gamma
    a_a = factor_operator(space, _PHOTON_A, "lower")
    a_b = factor_operator(space, _PHOTON_B, "lower")
    jumps = [
        np.sqrt(g1) * a_a,
        np.sqrt(g2) * a_b,
        np.sqrt(g3) * factor_operator(space, _VIB_A, "sigma_minus"),
        np.sqrt(g4) * factor_operator(space, _VIB_B, "sigma_minus"),
        np.sqrt(g5) * (a_b.dagger() @ a_a),
    ]
    if p.gamma_phi > 0:
        n_a = factor_operator(space, _PHOTON_A, "number")
        n_b = factor_operator(space, _PHOTON_B, "number")
        jumps.append(np.sqrt(p.gamma_phi) * (n_a - n_b))
    return jumps


@dataclass(eq=False)
class PolaritonBasis:
    """Single-excitation eigenstates labeled UP_/LP_ per cavity.

    freqs are absolute frequencies in cm^-1; vectors live in the ordered
    single-excitation basis (photon_A, photon_B, vib_A, vib_B); hopfield
    maps each label to its (photon, matter) weight pair.
    """

    freqs: dict
    vectors: dict
    hopfield: dict

    def splitting(self, cavity: str) -> float:
        """Rabi splitting UP_i - LP_i of the requested cavity ("A" or "B")."""
        return self.freqs[f"UP_{cavity}"] - self.freqs[f"LP_{cavity}"]


def single_excitation_indices(space: HilbertSpace) -> list[int]:
    """Flat indices of (photon_A, photon_B, vib_A, vib_B) one-quantum states."""
    return [
        space.basis_index((1, 0, 0, 0)),
        space.basis_index((0, 1, 0, 0)),
        space.basis_index((0, 0, 1, 0)),
        space.basis_index((0, 0, 0, 1)),
    ]


def polariton_basis(p: ModelParams) -> PolaritonBasis:
    """Diagonalize the single-excitation block, sector by sector.

    The block is block-diagonal in cavity sectors because each photon mode
    couples only to its own vibration; within a sector the higher
    eigenvalue is UP, the lower LP.
    """
    space = model_space(p)
    h = build_hamiltonian(p).matrix
    idx = single_excitation_indices(space)
    block = h[np.ix_(idx, idx)]
    # positions of (photon, vibration) inside the 4-dim single-excitation basis
    sectors = {"A": (0, 2), "B": (1, 3)}
    freqs, vectors, hopfield = {}, {}, {}
    degeneracy_floor = wavenumber_to_angular(1e-9)
    for cavity, (iph, ivib) in sectors.items():
        sub = block[np.ix_([iph, ivib], [iph, ivib])]
        evals, evecs = np.linalg.eigh(sub)
        if abs(evals[1] - evals[0]) < degeneracy_floor:
            raise ValueError(
                f"sector {cavity} eigenvalues are degenerate; UP/LP labels undefined"
            )
        for which, col in (("LP", 0), ("UP", 1)):
            vec4 = np.zeros(4, dtype=complex)
            vec4[iph] = evecs[0, col]
            vec4[ivib] = evecs[1, col]
            # deterministic sign: photon amplitude real positive
            if vec4[iph].real < 0:
                vec4 = -vec4
            label = f"{which}_{cavity}"
            freqs[label] = angular_to_wavenumber(evals[col]) + p.frame
            vectors[label] = vec4
            hopfield[label] = (abs(vec4[iph]) ** 2, abs(vec4[ivib]) ** 2)
    return PolaritonBasis(freqs=freqs, vectors=vectors, hopfield=hopfield)


def prepare_coherence(
    basis: PolaritonBasis, ket: str, bra: str, space: HilbertSpace
) -> DensityMatrix:
    """Embed |P_ket><P_bra| from the single-excitation subspace.

    The result is a perturbative branch: traceless for ket != bra, with no
    positivity requirement.
    """
    for label in (ket, bra):
        if label not in basis.vectors:
            raise ValueError(
                f"unknown polariton label {label!r}; choose from {POLARITON_LABELS}"
            )
    idx = single_excitation_indices(space)
    ket_full = np.zeros(space.dim, dtype=complex)
    bra_full = np.zeros(space.dim, dtype=complex)
    ket_full[idx] = basis.vectors[ket]
    bra_full[idx] = basis.vectors[bra]
    rho = np.outer(ket_full, bra_full.conj())
    return DensityMatrix(space, rho, kind=BRANCH)


@dataclass(frozen=True)
class CouplingFit:
    """Least-squares light-matter coupling estimate with its residual norm."""

    g: float
    residual: float


def sector_frequencies(omega_c: float, omega_0: float, g: float) -> tuple[float, float]:
    """Closed-form (UP, LP) frequencies of one cavity sector in cm^-1."""
    mean = 0.5 * (omega_c + omega_0)
    half = 0.5 * (omega_c - omega_0)
    r = np.sqrt(half * half + g * g)
    return mean + r, mean - r


def fit_coupling(
    observed, omega_a: float, omega_b: float, omega_0: float, g_max: float = 500.0
) -> CouplingFit:
    """Fit the scalar coupling to four observed polariton frequencies.

    observed is (UP_A, UP_B, LP_A, LP_B) in cm^-1; the residual is the
    Euclidean norm over the four closed-form sector frequencies.

    The sector means (UP_i + LP_i)/2 do not depend on g, so the
    least-squares problem reduces to matching the half-splittings
    h_i = (UP_i - LP_i)/2 against r_i(g) = sqrt(delta_i^2 + g^2).  The
    stationarity condition sum_i h_i / r_i(g) = 2 is monotone in g^2 and
    solved by bracketed root finding; g = 0 when no interior root exists.
    """
    up_a, up_b, lp_a, lp_b = (float(x) for x in observed)
    if up_a <= lp_a or up_b <= lp_b:
        raise ValueError("observed frequencies must satisfy UP_i > LP_i")
    halves = np.array([0.5 * (up_a - lp_a), 0.5 * (up_b - lp_b)])
    deltas = np.array([0.5 * (omega_a - omega_0), 0.5 * (omega_b - omega_0)])

    def stationarity(x):  # x = g^2
        return np.sum(halves / np.sqrt(deltas**2 + x)) - 2.0

    x_lo = 0.0 if np.all(deltas != 0.0) else 1e-30
    if stationarity(x_lo) <= 0.0:
        g = 0.0
    else:
        try:
            x = brentq(stationarity, x_lo, g_max * g_max, xtol=1e-14, rtol=1e-15)
        except ValueError as exc:
            raise RuntimeError(f"coupling fit failed to bracket a root: {exc}")
        g = float(np.sqrt(x))
    ua, la = sector_frequencies(omega_a, omega_0, g)
    ub, lb = sector_frequencies(omega_b, omega_0, g)
    resid = np.sqrt(
        (ua - up_a) ** 2 + (ub - up_b) ** 2 + (la - lp_a) ** 2 + (lb - lp_b) ** 2
    )
    return CouplingFit(g=g, residual=float(resid))
