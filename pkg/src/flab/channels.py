"""Quantum channels used as coarse-graining maps.

The central object is the homogeneous coarse-graining: a tensor power of a
single-site depolarizing map followed by averaging over site permutations.
Generic Kraus channels and the classical swap-diffusion generators for
lattice walkers live here as well.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import NumericalError
from .operators import QuditSystem, as_matrix, permute_sites

TRACE_PRESERVING_TOL = 1e-10
CHOI_PSD_TOL = 1e-10
EXACT_SUM_MAX_SITES = 6


class Channel:
    """Minimal channel interface: apply (Schrodinger) and adjoint_apply."""

    dim: int

    def apply(self, X) -> np.ndarray:
        raise NotImplementedError

    def adjoint_apply(self, X) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X) -> np.ndarray:
        return self.apply(X)


class DepolarizingChannel(Channel):
    """Single-site depolarizing map X -> X/y + (1 - 1/y) tr(X) I/d.

    The strength parameter y >= 1 interpolates from the identity (y=1)
    toward complete erasure.  The map is unital, trace preserving and equal
    to its own Heisenberg adjoint.
    """

    def __init__(self, y: float, d: int):
        if y < 1.0:
            raise ValueError(f"depolarizing strength must satisfy y >= 1, got {y}")
        if d < 2:
            raise ValueError(f"local dimension must be >= 2, got {d}")
        self.y = float(y)
        self.d = int(d)
        self.dim = int(d)

    def apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        return X / self.y + (1.0 - 1.0 / self.y) * np.trace(X) * np.eye(self.d) / self.d

    adjoint_apply = apply

    def kraus_operators(self) -> list[np.ndarray]:
        """Kraus family built from the d^2 discrete Weyl unitaries."""
        d, y = self.d, self.y
        shift = np.zeros((d, d), dtype=complex)
        for j in range(d):
            shift[(j + 1) % d, j] = 1.0
        clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
        ops = []
        w_id = math.sqrt(1.0 / y + (1.0 - 1.0 / y) / d**2)
        w_rest = math.sqrt((1.0 - 1.0 / y) / d**2)
        for a in range(d):
            for b in range(d):
                weyl = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
                ops.append((w_id if a == b == 0 else w_rest) * weyl)
        return ops


def single_site_superoperator(channel: Channel, d: int, adjoint: bool = False) -> np.ndarray:
    """(d*d, d*d) matrix of the channel action on vectorised d x d operators."""
    action = channel.adjoint_apply if adjoint else channel.apply
    S = np.zeros((d, d, d, d), dtype=complex)
    for b in range(d):
        for e in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[b, e] = 1.0
            S[:, :, b, e] = action(unit)
    return S.reshape(d * d, d * d)


class ProductChannel(Channel):
    """Independent action of one single-site channel on every site."""

    def __init__(self, site_channel: Channel, system: QuditSystem):
        if site_channel.dim != system.d:
            raise ValueError(
                f"site channel dimension {site_channel.dim} does not match d={system.d}"
            )
        self.site_channel = site_channel
        self.system = system
        self.dim = system.dim
        d = system.d
        self._superop = single_site_superoperator(site_channel, d).reshape(d, d, d, d)
        self._superop_adj = single_site_superoperator(site_channel, d, adjoint=True).reshape(d, d, d, d)

    def _apply_all_sites(self, X, S4: np.ndarray) -> np.ndarray:
        d, n = self.system.d, self.system.n
        out = as_matrix(X)
        for site in range(n):
            dl, dr = d**site, d ** (n - 1 - site)
            tens = out.reshape(dl, d, dr, dl, d, dr)
            tens = np.einsum("acbe,LbRMeS->LaRMcS", S4, tens)
            out = tens.reshape(self.dim, self.dim)
        return out

    def apply(self, X) -> np.ndarray:
        return self._apply_all_sites(X, self._superop)

    def adjoint_apply(self, X) -> np.ndarray:
        return self._apply_all_sites(X, self._superop_adj)


class PermutationAverage(Channel):
    """Average over all site permutations, i.e. the orthogonal projector
    onto permutation-invariant operators.

    Modes:
      "exact-sum"           literal sum over all n! permutations (n <= 6)
      "symmetric-projector" orbit averaging over elementary tensor words;
                            exact for any n and the default above 6 sites
    """

    def __init__(self, system: QuditSystem, mode: str | None = None):
        if mode is None:
            mode = "exact-sum" if system.n <= EXACT_SUM_MAX_SITES else "symmetric-projector"
        if mode not in ("exact-sum", "symmetric-projector"):
            raise ValueError(f"unknown permutation-average mode {mode!r}")
        if mode == "exact-sum" and system.n > EXACT_SUM_MAX_SITES:
            raise ValueError(
                f"exact-sum mode is limited to n <= {EXACT_SUM_MAX_SITES}, got n={system.n}"
            )
        self.system = system
        self.mode = mode
        self.dim = system.dim
        self._orbit_index = None
        self._orbit_size = None
        if mode == "symmetric-projector":
            self._build_orbits()

    def _build_orbits(self):
        d, n, dim = self.system.d, self.system.n, self.dim
        idx = np.arange(dim)
        digits = np.empty((dim, n), dtype=np.int64)
        for i in range(n):
            digits[:, i] = (idx // d ** (n - 1 - i)) % d
        # joint row/column site labels; permutations act on sites of both at once
        pair_label = digits[:, None, :] * d + digits[None, :, :]
        canon = np.sort(pair_label, axis=2)
        flat = canon.reshape(dim * dim, n)
        _, orbit_index, counts = np.unique(
            flat, axis=0, return_inverse=True, return_counts=True
        )
        self._orbit_index = orbit_index
        self._orbit_size = counts

    def apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        if self.mode == "exact-sum":
            total = np.zeros_like(X, dtype=complex)
            count = 0
            for perm in itertools.permutations(range(self.system.n)):
                total += permute_sites(X, perm, self.system)
                count += 1
            return total / count
        flat = X.ravel()
        sums = np.bincount(self._orbit_index, weights=flat.real) + 1j * np.bincount(
            self._orbit_index, weights=flat.imag
        )
        means = sums / self._orbit_size
        return means[self._orbit_index].reshape(X.shape)

    # self-adjoint in the Hilbert-Schmidt inner product
    adjoint_apply = apply


class ComposedChannel(Channel):
    """outer after inner; the adjoint composes in reverse order."""

    def __init__(self, outer: Channel, inner: Channel):
        if outer.dim != inner.dim:
            raise ValueError("composed channels must share a dimension")
        self.outer = outer
        self.inner = inner
        self.dim = outer.dim

    def apply(self, X) -> np.ndarray:
        return self.outer.apply(self.inner.apply(X))

    def adjoint_apply(self, X) -> np.ndarray:
        return self.inner.adjoint_apply(self.outer.adjoint_apply(X))


class HomogeneousCoarseGraining(ComposedChannel):
    """Permutation average after sitewise depolarization.

    The two factors commute, so the composition order is a convention.
    """

    def __init__(self, system: QuditSystem, y: float, mode: str | None = None):
        depol = ProductChannel(DepolarizingChannel(y, system.d), system)
        perm = PermutationAverage(system, mode=mode)
        super().__init__(perm, depol)
        self.system = system
        self.y = float(y)
        self.permutation_average = perm
        self.product_depolarizing = depol


def homogeneous_coarse_graining(system: QuditSystem, y: float, mode: str | None = None) -> HomogeneousCoarseGraining:
    return HomogeneousCoarseGraining(system, y, mode=mode)


def commutation_deviation(system: QuditSystem, y: float, X) -> float:
    """Max entry of P(D(X)) - D(P(X)); zero up to roundoff by construction."""
    depol = ProductChannel(DepolarizingChannel(y, system.d), system)
    perm = PermutationAverage(system)
    a = perm.apply(depol.apply(X))
    b = depol.apply(perm.apply(X))
    return float(np.max(np.abs(a - b)))


class SuperoperatorChannel(Channel):
    """Channel given by an explicit Kraus family."""

    def __init__(self, kraus: list[np.ndarray], require_trace_preserving: bool = True):
        kraus = [np.asarray(K, dtype=complex) for K in kraus]
        if not kraus:
            raise ValueError("need at least one Kraus operator")
        dim = kraus[0].shape[0]
        for K in kraus:
            if K.shape != (dim, dim):
                raise ValueError("all Kraus operators must be square and same-dimensional")
        self.kraus = kraus
        self.dim = dim
        if require_trace_preserving:
            total = sum(K.conj().T @ K for K in kraus)
            dev = np.max(np.abs(total - np.eye(dim)))
            if dev > TRACE_PRESERVING_TOL:
                raise NumericalError(f"Kraus family not trace preserving: deviation {dev:.3e}")

    def apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        return sum(K @ X @ K.conj().T for K in self.kraus)

    def adjoint_apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        return sum(K.conj().T @ X @ K for K in self.kraus)

    def choi_matrix(self) -> np.ndarray:
        d = self.dim
        choi = np.zeros((d * d, d * d), dtype=complex)
        for K in self.kraus:
            v = K.reshape(d * d, 1)
            choi += v @ v.conj().T
        return choi

    def check_completely_positive(self) -> float:
        """Smallest Choi eigenvalue; raises if below the PSD tolerance."""
        eigs = np.linalg.eigvalsh(self.choi_matrix())
        if eigs.min() < -CHOI_PSD_TOL:
            raise NumericalError(f"Choi matrix has negative eigenvalue {eigs.min():.3e}")
        return float(eigs.min())


SINGLE_WALKER_MAX_SITES = 64
PAIR_WALKER_MAX_SITES = 24


class SwapDiffusion:
    """Classical diffusion of tagged walkers driven by nearest-neighbour swaps.

    Each ring edge carries a unit-rate swap of its endpoints' contents.  A
    single tagged walker then performs a continuous-time random walk whose
    generator is the ring Laplacian; two tagged walkers move jointly on
    ordered distinct site pairs.  The smoothing time is (sigma/eps)^2 / 2,
    so one unit of sigma matches the heat-kernel width of the smoother.
    """

    def __init__(self, lattice, sigma: float):
        if sigma < 0:
            raise ValueError(f"smoothing width must be nonnegative, got {sigma}")
        self.lattice = lattice
        self.sigma = float(sigma)
        self.time = 0.5 * (sigma / lattice.spacing) ** 2

    def single_walker_generator(self) -> np.ndarray:
        L = self.lattice.n_sites
        if L > SINGLE_WALKER_MAX_SITES:
            raise ValueError(f"single-walker generator limited to L <= {SINGLE_WALKER_MAX_SITES}")
        gen = -2.0 * np.eye(L)
        for i in range(L):
            gen[i, (i + 1) % L] += 1.0
            gen[i, (i - 1) % L] += 1.0
        return gen

    def pair_states(self) -> list[tuple[int, int]]:
        L = self.lattice.n_sites
        return [(i, j) for i in range(L) for j in range(L) if i != j]

    def pair_generator(self) -> np.ndarray:
        """Generator on ordered distinct pairs; each edge swap moves both
        walkers it touches, so neighbouring walkers exchange positions
        rather than colliding."""
        L = self.lattice.n_sites
        if L > PAIR_WALKER_MAX_SITES:
            raise ValueError(f"pair-walker generator limited to L <= {PAIR_WALKER_MAX_SITES}")
        states = self.pair_states()
        index = {s: a for a, s in enumerate(states)}
        m = len(states)
        gen = np.zeros((m, m))
        edges = [(u, (u + 1) % L) for u in range(L)]
        for a, (i, j) in enumerate(states):
            for (u, v) in edges:
                ti = v if i == u else (u if i == v else i)
                tj = v if j == u else (u if j == v else j)
                b = index[(ti, tj)]
                gen[b, a] += 1.0
                gen[a, a] -= 1.0
        return gen

    def _semigroup(self, gen: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh(gen)
        return (vecs * np.exp(self.time * vals)) @ vecs.T

    def single_walker_semigroup(self) -> np.ndarray:
        return self._semigroup(self.single_walker_generator())

    def pair_semigroup(self) -> np.ndarray:
        return self._semigroup(self.pair_generator())

    def pair_marginal_matrix(self) -> np.ndarray:
        """(L, L(L-1)) matrix summing out the second walker."""
        states = self.pair_states()
        L = self.lattice.n_sites
        M = np.zeros((L, len(states)))
        for a, (i, _) in enumerate(states):
            M[i, a] = 1.0
        return M
