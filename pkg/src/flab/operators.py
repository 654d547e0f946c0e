"""Dense operator algebra for finite spin systems.

Everything here works with explicit complex matrices on n qudits of local
dimension d: traceless single-site bases, embeddings, site permutations,
fluctuation operators, and the k-local / permutation-symmetric operator
families whose contraction spectra the rest of the package computes.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionBudgetError, NumericalError

HERMITICITY_TOL = 1e-12
STATE_TRACE_TOL = 1e-12
STATE_EIG_FLOOR = -1e-12
PRODUCT_STATE_TOL = 1e-10
ZERO_MEAN_TOL = 1e-12
PRUNE_THRESHOLD = 1e-10
DEFAULT_MAX_DIM = 2**14


def dense_dim_budget() -> int:
    """Largest Hilbert-space dimension allowed for dense work.

    Reads the FLAB_MAX_DIM environment variable on every call so the limit
    can be raised for a single run without code changes.
    """
    raw = os.environ.get("FLAB_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise DimensionBudgetError(f"FLAB_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 2:
        raise DimensionBudgetError(f"FLAB_MAX_DIM must be >= 2, got {value}")
    return value


@dataclass(frozen=True)
class QuditSystem:
    """n qudits of local dimension d, with a dense-dimension budget check."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"local dimension must be >= 2, got {self.d}")
        if self.n < 1:
            raise ValueError(f"site count must be >= 1, got {self.n}")
        budget = dense_dim_budget()
        if self.d**self.n > budget:
            raise DimensionBudgetError(
                f"dense dimension {self.d}**{self.n} exceeds budget {budget}; "
                "set FLAB_MAX_DIM to override"
            )

    @property
    def dim(self) -> int:
        return self.d**self.n

    def site_dims(self) -> tuple[int, ...]:
        return (self.d,) * self.n


def as_matrix(x) -> np.ndarray:
    """Accept a DenseOperator, DensityMatrix or plain array; return ndarray."""
    if isinstance(x, (DenseOperator, DensityMatrix)):
        return x.matrix
    return np.asarray(x, dtype=complex)


class DenseOperator:
    """A dense operator tied to a QuditSystem.

    Deliberately thin; most numerical code accepts plain arrays as well.
    Setting hermitian=True verifies the claim at construction.
    """

    def __init__(self, system: QuditSystem, matrix, hermitian: bool = False, label: str | None = None):
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (system.dim, system.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match system dim {system.dim}")
        if not np.all(np.isfinite(mat)):
            raise NumericalError("operator entries must be finite")
        if hermitian:
            dev = np.max(np.abs(mat - mat.conj().T))
            if dev > HERMITICITY_TOL * max(1.0, float(np.max(np.abs(mat)))):
                raise NumericalError(f"operator marked hermitian deviates by {dev:.3e}")
        self.system = system
        self.matrix = mat
        self.hermitian = hermitian
        self.label = label

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.system, self.matrix.conj().T, hermitian=self.hermitian)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def __add__(self, other):
        return DenseOperator(self.system, self.matrix + as_matrix(other))

    def __sub__(self, other):
        return DenseOperator(self.system, self.matrix - as_matrix(other))

    def __mul__(self, scalar):
        return DenseOperator(self.system, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return DenseOperator(self.system, self.matrix @ as_matrix(other))

    def __repr__(self):
        tag = self.label or "operator"
        return f"DenseOperator({tag}, d={self.system.d}, n={self.system.n})"


class DensityMatrix:
    """Validated density matrix with cached eigendecomposition."""

    def __init__(self, matrix, check: bool = True):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        if check:
            herm_dev = np.max(np.abs(mat - mat.conj().T))
            if herm_dev > STATE_TRACE_TOL * max(1.0, float(np.max(np.abs(mat)))):
                raise NumericalError(f"density matrix not hermitian: deviation {herm_dev:.3e}")
            mat = 0.5 * (mat + mat.conj().T)
            tr = np.trace(mat).real
            if abs(tr - 1.0) > STATE_TRACE_TOL:
                raise NumericalError(f"density matrix trace {tr} differs from 1")
            eigs = np.linalg.eigvalsh(mat)
            if eigs.min() < STATE_EIG_FLOOR:
                raise NumericalError(f"density matrix has negative eigenvalue {eigs.min():.3e}")
        self.matrix = mat
        self._eig = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and matching eigenvector columns."""
        if self._eig is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            order = np.argsort(vals)[::-1]
            self._eig = (vals[order], _fix_column_phases(vecs[:, order]))
        return self._eig

    def expectation(self, op) -> float:
        return float(np.trace(self.matrix @ as_matrix(op)).real)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def _fix_column_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = int(np.argmax(np.abs(col)))
        pivot = col[idx]
        if abs(pivot) > 0:
            out[:, j] = col * (abs(pivot) / pivot)
    return out


def pure_state_density(vec) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex).ravel()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero vector cannot define a state")
    v = v / norm
    return DensityMatrix(np.outer(v, v.conj()), check=False)


def basis_pure_density(d: int, level: int = 0) -> DensityMatrix:
    vec = np.zeros(d)
    vec[level] = 1.0
    return pure_state_density(vec)


def maximally_mixed_density(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d) / d, check=False)


def product_density(state_1site: DensityMatrix, n: int) -> DensityMatrix:
    """n-fold tensor power of a single-site state."""
    mat = np.array([[1.0]], dtype=complex)
    for _ in range(n):
        mat = np.kron(mat, state_1site.matrix)
    return DensityMatrix(mat, check=False)


def reduced_density(matrix, system: QuditSystem, keep_sites) -> np.ndarray:
    """Partial trace keeping the listed sites (ascending order)."""
    keep = sorted(keep_sites)
    d, n = system.d, system.n
    tens = as_matrix(matrix).reshape((d,) * (2 * n))
    drop = [i for i in range(n) if i not in keep]
    for offset, site in enumerate(drop):
        # row axis of the partially traced tensor for this site, and its column twin
        ax = site - sum(1 for s in drop[:offset] if s < site)
        n_left = n - offset
        tens = np.trace(tens, axis1=ax, axis2=ax + n_left)
    k = len(keep)
    return tens.reshape(d**k, d**k)


def factor_product_state(state: DensityMatrix, system: QuditSystem) -> list[DensityMatrix]:
    """Split a product state into site marginals; reject correlated states."""
    marginals = [DensityMatrix(reduced_density(state, system, [i]), check=False) for i in range(system.n)]
    rebuilt = np.array([[1.0]], dtype=complex)
    for m in marginals:
        rebuilt = np.kron(rebuilt, m.matrix)
    dev = np.max(np.abs(rebuilt - state.matrix))
    if dev > PRODUCT_STATE_TOL:
        raise NumericalError(
            f"state is not a product over sites: reconstruction deviation {dev:.3e}"
        )
    return marginals


def gell_mann_basis(d: int) -> list[np.ndarray]:
    """Traceless hermitian basis with tr(g_a g_b) = 2 delta_ab.

    Order: for each index pair j<k (lexicographic) the symmetric then the
    antisymmetric matrix, followed by the d-1 diagonal matrices.  For d=2
    this is [tau_1, tau_2, tau_3].
    """
    if d < 2:
        raise ValueError("need d >= 2")
    basis = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            basis.append(sym)
            antisym = np.zeros((d, d), dtype=complex)
            antisym[j, k] = -1j
            antisym[k, j] = 1j
            basis.append(antisym)
    for l in range(1, d):
        diag = np.zeros((d, d), dtype=complex)
        for j in range(l):
            diag[j, j] = 1.0
        diag[l, l] = -l
        basis.append(diag * math.sqrt(2.0 / (l * (l + 1))))
    return basis


def single_site_zero_mean_basis(state: DensityMatrix) -> list[np.ndarray]:
    """Traceless basis rotated to the state's eigenbasis, shifted to zero mean.

    Rotating aligns the basis with the state's spectral data, so null
    directions at pure states land on single basis elements (for a pure
    qubit: tau_1, tau_2, tau_3 - 1).  The shift subtracts the expectation,
    making every element average to zero in the given state.
    """
    d = state.dim
    _, vecs = state.eigensystem()
    basis = []
    for g in gell_mann_basis(d):
        rotated = vecs @ g @ vecs.conj().T
        mean = np.trace(state.matrix @ rotated).real
        basis.append(rotated - mean * np.eye(d))
    return basis


def tensor_product(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_many(ops) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for op in ops:
        out = np.kron(out, as_matrix(op))
    return out


def site_product(factors: dict[int, np.ndarray], system: QuditSystem) -> np.ndarray:
    """Product of single-site operators acting on the given sites.

    factors maps site index -> (d, d) matrix; omitted sites get the identity.
    """
    eye = np.eye(system.d, dtype=complex)
    ops = [as_matrix(factors[i]) if i in factors else eye for i in range(system.n)]
    return tensor_many(ops)


def embed_at_site(op, site: int, system: QuditSystem) -> np.ndarray:
    if not 0 <= site < system.n:
        raise ValueError(f"site {site} out of range for n={system.n}")
    return site_product({site: as_matrix(op)}, system)


def permutation_unitary(perm, system: QuditSystem) -> np.ndarray:
    """Unitary sending site i's content to site perm[i].

    Equivalently, slot j of the output vector receives the factor at slot
    perm^{-1}(j).  The composition law is U_pi U_sigma = U_{pi o sigma}
    with (pi o sigma)(i) = pi(sigma(i)).
    """
    perm = tuple(perm)
    if sorted(perm) != list(range(system.n)):
        raise ValueError(f"{perm} is not a permutation of 0..{system.n - 1}")
    d, n = system.d, system.n
    idx = np.arange(system.dim)
    digits = np.empty((system.dim, n), dtype=np.int64)
    for i in range(n):
        digits[:, i] = (idx // d ** (n - 1 - i)) % d
    weights = np.array([d ** (n - 1 - i) for i in range(n)], dtype=np.int64)
    # y_{perm[i]} = x_i  =>  y = sum_i x_i * weight[perm[i]]
    target = digits @ weights[list(perm)]
    U = np.zeros((system.dim, system.dim), dtype=complex)
    U[target, idx] = 1.0
    return U


def permute_sites(matrix, perm, system: QuditSystem) -> np.ndarray:
    """Conjugation U_perm X U_perm^dagger without building the unitary."""
    perm = tuple(perm)
    n = system.n
    tens = as_matrix(matrix).reshape(system.site_dims() * 2)
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    axes = inv + [n + i for i in inv]
    return np.transpose(tens, axes).reshape(system.dim, system.dim)


def fluctuation_operator(a, system: QuditSystem, state_1site: DensityMatrix | None = None) -> np.ndarray:
    """Site-averaged collective operator n^{-1/2} sum_i a^{(i)}.

    If a single-site state is supplied the zero-mean precondition is
    enforced; without centering the object has no bounded scaling limit.
    """
    a = as_matrix(a)
    if state_1site is not None:
        mean = np.trace(state_1site.matrix @ a)
        if abs(mean) > ZERO_MEAN_TOL:
            raise NumericalError(
                f"single-site operator has expectation {mean:.3e}; "
                "subtract tr(rho a) times the identity first"
            )
    total = np.zeros((system.dim, system.dim), dtype=complex)
    for i in range(system.n):
        total += embed_at_site(a, i, system)
    return total / math.sqrt(system.n)


@dataclass
class SectorBasis:
    """Basis of the operators supported exactly on one site set.

    Elements are products over the support of zero-mean single-site
    operators (zero-mean in the site marginals of `state`), so sectors with
    different supports are orthogonal in the state's GNS inner product.
    """

    system: QuditSystem
    support: tuple[int, ...]
    operators: list[DenseOperator]
    state: DensityMatrix

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)


def _support_label(support: tuple[int, ...], letters: tuple[int, ...]) -> str:
    if not support:
        return "1"
    return "*".join(f"f{a}@s{i}" for i, a in zip(support, letters))


def klocal_basis(k: int, system: QuditSystem, state: DensityMatrix) -> list[SectorBasis]:
    """Sector bases for every support of at most k sites.

    The empty support carries the identity.  The state must be a product
    state; its site marginals fix the zero-mean single-site bases.
    """
    if k < 0 or k > system.n:
        raise ValueError(f"locality k={k} out of range for n={system.n}")
    marginals = factor_product_state(state, system)
    site_bases = [single_site_zero_mean_basis(m) for m in marginals]
    n_letters = system.d**2 - 1

    sectors = [
        SectorBasis(
            system,
            (),
            [DenseOperator(system, np.eye(system.dim), hermitian=True, label="1")],
            state,
        )
    ]
    for size in range(1, k + 1):
        for support in itertools.combinations(range(system.n), size):
            ops = []
            for letters in itertools.product(range(n_letters), repeat=size):
                factors = {i: site_bases[i][a] for i, a in zip(support, letters)}
                ops.append(
                    DenseOperator(
                        system,
                        site_product(factors, system),
                        hermitian=True,
                        label=_support_label(support, letters),
                    )
                )
            sectors.append(SectorBasis(system, support, ops, state))
    return sectors


def sector_span(sectors: list[SectorBasis], min_support: int = 0, max_support: int | None = None):
    """Flatten sector bases into (matrices, labels), filtered by support size."""
    matrices, labels = [], []
    for sector in sectors:
        size = len(sector.support)
        if size < min_support:
            continue
        if max_support is not None and size > max_support:
            continue
        for op in sector.operators:
            matrices.append(op.matrix)
            labels.append(op.label)
    return matrices, labels


def _set_partitions(items: tuple):
    """All partitions of a tuple into nonempty blocks."""
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [(head,) + part[i]] + part[i + 1 :]
        yield [(head,)] + part


def _distinct_site_sum(word: tuple, single_site: dict, system: QuditSystem) -> np.ndarray:
    """Sum over ordered tuples of distinct sites of the embedded letter product.

    Computed by Moebius inversion on the partition lattice of the letter
    positions: the unrestricted product of site sums overcounts exactly by
    the contributions where groups of positions share a site, and those are
    themselves distinct-site sums of shorter words with fused letters.
    """
    dim = system.dim

    def site_sum(key) -> np.ndarray:
        op = single_site[key]
        total = np.zeros((dim, dim), dtype=complex)
        for i in range(system.n):
            total += embed_at_site(op, i, system)
        return total

    def fused_key(letters: tuple) -> tuple:
        flat = []
        for l in letters:
            flat.extend(l if isinstance(l, tuple) else (l,))
        return tuple(flat)

    cache: dict[tuple, np.ndarray] = {}

    def distinct(letters: tuple) -> np.ndarray:
        if letters in cache:
            return cache[letters]
        if not letters:
            return np.eye(dim, dtype=complex)
        out = np.eye(dim, dtype=complex)
        for l in letters:
            key = l if isinstance(l, tuple) else (l,)
            key = key[0] if len(key) == 1 else key
            if isinstance(key, tuple) and key not in single_site:
                mat = np.eye(system.d, dtype=complex)
                for base in key:
                    mat = mat @ single_site[base]
                single_site[key] = mat
            out = out @ site_sum(key)
        positions = tuple(range(len(letters)))
        for part in _set_partitions(positions):
            if len(part) == len(letters):
                continue
            blocks = sorted(part, key=min)
            merged = []
            for block in blocks:
                key = fused_key(tuple(letters[p] for p in block))
                merged.append(key[0] if len(key) == 1 else key)
            out = out - distinct(tuple(merged))
        cache[letters] = out
        return out

    return distinct(tuple(word))


def symmetric_word_operator(word, basis_ops, system: QuditSystem) -> np.ndarray:
    """Scaled sum over distinct-site placements of a letter word.

    word indexes into basis_ops; the result is n^{-j/2} times the sum over
    ordered tuples of j distinct sites of the embedded product.  Since the
    letters commute across sites only the multiset of letters matters; the
    sorted tuple is the canonical form.
    """
    word = tuple(word)
    if len(word) > system.n:
        raise ValueError(f"word length {len(word)} exceeds site count {system.n}")
    single_site = {a: as_matrix(op) for a, op in enumerate(basis_ops)}
    raw = _distinct_site_sum(word, single_site, system)
    return raw / system.n ** (len(word) / 2.0)


def symmetric_words(n_letters: int, max_degree: int) -> list[tuple[int, ...]]:
    """Sorted letter multisets up to the given degree, shortest first."""
    words: list[tuple[int, ...]] = [()]
    for degree in range(1, max_degree + 1):
        words.extend(itertools.combinations_with_replacement(range(n_letters), degree))
    return words


def word_label(word: tuple[int, ...]) -> str:
    if not word:
        return "1"
    return "*".join(f"f{a}" for a in word)


def symmetric_klocal_basis(
    k: int,
    system: QuditSystem,
    state: DensityMatrix,
    prune: bool = True,
    null_threshold: float = PRUNE_THRESHOLD,
) -> list[DenseOperator]:
    """Permutation-symmetric words of degree <= k over the zero-mean basis.

    The degree-0 word is the identity.  With prune=True, words that are
    numerically null or linearly dependent in the state's GNS inner product
    are removed by greedy pivoting on the Gram matrix.
    """
    marginals = factor_product_state(state, system)
    first = marginals[0].matrix
    for m in marginals[1:]:
        if np.max(np.abs(m.matrix - first)) > PRODUCT_STATE_TOL:
            raise NumericalError("symmetric words need identical site marginals")
    site_basis = single_site_zero_mean_basis(marginals[0])
    words = [w for w in symmetric_words(system.d**2 - 1, k) if len(w) <= system.n]
    ops = [
        DenseOperator(system, symmetric_word_operator(w, site_basis, system), hermitian=True, label=word_label(w))
        for w in words
    ]
    if prune and len(ops) > 1:
        keep = _greedy_gram_prune([op.matrix for op in ops], state, null_threshold)
        ops = [ops[i] for i in keep]
    return ops


def _greedy_gram_prune(matrices, state: DensityMatrix, threshold: float) -> list[int]:
    """Indices of a maximal numerically independent subset, by pivoted Gram.

    Deterministic: pick the largest residual diagonal first, lowest index on
    ties, until the residual falls below threshold relative to the largest
    original norm.
    """
    rho = state.matrix
    # real part of gram_{ab} = tr(rho A_a^dagger A_b); the real span is what
    # the contraction spectra act on, so dependence is judged there
    plain = np.stack([mat.ravel() for mat in matrices])
    weighted = np.stack([(mat @ rho).ravel() for mat in matrices])
    gram = np.real(plain.conj() @ weighted.T)
    diag = np.real(np.diag(gram))
    scale = max(float(diag.max()), 1e-300)
    residual = gram.copy()
    kept: list[int] = []
    active = list(range(len(matrices)))
    while active:
        rd = np.real(np.diag(residual))
        i = min(active, key=lambda idx: (-rd[idx], idx))
        if rd[i] <= threshold * scale:
            break
        kept.append(i)
        active.remove(i)
        col = residual[:, i].copy()
        residual = residual - np.outer(col, col.conj()) / rd[i]
    return sorted(kept)
