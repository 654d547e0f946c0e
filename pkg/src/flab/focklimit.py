"""Collective-fluctuation geometry in and near the large-n limit.

A single-site state rho and its zero-mean letter basis generate, for each n,
a family of permutation-symmetric collective observables (scaled sums over
distinct sites of letter products).  Their inner products at the product
state rho^n close over the single-site kernel K_ab = tr(rho f_a^dagger f_b):
a degree-j pair of words has inner product

    c_{n,j} * permanent(K[u, v]),      c_{n,j} = prod_{m<j} (1 - m/n),

different degrees being exactly orthogonal.  As n grows c_{n,j} -> 1 and the
geometry converges, at rate 1/n, to a bosonic (permanent) limit; generating
operators of the form prod_i (1 + i a/sqrt(n)) converge likewise to
exponential vectors with overlap exp(tr(rho a^dagger b)).

Coarse-graining channels act letterwise in this picture, so their
contraction spectra reduce to small whitened eigenproblems over tensor
powers of K: `fock_block_spectrum` for the limiting blocks on k-letter tuple
spaces, `symmetric_sector_spectrum` for the exact finite-n spectrum on the
symmetric k-local sector, and `beta_bound_test` for the sector-wise norm
bound under sitewise depolarizing noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .geometry import pushforward_norm, bures_norm, whiten_psd
from .operators import (
    DensityMatrix,
    QuditSystem,
    as_matrix,
    basis_pure_density,
    gell_mann_basis,
    klocal_basis,
    product_density,
    sector_span,
    symmetric_words,
)

NULL_LETTER_THRESHOLD = 1e-10
PERMANENT_MAX_SIZE = 8


@dataclass
class SingleParticleSpace:
    """Zero-mean letter basis at a single-site state, with its kernel.

    raw_basis holds the uncentered orthogonal letters (tr g_a g_b = 2
    delta_ab); basis holds the centered letters f_a = g_a - tr(rho g_a) 1.
    Rotating the letters into the state's eigenbasis makes every null
    direction (letters with f rho = 0) land on individual basis elements,
    so rank deficiency can be handled by dropping letters.
    """

    state: DensityMatrix
    raw_basis: list[np.ndarray]
    basis: list[np.ndarray]
    means: np.ndarray
    letter_names: list[str]
    _kernel: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_state(cls, state: DensityMatrix, letter_names: list[str] | None = None) -> "SingleParticleSpace":
        d = state.dim
        _, vecs = state.eigensystem()
        raw = [vecs @ g @ vecs.conj().T for g in gell_mann_basis(d)]
        means = np.array([np.trace(state.matrix @ g).real for g in raw])
        centered = [g - mu * np.eye(d) for g, mu in zip(raw, means)]
        if letter_names is None:
            letter_names = [f"f{a + 1}" for a in range(len(raw))]
        if len(letter_names) != len(raw):
            raise ValueError("need one name per letter")
        return cls(state, raw, centered, means, list(letter_names))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def kernel(self) -> np.ndarray:
        """K_ab = tr(rho f_a^dagger f_b); hermitian PSD."""
        if self._kernel is None:
            rho = self.state.matrix
            plain = np.stack([f.ravel() for f in self.basis])
            weighted = np.stack([(f @ rho).ravel() for f in self.basis])
            self._kernel = plain.conj() @ weighted.T
        return self._kernel

    def kept_indices(self, threshold: float = NULL_LETTER_THRESHOLD) -> list[int]:
        diag = np.real(np.diag(self.kernel))
        scale = max(float(diag.max(initial=0.0)), 1e-300)
        return [a for a, v in enumerate(diag) if v > threshold * scale]

    def reduced(self, threshold: float = NULL_LETTER_THRESHOLD) -> tuple["SingleParticleSpace", list[int]]:
        """Drop null letters; returns the smaller space and the kept indices."""
        kept = self.kept_indices(threshold)
        sub = SingleParticleSpace(
            state=self.state,
            raw_basis=[self.raw_basis[a] for a in kept],
            basis=[self.basis[a] for a in kept],
            means=self.means[kept],
            letter_names=[self.letter_names[a] for a in kept],
        )
        return sub, kept


def _heisenberg_action(channel):
    if hasattr(channel, "adjoint_apply"):
        return channel.adjoint_apply
    if callable(channel):
        return channel
    raise TypeError("channel must expose adjoint_apply or be callable")


def single_particle_channel_matrix(
    sp_fine: SingleParticleSpace,
    sp_coarse: SingleParticleSpace,
    channel,
    tol: float = 1e-10,
) -> np.ndarray:
    """Letter matrix of the channel between the two single-particle spaces.

    Column c holds the fine-letter expansion of the Heisenberg-evolved
    coarse letter: ch^dagger(f'_c) = sum_b m[b, c] f_b.  The expansion is
    exact because ch^dagger maps coarse-centered letters to fine-zero-mean
    observables (tr(rho ch^dagger(f'_c)) = tr(rho' f'_c) = 0 whenever the
    coarse state is the channel image of the fine state); the residual is
    checked and a failure reported otherwise.
    """
    act = _heisenberg_action(channel)
    d = sp_fine.state.dim
    m = np.zeros((sp_fine.dim, sp_coarse.dim))
    evolved = []
    for c, letter in enumerate(sp_coarse.basis):
        image = as_matrix(act(letter))
        evolved.append(image)
        for b, dual in enumerate(sp_fine.raw_basis):
            val = np.trace(dual @ image) / 2.0
            if abs(val.imag) > tol * max(1.0, abs(val)):
                raise NumericalError(
                    f"letter matrix entry ({b}, {c}) is not real: {val:.3e}"
                )
            m[b, c] = val.real
    for c, image in enumerate(evolved):
        rebuilt = sum(m[b, c] * f for b, f in enumerate(sp_fine.basis))
        dev = np.max(np.abs(rebuilt - image))
        if dev > tol * max(1.0, float(np.max(np.abs(image)))):
            raise NumericalError(
                "channel does not map the centered coarse letters into the "
                f"zero-mean fine span (letter {c}, deviation {dev:.3e}); "
                "check that the coarse state is the channel image of the fine state"
            )
    return m


def permanent(matrix: np.ndarray) -> complex:
    """Permanent by direct expansion; intended for small word sizes."""
    mat = np.asarray(matrix)
    size = mat.shape[0]
    if mat.shape != (size, size):
        raise ValueError(f"permanent needs a square matrix, got {mat.shape}")
    if size == 0:
        return 1.0 + 0.0j
    if size > PERMANENT_MAX_SIZE:
        raise ValueError(f"permanent expansion capped at size {PERMANENT_MAX_SIZE}")
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(size)):
        prod = 1.0 + 0.0j
        for i, j in enumerate(perm):
            prod *= mat[i, j]
        total += prod
    return total


def distinct_site_factor(n: int, j: int) -> float:
    """c_{n,j} = prod_{m<j} (1 - m/n), the distinct-site counting factor."""
    if j > n:
        raise ValueError(f"word degree {j} exceeds site count {n}")
    out = 1.0
    for m in range(j):
        out *= 1.0 - m / n
    return out


def finite_n_inner(sp: SingleParticleSpace, u, v, n: int) -> complex:
    """Inner product of two symmetric letter words at the n-site product state.

    Words of different degree are exactly orthogonal; equal degree j gives
    c_{n,j} times the permanent of the kernel minor K[u, v].  Degrees above
    n are rejected: such words have no distinct-site realization.
    """
    u, v = tuple(u), tuple(v)
    if max(len(u), len(v)) > n:
        raise ValueError(f"word degree {max(len(u), len(v))} exceeds site count {n}")
    if len(u) != len(v):
        return 0.0 + 0.0j
    minor = sp.kernel[np.ix_(u, v)]
    return distinct_site_factor(n, len(u)) * permanent(minor)


def limiting_inner(sp: SingleParticleSpace, u, v) -> complex:
    """Large-n limit of finite_n_inner: the plain permanent of K[u, v]."""
    u, v = tuple(u), tuple(v)
    if len(u) != len(v):
        return 0.0 + 0.0j
    return permanent(sp.kernel[np.ix_(u, v)])


def generating_overlap(sp: SingleParticleSpace, a_coeffs, b_coeffs, n: int) -> float:
    """Overlap of two generating operators prod_i (1 + i a/sqrt(n)) at rho^n.

    a and b are real coefficient vectors over the letter basis.  The value
    closes over the kernel: (1 + tr(rho a^dagger b)/n)^n.
    """
    a = np.asarray(a_coeffs, dtype=float)
    b = np.asarray(b_coeffs, dtype=float)
    k = float(np.real(a @ sp.kernel @ b))
    return (1.0 + k / n) ** n


def vertex_overlap(sp: SingleParticleSpace, a_coeffs, b_coeffs) -> float:
    """Limiting overlap exp(tr(rho a^dagger b)) of the generating operators."""
    a = np.asarray(a_coeffs, dtype=float)
    b = np.asarray(b_coeffs, dtype=float)
    return math.exp(float(np.real(a @ sp.kernel @ b)))


def generating_operator(a, system: QuditSystem) -> np.ndarray:
    """Dense prod_i (1 + i a^{(i)}/sqrt(n)); for cross-checks at small n."""
    site = np.eye(system.d, dtype=complex) + 1j * as_matrix(a) / math.sqrt(system.n)
    out = np.array([[1.0]], dtype=complex)
    for _ in range(system.n):
        out = np.kron(out, site)
    return out


def clt_convergence(sp: SingleParticleSpace, u, v, n_list) -> dict:
    """Convergence of finite-n word inner products to the permanent limit.

    Returns the deviation sequence and its fitted log-log rate in n, and
    asserts that deviations never increase.  For degree-2 words the
    deviation is (1 - c_{n,2}) |per| = |per| / n, so the fitted rate is -1;
    that is asserted within +-0.2 whenever the deviations are nonzero.
    """
    u, v = tuple(u), tuple(v)
    n_list = [int(n) for n in n_list]
    if sorted(n_list) != n_list or len(set(n_list)) != len(n_list):
        raise ValueError("n_list must be strictly increasing")
    limit = limiting_inner(sp, u, v)
    finite = [finite_n_inner(sp, u, v, n) for n in n_list]
    deviations = [abs(f - limit) for f in finite]
    for prev, nxt in zip(deviations, deviations[1:]):
        if nxt > prev * (1.0 + 1e-12) + 1e-300:
            raise NumericalError(
                f"finite-n deviations increased: {prev:.3e} -> {nxt:.3e}"
            )
    rate = None
    if all(dev > 1e-300 for dev in deviations):
        rate = float(np.polyfit(np.log(n_list), np.log(deviations), 1)[0])
        if len(u) == 2 and abs(rate + 1.0) > 0.2:
            raise NumericalError(
                f"degree-2 convergence rate {rate:.3f} outside -1 +- 0.2"
            )
    return {
        "n_list": n_list,
        "finite": finite,
        "limit": limit,
        "deviations": deviations,
        "rate": rate,
    }


def _tuple_words(n_letters: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.product(range(n_letters), repeat=k))


def _kron_power(mat: np.ndarray, k: int) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for _ in range(k):
        out = np.kron(out, mat)
    return out


def _combo_label(coeffs: np.ndarray, names: list[str], tol: float = 1e-8) -> str:
    parts = []
    for c, name in zip(coeffs, names):
        if abs(c) <= tol:
            continue
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {abs(c):.3g}*{name}")
    if not parts:
        return "0"
    head = parts[0].lstrip("+ ").strip()
    return " ".join([head] + parts[1:])


@dataclass
class FockBlock:
    """Contraction eigendata of one k-letter block in the limiting geometry."""

    k: int
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    tuple_labels: list[str]
    eigen_labels: list[str]
    fine_rank: int


def fock_block_spectrum(
    sp_fine: SingleParticleSpace,
    sp_coarse: SingleParticleSpace,
    m: np.ndarray,
    k: int,
    null_threshold: float = NULL_LETTER_THRESHOLD,
) -> FockBlock:
    """Contraction spectrum of the channel on the k-letter tuple space.

    The fine space is reduced to its non-null letters (count r); the block
    then whitens Re(K^{(x)k}) and Re(K'^{(x)k}) and transports the pairing
    Re((K m)^{(x)k}) between them.  Eigenvalues are reported in descending
    order, zero padded to the full r^k tuple dimension so that directions
    annihilated by the metric appear explicitly.  Eigenvector coefficients
    are given over the fine tuple basis, with readable combination labels.
    """
    if k < 1:
        raise ValueError("block degree k must be >= 1")
    fine_red, kept = sp_fine.reduced(null_threshold)
    if m.shape != (sp_fine.dim, sp_coarse.dim):
        raise ValueError(
            f"letter matrix shape {m.shape} does not match spaces "
            f"({sp_fine.dim}, {sp_coarse.dim})"
        )
    k_fine = fine_red.kernel
    k_coarse = sp_coarse.kernel
    pair_single = k_fine @ m[kept, :]

    gram_fine = np.real(_kron_power(k_fine, k))
    gram_coarse = np.real(_kron_power(k_coarse, k))
    pairing = np.real(_kron_power(pair_single, k))

    w_fine, _ = whiten_psd(gram_fine, null_threshold)
    w_coarse, _ = whiten_psd(gram_coarse, null_threshold)
    small = w_fine.T @ pairing @ w_coarse
    t_mat = small @ small.T
    vals, vecs = np.linalg.eigh(t_mat)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    coeffs = w_fine @ vecs[:, order]

    dim_tuple = fine_red.dim**k
    padded = np.zeros(dim_tuple)
    padded[: vals.size] = vals
    full_coeffs = np.zeros((dim_tuple, dim_tuple))
    full_coeffs[:, : coeffs.shape[1]] = coeffs

    tuple_labels = [
        "(x)".join(fine_red.letter_names[i] for i in word)
        for word in _tuple_words(fine_red.dim, k)
    ]
    eigen_labels = [
        _combo_label(full_coeffs[:, j], tuple_labels) for j in range(dim_tuple)
    ]
    return FockBlock(
        k=k,
        eigenvalues=padded,
        coefficients=full_coeffs,
        tuple_labels=tuple_labels,
        eigen_labels=eigen_labels,
        fine_rank=w_fine.shape[1],
    )


def depolarizing_fock_setup(d: int, y: float, state: DensityMatrix | None = None):
    """Single-particle spaces and letter matrix for sitewise depolarizing.

    Returns (sp_fine, sp_coarse, m) at the given single-site state (default:
    pure ground state).  For d=2 pure the two non-null letters are the
    position- and momentum-like quadratures and are named x and p.
    """
    from .channels import DepolarizingChannel

    site = state if state is not None else basis_pure_density(d)
    names = None
    if d == 2 and state is None:
        names = ["x", "p", "z0"]
    sp_fine = SingleParticleSpace.from_state(site, letter_names=names)
    channel = DepolarizingChannel(y, d)
    coarse_state = DensityMatrix(channel.apply(site.matrix), check=False)
    sp_coarse = SingleParticleSpace.from_state(coarse_state)
    m = single_particle_channel_matrix(sp_fine, sp_coarse, channel)
    return sp_fine, sp_coarse, m


def _word_gram(kernel: np.ndarray, words_row, words_col) -> np.ndarray:
    out = np.empty((len(words_row), len(words_col)), dtype=complex)
    for i, u in enumerate(words_row):
        for j, v in enumerate(words_col):
            out[i, j] = permanent(kernel[np.ix_(u, v)])
    return out


def _sector_blocks(
    n: int | None,
    sp_fine: SingleParticleSpace,
    sp_coarse: SingleParticleSpace,
    m: np.ndarray,
    k: int,
    null_threshold: float,
):
    """Per-degree whitened contraction blocks on the symmetric sector.

    n=None selects the limiting geometry (distinct-site factors set to 1).
    Degrees are treated independently: at a product state, words of
    different degree are exactly orthogonal on both sides and the pairing
    is degree diagonal.
    """
    fine_red, kept = sp_fine.reduced(null_threshold)
    pair_single = fine_red.kernel @ m[kept, :]
    blocks = {}
    for j in range(1, k + 1):
        if n is not None and j > n:
            continue
        factor = 1.0 if n is None else distinct_site_factor(n, j)
        words_f = [w for w in symmetric_words(fine_red.dim, j) if len(w) == j]
        words_c = [w for w in symmetric_words(sp_coarse.dim, j) if len(w) == j]
        gram_f = factor * np.real(_word_gram(fine_red.kernel, words_f, words_f))
        gram_c = factor * np.real(_word_gram(sp_coarse.kernel, words_c, words_c))
        pairing = factor * np.real(_word_gram_mixed(pair_single, words_f, words_c))
        w_f, _ = whiten_psd(gram_f, null_threshold)
        w_c, _ = whiten_psd(gram_c, null_threshold)
        small = w_f.T @ pairing @ w_c
        vals = np.linalg.eigvalsh(small @ small.T)
        blocks[j] = {
            "eigenvalues": np.clip(vals[::-1], 0.0, None),
            "words_fine": words_f,
            "words_coarse": words_c,
            "dim": len(words_f),
        }
    return blocks


def _word_gram_mixed(pair_single: np.ndarray, words_row, words_col) -> np.ndarray:
    out = np.empty((len(words_row), len(words_col)), dtype=complex)
    for i, u in enumerate(words_row):
        for j, v in enumerate(words_col):
            out[i, j] = permanent(pair_single[np.ix_(u, v)])
    return out


def symmetric_sector_spectrum(
    n: int | None,
    d: int,
    y: float,
    k: int,
    state: DensityMatrix | None = None,
    include_identity: bool = False,
    null_threshold: float = NULL_LETTER_THRESHOLD,
) -> dict:
    """Exact contraction spectrum on the symmetric k-local sector.

    Computed in closed form over letter words: every degree-j block of the
    fine metric, the coarse metric and the channel pairing carries the same
    distinct-site factor c_{n,j}, so the whitened spectrum follows from
    permanents of kernel minors at any n (n=None gives the limit).  The
    identity direction, exactly invariant under the channel, is excluded
    unless requested.
    """
    site = state if state is not None else basis_pure_density(d)
    sp_fine, sp_coarse, m = _depolarizing_spaces(d, y, site)
    blocks = _sector_blocks(n, sp_fine, sp_coarse, m, k, null_threshold)
    eigs = [b["eigenvalues"] for b in blocks.values()]
    if include_identity:
        eigs.append(np.array([1.0]))
    all_vals = np.sort(np.concatenate(eigs))[::-1] if eigs else np.array([])
    return {
        "n": n,
        "eigenvalues": all_vals,
        "by_degree": {j: b["eigenvalues"] for j, b in blocks.items()},
        "blocks": blocks,
    }


def _depolarizing_spaces(d: int, y: float, site: DensityMatrix):
    from .channels import DepolarizingChannel

    sp_fine = SingleParticleSpace.from_state(site)
    channel = DepolarizingChannel(y, d)
    coarse_state = DensityMatrix(channel.apply(site.matrix), check=False)
    sp_coarse = SingleParticleSpace.from_state(coarse_state)
    m = single_particle_channel_matrix(sp_fine, sp_coarse, channel)
    return sp_fine, sp_coarse, m


def finite_limit_comparison(
    n_list,
    d: int,
    y: float,
    k: int,
    state: DensityMatrix | None = None,
) -> dict:
    """Compare exact finite-n sector spectra against the limiting spectrum.

    Returns per-n eigenvalue arrays (descending), the limit array, and the
    maximum absolute eigenvalue deviation for each n.
    """
    n_list = [int(n) for n in n_list]
    if min(n_list) < k:
        raise ValueError("need n >= k so every degree appears at each n")
    limit = symmetric_sector_spectrum(None, d, y, k, state=state)
    spectra = {}
    deviations = []
    for n in n_list:
        finite = symmetric_sector_spectrum(n, d, y, k, state=state)
        spectra[n] = finite["eigenvalues"]
        if finite["eigenvalues"].size != limit["eigenvalues"].size:
            raise NumericalError("finite and limiting sector dimensions differ")
        deviations.append(float(np.max(np.abs(finite["eigenvalues"] - limit["eigenvalues"]))))
    return {
        "n_list": n_list,
        "spectra": spectra,
        "limit": limit["eigenvalues"],
        "deviations": deviations,
    }


def beta_bound_value(d: int, y: float, k: int) -> float:
    """Sector norm bound (d / (y (y - 1)))^k for depolarizing strength y."""
    if y <= 1.0:
        raise ValueError("bound needs y > 1")
    return (d / (y * (y - 1.0))) ** k


def beta_bound_decreasing(d: int, y: float) -> bool:
    """Whether the sector bound decreases in k, i.e. y (y - 1) > d."""
    return y * (y - 1.0) > d


def beta_bound_test(
    n: int,
    d: int,
    y: float,
    k: int,
    samples: int,
    seed: int = 0,
    state_1site: DensityMatrix | None = None,
) -> dict:
    """Check the sector norm bound on random high-locality observables.

    Draws random hermitian combinations from the sectors supported on at
    least k sites and verifies, for the sitewise depolarizing channel, that
    the pushforward norm squared never exceeds beta_k times the base norm
    squared (relative slack 1e-10).  Returns the violation count and the
    largest observed ratio.
    """
    from .channels import DepolarizingChannel, ProductChannel
    from .sampling import task_rng

    if k < 1 or k > n:
        raise ValueError(f"sector index k={k} out of range for n={n}")
    system = QuditSystem(d, n)
    site = state_1site if state_1site is not None else basis_pure_density(d)
    state = product_density(site, n)
    channel = ProductChannel(DepolarizingChannel(y, d), system)
    matrices, _ = sector_span(klocal_basis(n, system, state), min_support=k)
    stack = np.stack(matrices)
    bound = beta_bound_value(d, y, k)
    rng = task_rng(seed, (n, d, int(y * 1000), k))
    violations = 0
    max_ratio = 0.0
    for _ in range(samples):
        coeff = rng.standard_normal(len(matrices))
        a = np.tensordot(coeff, stack, axes=1)
        base = bures_norm(state, a)
        if base < 1e-12:
            continue
        ratio_sq = (pushforward_norm(state, channel, a) / base) ** 2
        max_ratio = max(max_ratio, ratio_sq)
        if ratio_sq > bound * (1.0 + 1e-10):
            violations += 1
    return {
        "n": n,
        "d": d,
        "y": y,
        "k": k,
        "samples": samples,
        "bound": bound,
        "violations": violations,
        "max_ratio_sq": max_ratio,
    }
