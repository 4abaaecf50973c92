"""Rational formal power series and their finite-dimensional representations.

A representation is a tuple (n, {A_s}, {B_j}, C) generating the coefficient
family S_j(s1..sk) = C A_sk ... A_s1 B_j. This module provides coefficient
evaluation, finite Hankel blocks, selection-anchored partial realization,
minimization, isomorphism and mean-square stability checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np
import scipy.linalg

from .errors import (
    NotIsomorphic,
    RankDeficient,
    SingularSelection,
    ValidationError,
)
from .linalg import (
    DEFAULT_EPS_RANK,
    STABILITY_MARGIN,
    numeric_rank,
    orthonormal_basis,
    spectral_radius,
)
from .words import EPSILON, Alphabet, LetterWeights, Word, iter_words

IndexKey = Hashable


@dataclass(frozen=True)
class Representation:
    """Finite-dimensional representation of a family of formal power series.

    A has shape (d, n, n) stacking one square matrix per letter, B has shape
    (n, K) with one column per series index (in ``indices`` order), C is
    (p, n). Dimension 0 is legal and generates the all-zero family.
    """

    alphabet: Alphabet
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    indices: tuple[IndexKey, ...]

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        d = len(self.alphabet)
        if A.ndim != 3 or A.shape[0] != d or A.shape[1] != A.shape[2]:
            raise ValidationError(f"A must be ({d}, n, n), got {A.shape}")
        n = A.shape[1]
        if B.ndim != 2 or B.shape[0] != n:
            raise ValidationError(f"B must be ({n}, K), got {B.shape}")
        if len(self.indices) != B.shape[1]:
            raise ValidationError("index set size does not match B columns")
        if len(self.indices) == 0:
            raise ValidationError("index set must be nonempty")
        if C.ndim != 2 or C.shape[1] != n:
            raise ValidationError(f"C must be (p, {n}), got {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "indices", tuple(self.indices))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C.shape[0]

    def index_pos(self, j: IndexKey) -> int:
        try:
            return self.indices.index(j)
        except ValueError:
            raise ValidationError(f"unknown series index {j!r}") from None

    def coefficient(self, j: IndexKey, word: Word) -> np.ndarray:
        return series_coefficient(self, j, word)

    def coefficient_matrix(self, word: Word) -> np.ndarray:
        """All coefficients of ``word`` as a (p, K) matrix (one column per
        series index)."""
        return self.C @ word_matrix(self, word) @ self.B


def word_matrix(rep: Representation, word: Word) -> np.ndarray:
    """Product A_sk ... A_s1 for word s1..sk; identity for the empty word."""
    M = np.eye(rep.dim)
    for s in word:
        M = rep.A[s] @ M
    return M


def series_coefficient(rep: Representation, j: IndexKey, word: Word) -> np.ndarray:
    """Coefficient C A_word B_j as a vector of length p."""
    col = rep.index_pos(j)
    return rep.C @ (word_matrix(rep, word) @ rep.B[:, col])


def all_coefficients(rep: Representation, max_len: int) -> list[np.ndarray]:
    """Coefficients of every word of length <= max_len.

    Returns one array per length k, of shape (d**k, p, K), rows in
    lexicographic order of the length-k words.
    """
    n, K = rep.B.shape
    X = rep.B[None, :, :]  # (1, n, K), word = epsilon
    out = []
    for k in range(max_len + 1):
        out.append(np.einsum("pi,wik->wpk", rep.C, X))
        if k < max_len:
            # extending word v by letter s gives A_{v s} = A_s A_v; the
            # (v, s) blocks in v-major order are exactly lexicographic order
            X = np.einsum("sij,wjk->wsik", rep.A, X).reshape(-1, n, K)
    return out


def max_coefficient_diff(r1: Representation, r2: Representation, max_len: int) -> float:
    """Largest absolute coefficient gap over all words of length <= max_len."""
    if r1.indices != r2.indices or len(r1.alphabet) != len(r2.alphabet):
        raise ValidationError("representations index different families")
    c1 = all_coefficients(r1, max_len)
    c2 = all_coefficients(r2, max_len)
    return max(float(np.max(np.abs(a - b))) if a.size else 0.0 for a, b in zip(c1, c2))


@dataclass(frozen=True)
class HankelBlock:
    """Finite Hankel sub-block with explicit (word, index) row/column maps.

    The entry at row (u, i), column (v, j) is component i of S_j(vu); note
    the concatenation order, column word first. Row keys use 0-based output
    components.
    """

    matrix: np.ndarray
    alphabet: Alphabet
    indices: tuple[IndexKey, ...]
    row_index: tuple[tuple[Word, int], ...]
    col_index: tuple[tuple[Word, IndexKey], ...]
    row_pos: dict = field(repr=False)
    col_pos: dict = field(repr=False)

    @property
    def output_dim(self) -> int:
        return 1 + max(i for _, i in self.row_index)

    def entry(self, row_key, col_key) -> float:
        return float(self.matrix[self.row_pos[row_key], self.col_pos[col_key]])


def _make_block(matrix, alphabet, indices, row_index, col_index) -> HankelBlock:
    row_index = tuple(row_index)
    col_index = tuple(col_index)
    return HankelBlock(
        matrix=matrix,
        alphabet=alphabet,
        indices=tuple(indices),
        row_index=row_index,
        col_index=col_index,
        row_pos={k: i for i, k in enumerate(row_index)},
        col_pos={k: i for i, k in enumerate(col_index)},
    )


def build_hankel(src, rowN: int, colN: int) -> HankelBlock:
    """Hankel block over all rows (u, i), |u| <= rowN and columns (v, j),
    |v| <= colN, both in lexicographic order.

    ``src`` must expose ``alphabet``, ``indices``, ``output_dim`` and
    ``coefficient_matrix(word) -> (p, K)``.
    """
    if rowN < 0 or colN < 0:
        raise ValidationError("rowN and colN must be nonnegative")
    alphabet = src.alphabet
    indices = tuple(src.indices)
    p = src.output_dim
    K = len(indices)
    row_words = list(iter_words(alphabet, rowN))
    col_words = list(iter_words(alphabet, colN))
    row_index = [(u, i) for u in row_words for i in range(p)]
    col_index = [(v, j) for v in col_words for j in indices]

    if isinstance(src, Representation):
        # H factors as O W with O rows C A_u and W columns A_v B.
        n = src.dim
        O = np.empty((len(row_words) * p, n))
        W = np.empty((n, len(col_words) * K))
        for a, u in enumerate(row_words):
            O[a * p : (a + 1) * p] = src.C @ word_matrix(src, u)
        for b, v in enumerate(col_words):
            W[:, b * K : (b + 1) * K] = word_matrix(src, v) @ src.B
        H = O @ W
    else:
        cache: dict[Word, np.ndarray] = {}

        def coeff(word: Word) -> np.ndarray:
            if word not in cache:
                cache[word] = np.asarray(src.coefficient_matrix(word), dtype=float)
            return cache[word]

        H = np.empty((len(row_index), len(col_index)))
        for a, u in enumerate(row_words):
            for b, v in enumerate(col_words):
                H[a * p : (a + 1) * p, b * K : (b + 1) * K] = coeff(v + u)
    return _make_block(H, alphabet, indices, row_index, col_index)


@dataclass(frozen=True)
class Selection:
    """r rows and r columns anchoring the partial-realization algorithm."""

    rows: tuple[tuple[Word, int], ...]
    cols: tuple[tuple[Word, IndexKey], ...]

    def __post_init__(self):
        if len(self.rows) != len(self.cols):
            raise ValidationError("selection must have equally many rows and columns")
        if len(set(self.rows)) != len(self.rows) or len(set(self.cols)) != len(self.cols):
            raise ValidationError("selection keys must be distinct")

    @property
    def r(self) -> int:
        return len(self.rows)


def choose_selection(
    H: HankelBlock,
    r: int,
    max_row_len: int | None = None,
    max_col_len: int | None = None,
    eps_rank: float = DEFAULT_EPS_RANK,
) -> Selection:
    """Greedy volume-maximizing selection of r rows and columns.

    Column-pivoted QR picks the columns, a second pivoted factorization on
    the selected columns picks the rows. Raises RankDeficient when r exceeds
    the numeric rank of the (length-restricted) block.
    """
    if r <= 0:
        raise ValidationError("selection size must be positive")
    rows = [
        a for a, (u, _) in enumerate(H.row_index)
        if max_row_len is None or len(u) <= max_row_len
    ]
    cols = [
        b for b, (v, _) in enumerate(H.col_index)
        if max_col_len is None or len(v) <= max_col_len
    ]
    sub = H.matrix[np.ix_(rows, cols)]
    rank = numeric_rank(sub, eps_rank)
    if rank < r:
        raise RankDeficient(f"requested rank {r} exceeds numeric rank {rank}")
    _, _, piv_c = scipy.linalg.qr(sub, mode="economic", pivoting=True)
    sel_c = piv_c[:r]
    _, _, piv_r = scipy.linalg.qr(sub[:, sel_c].T, mode="economic", pivoting=True)
    sel_r = piv_r[:r]
    rows_sel = tuple(H.row_index[rows[a]] for a in sorted(sel_r))
    cols_sel = tuple(H.col_index[cols[b]] for b in sorted(sel_c))
    minor = H.matrix[
        np.ix_([H.row_pos[k] for k in rows_sel], [H.col_pos[k] for k in cols_sel])
    ]
    if numeric_rank(minor, eps_rank) < r:
        raise RankDeficient("pivoted selection is rank deficient at tolerance")
    return Selection(rows=rows_sel, cols=cols_sel)


def ho_kalman(
    H: HankelBlock,
    sel: Selection,
    eps_rank: float = DEFAULT_EPS_RANK,
) -> Representation:
    """Partial realization anchored at a selection.

    Solves A_s H_ab = Z_s per letter, where Z_s holds the entries at column
    words extended by s, read through the Hankel symmetry as rows (s u, i);
    row words one letter longer than the selection must therefore exist. B
    stacks the (eps, j) column restricted to the selected rows; the C block
    read off the (eps, i) rows is mapped back through the pseudo-inverse of
    H_ab so the output reproduces the series.
    """
    r = sel.r
    alphabet, indices, p = H.alphabet, H.indices, H.output_dim
    try:
        rpos = [H.row_pos[k] for k in sel.rows]
        cpos = [H.col_pos[k] for k in sel.cols]
    except KeyError as exc:
        raise ValidationError(f"selection key {exc} missing from Hankel block") from None
    Hab = H.matrix[np.ix_(rpos, cpos)]
    s_vals = scipy.linalg.svdvals(Hab)
    if s_vals[0] == 0.0 or s_vals[-1] <= eps_rank * s_vals[0]:
        raise SingularSelection("selected Hankel minor is numerically singular")
    Hab_pinv = np.linalg.pinv(Hab, rcond=eps_rank)

    d = len(alphabet)
    A = np.empty((d, r, r))
    for s in range(d):
        try:
            shifted = [H.row_pos[((s,) + u, i)] for (u, i) in sel.rows]
        except KeyError:
            raise ValidationError(
                "Hankel block lacks the shifted rows needed by the selection"
            ) from None
        Z = H.matrix[np.ix_(shifted, cpos)]
        A[s] = Z @ Hab_pinv

    B = np.empty((r, len(indices)))
    for k, j in enumerate(indices):
        B[:, k] = H.matrix[rpos, H.col_pos[(EPSILON, j)]]
    Craw = np.empty((p, r))
    for i in range(p):
        Craw[i] = H.matrix[H.row_pos[(EPSILON, i)], cpos]
    C = Craw @ Hab_pinv
    return Representation(alphabet=alphabet, A=A, B=B, C=C, indices=indices)


def reachability_matrix(rep: Representation) -> np.ndarray:
    """Column blocks A_v B over words |v| <= max(dim - 1, 1), in
    lexicographic order. The span saturates at length dim - 1; the scalar
    case keeps one extension so the matrix still witnesses the dynamics."""
    n = rep.dim
    if n == 0:
        return np.zeros((0, 0))
    lmax = max(n - 1, 1)
    blocks = []
    X = rep.B  # stacked A_v B blocks for all words of the current length
    for k in range(lmax + 1):
        blocks.append(X)
        if k < lmax:
            X = _extend_cols(rep, X)
    return np.hstack(blocks)


def _extend_cols(rep: Representation, X: np.ndarray) -> np.ndarray:
    """From stacked A_v B blocks build the blocks of all one-letter
    extensions A_{v s} B = A_s (A_v B), in lexicographic (v, s) order."""
    n, width = X.shape
    K = rep.B.shape[1]
    nwords = width // K
    d = len(rep.alphabet)
    out = np.empty((n, nwords * d * K))
    for w in range(nwords):
        base = X[:, w * K : (w + 1) * K]
        for s in range(d):
            out[:, (w * d + s) * K : (w * d + s + 1) * K] = rep.A[s] @ base
    return out


def observability_matrix(rep: Representation) -> np.ndarray:
    """Row blocks C A_v over words |v| <= max(dim - 1, 1), in lexicographic
    order (same word range as the reachability matrix)."""
    n = rep.dim
    if n == 0:
        return np.zeros((0, 0))
    d = len(rep.alphabet)
    lmax = max(n - 1, 1)
    blocks = []
    level = [np.eye(n)]
    for k in range(lmax + 1):
        for M in level:
            blocks.append(rep.C @ M)
        if k < lmax:
            level = [rep.A[s] @ M for M in level for s in range(d)]
    return np.vstack(blocks)


def is_reachable(rep: Representation, eps_rank: float = DEFAULT_EPS_RANK) -> bool:
    return numeric_rank(reachability_matrix(rep), eps_rank) == rep.dim


def is_observable(rep: Representation, eps_rank: float = DEFAULT_EPS_RANK) -> bool:
    return numeric_rank(observability_matrix(rep), eps_rank) == rep.dim


def reduce_minimal(rep: Representation, eps_rank: float = DEFAULT_EPS_RANK) -> Representation:
    """Reachable/observable reduction preserving all coefficients.

    Restricts to an orthonormal basis of the reachable span, then quotients
    the restricted system by its unobservable subspace via a second
    orthonormal basis.
    """
    d = len(rep.alphabet)
    if rep.dim == 0:
        return rep
    U = orthonormal_basis(reachability_matrix(rep), eps_rank)
    r1 = _project(rep, U, d)
    V = orthonormal_basis(observability_matrix(r1).T, eps_rank)
    return _project(r1, V, d)


def _project(rep: Representation, U: np.ndarray, d: int) -> Representation:
    r = U.shape[1]
    A = np.stack([U.T @ rep.A[s] @ U for s in range(d)]) if r else np.zeros((d, 0, 0))
    return Representation(rep.alphabet, A, U.T @ rep.B, rep.C @ U, rep.indices)


def find_isomorphism(
    r1: Representation, r2: Representation, tol: float = 1e-8
) -> np.ndarray:
    """Change of basis T with T A1_s = A2_s T, T B1_j = B2_j, C1 = C2 T.

    Both representations must be minimal. Computed as pinv(O_2) O_1 and
    verified on all three relations at relative tolerance ``tol``.
    """
    if r1.dim != r2.dim:
        raise NotIsomorphic(f"dimensions differ: {r1.dim} vs {r2.dim}")
    if r1.indices != r2.indices:
        raise NotIsomorphic("series index sets differ")
    n = r1.dim
    if n == 0:
        return np.zeros((0, 0))
    O1 = observability_matrix(r1)
    O2 = observability_matrix(r2)
    T = np.linalg.pinv(O2) @ O1
    scale = max(1.0, float(np.linalg.norm(T)))

    def bad(lhs, rhs, ref) -> bool:
        gap = float(np.linalg.norm(lhs - rhs))
        return gap > tol * max(1.0, float(np.linalg.norm(ref))) * scale

    if numeric_rank(T, tol) < n:
        raise NotIsomorphic("candidate basis change is singular")
    for s in range(len(r1.alphabet)):
        if bad(T @ r1.A[s], r2.A[s] @ T, r1.A[s]):
            raise NotIsomorphic(f"dynamics relation fails for letter {s}")
    if bad(T @ r1.B, r2.B, r1.B):
        raise NotIsomorphic("input relation fails")
    if bad(r1.C, r2.C @ T, r1.C):
        raise NotIsomorphic("output relation fails")
    return T


def stability_matrix(A: np.ndarray, weights: LetterWeights | None = None) -> np.ndarray:
    """Kronecker stability matrix sum_s c_s A_s^T (x) A_s^T.

    Unweighted (c_s = 1) by default; with ``weights`` the coefficients are
    the letter weights, giving the mean-square criterion for stochastic
    models.
    """
    A = np.asarray(A, dtype=float)
    d, n = A.shape[0], A.shape[1]
    out = np.zeros((n * n, n * n))
    for s in range(d):
        c = 1.0 if weights is None else float(weights.values[s])
        out += c * np.kron(A[s].T, A[s].T)
    return out


def is_stable(
    A: np.ndarray,
    weights: LetterWeights | None = None,
    margin: float = STABILITY_MARGIN,
) -> bool:
    """True iff the (weighted) Kronecker stability matrix has spectral radius
    < 1 - margin."""
    A = np.asarray(A, dtype=float)
    if A.shape[1] == 0:
        return True
    return spectral_radius(stability_matrix(A, weights)) < 1.0 - margin


def square_sum_partial(rep: Representation, j: IndexKey, K: int) -> np.ndarray:
    """Partial sums L_0..L_K of the squared coefficient norms of series j.

    Computed by iterating V -> sum_s A_s^T V A_s on V = C^T C and
    accumulating B_j^T V B_j; L_k sums over all words of length <= k.
    """
    if K < 0:
        raise ValidationError("K must be nonnegative")
    col = rep.index_pos(j)
    b = rep.B[:, col]
    V = rep.C.T @ rep.C
    out = np.empty(K + 1)
    total = 0.0
    for k in range(K + 1):
        total += float(b @ V @ b)
        out[k] = total
        if k < K:
            V = sum(rep.A[s].T @ V @ rep.A[s] for s in range(len(rep.alphabet)))
    return out
