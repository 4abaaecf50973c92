"""Empirical covariance estimation and the weak-realization pipeline.

Estimators form the lagged regression processes z_w(t) = y(t-|w|) u_w(t-1)
/ sqrt(p_w) and average their products; the pipeline turns the estimated
covariance table into an innovation-form weak realization via the Hankel
partial-realization step and the finite-window gain formulas.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .config import RunConfig
from .errors import (
    InsufficientData,
    MissingCovariance,
    OutOfRange,
    SingularGram,
    ValidationError,
)
from .gbs import (
    ExactCovariances,
    GbsModel,
    WeakRealization,
    innovation_gain,
    letter_blocks,
    series_indices,
)
from .linalg import symmetrize
from .series import HankelBlock, build_hankel, choose_selection, ho_kalman, word_matrix
from .timeseries import TimeSeries, pair_letter_name, parse_pair_letter
from .words import AdmissibleLanguage, Alphabet, LetterWeights, Word


@dataclass(frozen=True)
class CovarianceTable:
    """Estimated (or exact) output covariances over an admissible word set.

    ``lam`` maps nonempty admissible words to Lambda_w = E[y z_w^T];
    ``tee`` maps ordered word pairs to T_{v,w} = E[z_v z_w^T] (one entry per
    unordered pair, the transpose is implied). Inadmissible words are not
    stored; they contribute exact zeros.
    """

    alphabet: Alphabet
    language: AdmissibleLanguage
    lam: dict = field(default_factory=dict)
    tee: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def output_dim(self) -> int:
        for v in self.lam.values():
            return v.shape[0]
        raise MissingCovariance("empty covariance table")

    def get_lambda(self, word: Word) -> np.ndarray:
        if not self.language.is_admissible(word):
            return np.zeros((self.output_dim, self.output_dim))
        if word not in self.lam:
            raise MissingCovariance(f"Lambda missing for word {word}")
        return self.lam[word]

    def get_tee(self, v: Word, w: Word) -> np.ndarray:
        if not (self.language.is_admissible(v) and self.language.is_admissible(w)):
            return np.zeros((self.output_dim, self.output_dim))
        if (v, w) in self.tee:
            return self.tee[(v, w)]
        if (w, v) in self.tee:
            return self.tee[(w, v)].T
        raise MissingCovariance(f"T missing for pair {(v, w)}")

    def hankel_source(self):
        return _TableSource(self)


class _TableSource:
    """SeriesSource view of a covariance table: the series indexed (j, s)
    maps word w to column j of Lambda_{s w}."""

    def __init__(self, table: CovarianceTable):
        self.table = table
        self.alphabet = table.alphabet
        self.output_dim = table.output_dim
        self.indices = series_indices(table.alphabet, table.output_dim)

    def coefficient_matrix(self, word: Word) -> np.ndarray:
        blocks = [self.table.get_lambda((s,) + word) for s in range(len(self.alphabet))]
        return np.hstack(blocks)

    def coefficient(self, j, word: Word) -> np.ndarray:
        jj, name = j
        s = self.alphabet.index(name)
        return self.table.get_lambda((s,) + word)[:, jj]


def _pair_states(alphabet: Alphabet, word: Word) -> np.ndarray:
    """Mode path s_1..s_{k+1} visited by an admissible pair word."""
    pairs = [parse_pair_letter(alphabet.names[s]) for s in word]
    states = [pairs[0][0]]
    for (a, b) in pairs:
        if a != states[-1]:
            raise ValidationError("pair word does not chain")
        states.append(b)
    return np.asarray(states, dtype=np.int64)


def _theta_match_times(ts: TimeSeries, alphabet: Alphabet, word: Word) -> np.ndarray:
    """Times t >= |w| whose mode history theta(t-|w|..t) matches the word."""
    k = len(word)
    T = ts.horizon
    states = _pair_states(alphabet, word)
    ok = np.ones(T - k, dtype=bool)
    for i in range(k + 1):
        ok &= ts.theta[i : T - k + i] == states[i]
    return np.nonzero(ok)[0] + k


def _dense_coeff(ts: TimeSeries, word: Word, weights: LetterWeights) -> np.ndarray:
    """u-form coefficient c(t) = prod_i u_{w_i}(t-k+i-1) / sqrt(p_w) for
    t = k..T-1 (length T-k)."""
    k = len(word)
    T = ts.horizon
    c = np.ones(T - k)
    for i, s in enumerate(word):
        c *= ts.u[i : T - k + i, s]
    return c / math.sqrt(weights.word_weight(word))


def lagged_product(
    ts: TimeSeries,
    word: Word,
    t: int,
    weights: LetterWeights,
    language: AdmissibleLanguage,
    alphabet: Alphabet | None = None,
) -> np.ndarray:
    """Single regression vector z_w(t); zero when the word is inadmissible."""
    k = len(word)
    if k == 0:
        raise ValidationError("z_w needs a nonempty word")
    if t < k or t >= ts.horizon:
        raise OutOfRange(f"t={t} outside [{k}, {ts.horizon - 1}]")
    if not language.is_admissible(word):
        return np.zeros(ts.output_dim)
    if ts.theta is not None:
        ab = alphabet if alphabet is not None else pair_alphabet_of(ts)
        states = _pair_states(ab, word)
        if not np.array_equal(ts.theta[t - k : t + 1], states):
            return np.zeros(ts.output_dim)
        return ts.y[t - k] / math.sqrt(weights.word_weight(word))
    coeff = 1.0
    for i, s in enumerate(word):
        coeff *= float(ts.u[t - k + i, s])
    return ts.y[t - k] * (coeff / math.sqrt(weights.word_weight(word)))


def _check_length(ts: TimeSeries, k: int) -> None:
    if ts.horizon <= k + 10:
        raise InsufficientData(f"horizon {ts.horizon} too short for |w|={k}")


def estimate_lambda(
    ts: TimeSeries,
    word: Word,
    weights: LetterWeights,
    language: AdmissibleLanguage,
    alphabet: Alphabet | None = None,
) -> np.ndarray:
    """Sample average of y(t) z_w(t)^T over every valid t."""
    k = len(word)
    if k == 0:
        raise ValidationError("Lambda_w needs a nonempty word")
    _check_length(ts, k)
    T = ts.horizon
    p = ts.output_dim
    m_eff = T - k
    if not language.is_admissible(word):
        return np.zeros((p, p))
    if ts.theta is not None:
        ab = alphabet if alphabet is not None else pair_alphabet_of(ts)
        idx = _theta_match_times(ts, ab, word)
        scale = 1.0 / (math.sqrt(weights.word_weight(word)) * m_eff)
        return (ts.y[idx].T @ ts.y[idx - k]) * scale
    c = _dense_coeff(ts, word, weights)
    return np.einsum("ti,t,tj->ij", ts.y[k:], c, ts.y[: T - k]) / m_eff


def estimate_T(
    ts: TimeSeries,
    v: Word,
    w: Word,
    weights: LetterWeights,
    language: AdmissibleLanguage,
    alphabet: Alphabet | None = None,
) -> np.ndarray:
    """Sample average of z_v(t) z_w(t)^T over every valid t."""
    kv, kw = len(v), len(w)
    if kv == 0 or kw == 0:
        raise ValidationError("T_{v,w} needs nonempty words")
    al = max(kv, kw)
    _check_length(ts, al)
    T = ts.horizon
    p = ts.output_dim
    m_eff = T - al
    if not (language.is_admissible(v) and language.is_admissible(w)):
        return np.zeros((p, p))
    if ts.theta is not None:
        ab = alphabet if alphabet is not None else pair_alphabet_of(ts)
        iv = _theta_match_times(ts, ab, v)
        iw = _theta_match_times(ts, ab, w)
        common = np.intersect1d(iv, iw, assume_unique=True)
        scale = 1.0 / (
            math.sqrt(weights.word_weight(v) * weights.word_weight(w)) * m_eff
        )
        out = (ts.y[common - kv].T @ ts.y[common - kw]) * scale
    else:
        cv = _dense_coeff(ts, v, weights)
        cw = _dense_coeff(ts, w, weights)
        out = (
            np.einsum(
                "ti,t,tj->ij",
                ts.y[al - kv : T - kv],
                cv[al - kv :] * cw[al - kw :],
                ts.y[al - kw : T - kw],
            )
            / m_eff
        )
    if v == w:
        out = symmetrize(out)
    return out


def pair_alphabet_of(ts: TimeSeries) -> Alphabet:
    """Pair alphabet over all mode pairs of a theta-form series."""
    d = ts.n_modes
    return Alphabet(tuple(pair_letter_name(a, b) for a in range(d) for b in range(d)))


def derive_inputs(ts: TimeSeries, min_count: int = 10):
    """Alphabet, letter weights and admissible language implied by the data.

    theta-form: letters are the observed mode pairs with at least
    ``min_count`` transitions (rarer pairs are reported unidentifiable),
    weights are the empirical conditional transition probabilities and the
    language chains the kept pairs. u-form: the recorded alphabet with
    weights mean(u_s^2) and the full language.
    """
    diag: dict = {}
    if ts.theta is not None:
        d = ts.n_modes
        th = ts.theta
        counts = np.zeros((d, d), dtype=np.int64)
        np.add.at(counts, (th[:-1], th[1:]), 1)
        kept = [(a, b) for a in range(d) for b in range(d) if counts[a, b] >= min_count]
        dropped = [
            (a, b)
            for a in range(d)
            for b in range(d)
            if 0 < counts[a, b] < min_count
        ]
        if not kept:
            raise InsufficientData("no identifiable mode pairs in the data")
        names = tuple(pair_letter_name(a, b) for a, b in kept)
        alphabet = Alphabet(names)
        row = counts.sum(axis=1)
        w = np.array([counts[a, b] / max(row[a], 1) for a, b in kept])
        pairs = []
        for i, (a1, b1) in enumerate(kept):
            for j, (a2, b2) in enumerate(kept):
                if b1 == a2:
                    pairs.append((i, j))
        language = AdmissibleLanguage.from_pairs(len(kept), pairs)
        diag["unidentifiable_pairs"] = dropped
        diag["transition_counts"] = counts
        diag["mode_frequencies"] = np.bincount(th, minlength=d) / len(th)
        return alphabet, LetterWeights(w), language, diag
    u = ts.u
    w = (u**2).mean(axis=0)
    floor = min_count / ts.horizon
    low = [ts.alphabet.names[s] for s in range(u.shape[1]) if w[s] < floor]
    if low:
        raise InsufficientData(f"letters below the identifiability floor: {low}")
    diag["letter_second_moments"] = w
    return ts.alphabet, LetterWeights(w), AdmissibleLanguage.full(u.shape[1]), diag


def auxiliary_output(ts: TimeSeries) -> TimeSeries:
    """Mode-stacked output (y(t) 1{theta(t)=q})_q of a theta-form series."""
    if ts.theta is None:
        raise ValidationError("auxiliary output needs a theta-form series")
    T, p = ts.y.shape
    d = ts.n_modes
    ytil = np.zeros((T, p * d))
    for q in range(d):
        rows = ts.theta == q
        ytil[rows, q * p : (q + 1) * p] = ts.y[rows]
    return TimeSeries(y=ytil, theta=ts.theta, n_modes=d)


def estimate_covariances(
    ts: TimeSeries,
    lambda_len: int,
    tee_len: int,
    weights: LetterWeights,
    language: AdmissibleLanguage,
    alphabet: Alphabet,
    threads: int = 0,
) -> CovarianceTable:
    """Estimate Lambda_w for admissible |w| <= lambda_len and T_{v,w} for
    admissible |v|, |w| <= tee_len."""
    lam_words = list(language.iter_admissible(lambda_len))
    tee_words = list(language.iter_admissible(tee_len))
    lam: dict = {}
    tee: dict = {}

    def lam_task(w):
        return w, estimate_lambda(ts, w, weights, language, alphabet)

    pairs = [
        (v, w)
        for a, v in enumerate(tee_words)
        for w in tee_words[a:]
    ]

    def tee_task(vw):
        v, w = vw
        return vw, estimate_T(ts, v, w, weights, language, alphabet)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for w, val in pool.map(lam_task, lam_words):
                lam[w] = val
            for vw, val in pool.map(tee_task, pairs):
                tee[vw] = val
    else:
        for w in lam_words:
            lam[w] = lam_task(w)[1]
        for vw in pairs:
            tee[vw] = tee_task(vw)[1]
    meta = {
        "normalization": "z_w carries 1/sqrt(p_w)",
        "horizon": ts.horizon,
        "m_eff_lambda": {w: ts.horizon - len(w) for w in lam_words},
        "weights": np.asarray(weights.values).tolist(),
    }
    return CovarianceTable(alphabet=alphabet, language=language, lam=lam, tee=tee, meta=meta)


def exact_covariance_table(
    model: GbsModel, lambda_len: int, tee_len: int
) -> CovarianceTable:
    """Covariance table computed exactly from a stable model (the infinite
    sample-size limit of the estimators)."""
    exact = ExactCovariances(model)
    lam = {w: exact.lam(w) for w in model.language.iter_admissible(lambda_len)}
    tee_words = list(model.language.iter_admissible(tee_len))
    tee = {}
    for a, v in enumerate(tee_words):
        for w in tee_words[a:]:
            tee[(v, w)] = exact.tee(v, w)
    meta = {"normalization": "z_w carries 1/sqrt(p_w)", "exact": True}
    return CovarianceTable(
        alphabet=model.alphabet, language=model.language, lam=lam, tee=tee, meta=meta
    )


def build_empirical_hankel(table: CovarianceTable, rowN: int, colN: int) -> HankelBlock:
    """Hankel block of the covariance family read from a table; inadmissible
    words contribute zero blocks."""
    return build_hankel(table.hankel_source(), rowN, colN)


def realize_from_table(
    table: CovarianceTable,
    n: int,
    N: int,
    weights: LetterWeights,
    config: RunConfig = RunConfig(),
):
    """Identification pipeline from a covariance table.

    Builds the Hankel block with rows one letter longer than the selection,
    realizes the scaled-form representation, then solves the finite-window
    regression for the state covariance and the innovation gain. Returns the
    weak realization (unscaled dynamics, D = identity) and diagnostics.
    """
    if n < 1 or N < 1:
        raise ValidationError("n and N must be positive")
    language = table.language
    alphabet = table.alphabet
    H = build_empirical_hankel(table, n + 1, n)
    sel = config.pinned_selection
    if sel is None:
        sel = choose_selection(H, n, max_row_len=n, max_col_len=n, eps_rank=config.eps_rank)
    rep = ho_kalman(H, sel, eps_rank=config.eps_rank)
    p = rep.output_dim
    d = len(alphabet)
    G = letter_blocks(rep)
    Hout = rep.C
    pv = weights.values
    roots = np.sqrt(pv)

    words = list(language.iter_admissible(N))
    M = len(words)
    TN = np.empty((M * p, M * p))
    for a, v in enumerate(words):
        for b, w in enumerate(words[a:], start=a):
            blk = table.get_tee(v, w)
            TN[a * p : (a + 1) * p, b * p : (b + 1) * p] = blk
            if b != a:
                TN[b * p : (b + 1) * p, a * p : (a + 1) * p] = blk.T
    TN = symmetrize(TN)
    if config.ridge > 0.0:
        TN = TN + config.ridge * np.eye(M * p)
    tn_eigs = np.linalg.eigvalsh(TN)
    if tn_eigs[-1] <= 0.0 or tn_eigs[0] <= config.eps_rank * tn_eigs[-1]:
        raise SingularGram(
            f"regression Gram matrix not invertible at tolerance "
            f"(eigs in [{tn_eigs[0]:.3g}, {tn_eigs[-1]:.3g}])"
        )
    Lam = np.empty((rep.dim, M * p))
    for a, w in enumerate(words):
        s, v = w[0], w[1:]
        Lam[:, a * p : (a + 1) * p] = word_matrix(rep, v) @ G[s]
    alpha = np.linalg.solve(TN, Lam.T).T

    P = np.empty((d, n, n))
    Q = np.empty((d, p, p))
    Kg = np.empty((d, n, p))
    tdiag = np.stack([table.get_tee((s,), (s,)) for s in range(d)])
    for s in range(d):
        dmask = np.repeat(
            np.array([1.0 if language.is_admissible(w + (s,)) else 0.0 for w in words]),
            p,
        )
        # D T D = T D by the shift structure of the covariances; the
        # two-sided form keeps the estimate symmetric under sampling noise
        ATD = alpha * dmask[None, :]
        P[s] = symmetrize(pv[s] * (ATD @ TN @ ATD.T))
        Q[s] = symmetrize(pv[s] * tdiag[s] - Hout @ P[s] @ Hout.T)
        Kg[s] = innovation_gain(G[s], rep.A[s], P[s], Hout, tdiag[s], float(pv[s]), config.pd_tol)

    A_model = np.stack([rep.A[s] / roots[s] for s in range(d)])
    weak = WeakRealization(
        alphabet=alphabet,
        A=A_model,
        K=Kg,
        P=P,
        Q=Q,
        C=Hout,
        D=np.eye(p),
        weights=weights,
        language=language,
    )
    diagnostics = {
        "hankel_singular_values": scipy.linalg.svdvals(H.matrix),
        "gram_eigenvalues": tn_eigs,
        "gram_condition": float(tn_eigs[-1] / max(tn_eigs[0], 1e-300)),
        "selection_rows": [(w, i) for w, i in sel.rows],
        "selection_cols": [(w, j) for w, j in sel.cols],
        "word_count": M,
        "config": config.as_report(),
    }
    if "m_eff_lambda" in table.meta:
        diagnostics["m_eff_lambda"] = table.meta["m_eff_lambda"]
    return weak, diagnostics


def realize_from_data(
    ts: TimeSeries,
    n: int,
    N: int,
    weights: LetterWeights | None = None,
    language: AdmissibleLanguage | None = None,
    config: RunConfig = RunConfig(),
):
    """End-to-end identification from sampled data.

    Estimates the covariance table (Lambda up to the Hankel word length
    2n + 2, T over the past window N), then runs the table pipeline. Input
    weights and the admissible language are derived from data unless given.
    """
    alphabet, w_hat, lang_hat, diag_in = derive_inputs(ts, config.min_letter_count)
    if weights is None:
        weights = w_hat
    if language is None:
        language = lang_hat
    lam_len = 2 * n + 2
    table = estimate_covariances(
        ts, lam_len, N, weights, language, alphabet, threads=config.threads
    )
    weak, diagnostics = realize_from_table(table, n, N, weights, config)
    diagnostics["input_derivation"] = diag_in
    return weak, diagnostics
