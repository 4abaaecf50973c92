"""Generalized bilinear stochastic systems.

Simulation, the stationary state-covariance equation, the associated
deterministic representation whose coefficients are the output covariances,
and the innovation-form (Riccati-type) construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    InnovationNotFullRank,
    NoConvergence,
    UnstableModel,
    ValidationError,
)
from .linalg import STABILITY_MARGIN, spectral_radius, symmetrize
from .series import Representation, stability_matrix, word_matrix
from .timeseries import TimeSeries
from .words import AdmissibleLanguage, Alphabet, LetterWeights, Word

PSD_TOL = 1e-10


@dataclass(frozen=True)
class GbsModel:
    """x(t+1) = sum_s (A_s x(t) + K_s v(t)) u_s(t),  y(t) = C x(t) + D v(t).

    Q stores the mixed noise moments E[v v^T u_s^2] per letter; weights are
    the letter weights p_s fixed by the input process. The admissible
    language records which letter successions can occur.
    """

    alphabet: Alphabet
    A: np.ndarray
    K: np.ndarray
    C: np.ndarray
    D: np.ndarray
    weights: LetterWeights
    Q: np.ndarray
    language: AdmissibleLanguage

    def __post_init__(self):
        d = len(self.alphabet)
        A = np.asarray(self.A, dtype=float)
        K = np.asarray(self.K, dtype=float)
        C = np.asarray(self.C, dtype=float)
        D = np.asarray(self.D, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if A.ndim != 3 or A.shape[0] != d or A.shape[1] != A.shape[2]:
            raise ValidationError(f"A must be ({d}, n, n)")
        n = A.shape[1]
        if K.ndim != 3 or K.shape[:2] != (d, n):
            raise ValidationError(f"K must be ({d}, {n}, m)")
        m = K.shape[2]
        if C.ndim != 2 or C.shape[1] != n:
            raise ValidationError(f"C must be (p, {n})")
        if D.shape != (C.shape[0], m):
            raise ValidationError(f"D must be ({C.shape[0]}, {m})")
        if Q.shape != (d, m, m):
            raise ValidationError(f"Q must be ({d}, {m}, {m})")
        if len(self.weights) != d or self.language.size != d:
            raise ValidationError("weights/language size must match the alphabet")
        for s in range(d):
            if np.linalg.norm(Q[s] - Q[s].T) > PSD_TOL * (1 + np.linalg.norm(Q[s])):
                raise ValidationError(f"Q[{s}] is not symmetric")
            if m and float(np.min(np.linalg.eigvalsh(symmetrize(Q[s])))) < -PSD_TOL * (
                1 + np.linalg.norm(Q[s])
            ):
                raise ValidationError(f"Q[{s}] is not positive semidefinite")
        for M, name in ((A, "A"), (K, "K"), (C, "C"), (D, "D"), (Q, "Q")):
            if not np.all(np.isfinite(M)):
                raise ValidationError(f"{name} contains non-finite values")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "Q", np.stack([symmetrize(Q[s]) for s in range(d)]) if d else Q)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def noise_dim(self) -> int:
        return self.K.shape[2]

    @property
    def output_dim(self) -> int:
        return self.C.shape[0]

    def stability_radius(self) -> float:
        """Spectral radius of the weighted Kronecker stability matrix."""
        if self.dim == 0:
            return 0.0
        return spectral_radius(stability_matrix(self.A, self.weights))

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        return self.stability_radius() < 1.0 - margin

    def structural_zero_gap(self) -> float:
        """Largest violation of the inadmissible-pair product zeros."""
        gap = 0.0
        d = len(self.alphabet)
        for s1 in range(d):
            for s2 in range(d):
                if (s1, s2) in self.language.pairs:
                    continue
                gap = max(gap, float(np.max(np.abs(self.A[s2] @ self.A[s1]), initial=0.0)))
                gap = max(
                    gap,
                    float(np.max(np.abs(self.A[s2] @ self.K[s1] @ self.Q[s1]), initial=0.0)),
                )
        return gap


@dataclass(frozen=True)
class InputProcessSpec:
    """Generative law of the observed inputs u_s(t).

    kinds: "linear" (single letter, u = 1), "gaussian-bias" (two letters,
    u_0 = 1 and u_1 iid N(0, p_1)), "indicator" (u_s = 1{theta = s} with
    theta iid, P(theta = s) = p_s), "markov-pair" (pair letters driven by a
    stationary Markov chain; requires ``chain``).
    """

    kind: str
    chain: object | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian-bias", "indicator", "markov-pair"):
            raise ValidationError(f"unknown input kind {self.kind!r}")
        if self.kind == "markov-pair" and self.chain is None:
            raise ValidationError("markov-pair input needs a MarkovChain")


@dataclass(frozen=True)
class SimInternals:
    """Extra simulation outputs used by Monte-Carlo oracles."""

    states: np.ndarray  # (T, n)
    noise: np.ndarray  # (T, m)
    u: np.ndarray  # (T, d) input values aligned with the outputs
    theta: np.ndarray | None = None


def default_burn_in(radius: float) -> int:
    """10 / (1 - rho) steps, rounded up."""
    return int(math.ceil(10.0 / max(1.0 - radius, 1e-6)))


def _noise_factor(Q: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root used to shape standard normal draws."""
    if Q.shape[0] == 0:
        return Q
    w, V = np.linalg.eigh(symmetrize(Q))
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def simulate(
    model: GbsModel,
    input_spec: InputProcessSpec,
    T: int,
    burn_in: int | None = None,
    seed: int = 0,
    return_internals: bool = False,
):
    """Simulate the model from a zero state with the given input law.

    The driving noise is Gaussian with base covariance derived from the
    stored mixed moments Q_s per input kind (indicator and pair kinds use
    Q_base = sum_s Q_s, so Q_s = E[u_s^2] Q_base holds when the moments are
    consistent; the noise is drawn independently of the inputs). Determinism:
    a single generator seeded by ``seed`` draws the discrete path first,
    then the noise.
    """
    if T < 1:
        raise ValidationError("T must be at least 1")
    if burn_in is not None and burn_in < 0:
        raise ValidationError("burn_in must be nonnegative")
    radius = model.stability_radius()
    if radius >= 1.0 - STABILITY_MARGIN:
        raise UnstableModel(f"weighted Kronecker spectral radius {radius:.6g} >= 1")
    if burn_in is None:
        burn_in = default_burn_in(radius)
    d = len(model.alphabet)
    m = model.noise_dim
    rng = np.random.default_rng(seed)
    total = burn_in + T
    theta_out = None

    if input_spec.kind == "linear":
        if d != 1:
            raise ValidationError("linear input requires a single letter")
        Qb = model.Q[0]
        U = np.ones((total, 1))
        idx = np.zeros(total - 1, dtype=np.int64)
    elif input_spec.kind == "gaussian-bias":
        if d != 2:
            raise ValidationError("gaussian-bias input requires two letters")
        Qb = model.Q[0]
        g = rng.standard_normal(total) * math.sqrt(float(model.weights.values[1]))
        U = np.column_stack([np.ones(total), g])
        idx = None
    elif input_spec.kind == "indicator":
        probs = model.weights.values
        if abs(float(np.sum(probs)) - 1.0) > 1e-9:
            raise ValidationError("indicator input needs letter weights summing to 1")
        Qb = model.Q.sum(axis=0)
        theta = rng.choice(d, size=total, p=probs / probs.sum())
        U = np.zeros((total, d))
        U[np.arange(total), theta] = 1.0
        idx = theta[: total - 1].astype(np.int64)
    elif input_spec.kind == "markov-pair":
        chain = input_spec.chain
        letters, path = _pair_path(model, chain, total, rng)
        Qb = model.Q.sum(axis=0)
        idx = letters
        U = np.zeros((total, d))
        U[np.arange(total - 1), letters] = 1.0
        # the final row's pair input needs theta(total), which is not drawn
        theta_out = path
    else:  # pragma: no cover
        raise ValidationError(input_spec.kind)

    noise = rng.standard_normal((total, m)) @ _noise_factor(Qb).T if m else np.zeros((total, 0))
    x0 = np.zeros(model.dim)
    if idx is not None:
        X = kernels.switched_states(model.A, model.K, idx, noise[: total - 1], x0)
    else:
        X = kernels.blend_states(model.A, model.K, U[: total - 1], noise[: total - 1], x0)
    Xout = X[burn_in : burn_in + T]
    vout = noise[burn_in : burn_in + T]
    y = Xout @ model.C.T + vout @ model.D.T

    if theta_out is not None:
        ts = TimeSeries(
            y=y,
            theta=theta_out[burn_in : burn_in + T],
            n_modes=_chain_modes(input_spec.chain),
        )
    else:
        ts = TimeSeries(y=y, u=U[burn_in : burn_in + T], alphabet=model.alphabet)
    if not return_internals:
        return ts
    internals = SimInternals(
        states=Xout,
        noise=vout,
        u=U[burn_in : burn_in + T],
        theta=None if theta_out is None else theta_out[burn_in : burn_in + T],
    )
    return ts, internals


def _chain_modes(chain) -> int:
    return chain.P.shape[0]


def _pair_path(model: GbsModel, chain, total: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stationary mode path and the per-step pair-letter indices."""
    letter_of = {}
    for s, name in enumerate(model.alphabet.names):
        letter_of[name] = s
    from .timeseries import pair_letter_name

    path = chain.sample_path(total, rng)
    letters = np.empty(total - 1, dtype=np.int64)
    for t in range(total - 1):
        name = pair_letter_name(int(path[t]), int(path[t + 1]))
        if name not in letter_of:
            raise ValidationError(f"chain emitted pair {name} not in the model alphabet")
        letters[t] = letter_of[name]
    return letters, path


def run_gbs(model: GbsModel, U: np.ndarray, noise: np.ndarray, x0: np.ndarray | None = None):
    """Deterministic path evaluation with explicit inputs and noise.

    U is (T, d), noise is (T, m); returns (y, states) over t = 0..T-1
    starting from ``x0`` (zero by default). Used for shared-randomness
    comparisons between equivalent models.
    """
    U = np.asarray(U, dtype=float)
    noise = np.asarray(noise, dtype=float)
    T = U.shape[0]
    if x0 is None:
        x0 = np.zeros(model.dim)
    X = kernels.blend_states(model.A, model.K, U[: T - 1], noise[: T - 1], x0)
    y = X @ model.C.T + noise @ model.D.T
    return y, X


def _lyapunov_map(model: GbsModel, P: np.ndarray) -> np.ndarray:
    """One application of the state-covariance fixed-point map."""
    d = len(model.alphabet)
    NK = [model.K[s] @ model.Q[s] @ model.K[s].T for s in range(d)]
    out = np.zeros_like(P)
    for s in range(d):
        acc = np.zeros((model.dim, model.dim))
        for s1 in range(d):
            if (s1, s) in model.language.pairs:
                acc += model.A[s1] @ P[s1] @ model.A[s1].T + NK[s1]
        out[s] = float(model.weights.values[s]) * acc
    return out


def solve_state_covariance(model: GbsModel, method: str | None = None) -> np.ndarray:
    """Unique stationary mixed state covariances P_s = E[x x^T u_s^2].

    Solves P_s = p_s sum_{s1: s1 s admissible} (A_s1 P_s1 A_s1^T +
    K_s1 Q_s1 K_s1^T) by a stacked linear solve (default up to 1e4 unknowns)
    or by fixed-point iteration.
    """
    radius = model.stability_radius()
    if radius >= 1.0 - STABILITY_MARGIN:
        raise UnstableModel(f"weighted Kronecker spectral radius {radius:.6g} >= 1")
    d = len(model.alphabet)
    n = model.dim
    if n == 0:
        return np.zeros((d, 0, 0))
    if method is None:
        method = "direct" if d * n * n <= 10_000 else "fixedpoint"
    if method == "direct":
        NK = [model.K[s] @ model.Q[s] @ model.K[s].T for s in range(d)]
        nn = n * n
        G = np.zeros((d * nn, d * nn))
        b = np.zeros(d * nn)
        for s in range(d):
            p = float(model.weights.values[s])
            acc = np.zeros((n, n))
            for s1 in range(d):
                if (s1, s) in model.language.pairs:
                    G[s * nn : (s + 1) * nn, s1 * nn : (s1 + 1) * nn] = p * np.kron(
                        model.A[s1], model.A[s1]
                    )
                    acc += NK[s1]
            b[s * nn : (s + 1) * nn] = (p * acc).ravel()
        x = np.linalg.solve(np.eye(d * nn) - G, b)
        P = np.stack([symmetrize(x[s * nn : (s + 1) * nn].reshape(n, n)) for s in range(d)])
        return P
    if method == "fixedpoint":
        P = np.zeros((d, n, n))
        cap = max(1000, int(20 * math.log(1e13) / max(-math.log(max(radius, 1e-12)), 1e-12)))
        for _ in range(cap):
            newP = _lyapunov_map(model, P)
            gap = float(np.max(np.abs(newP - P)))
            P = np.stack([symmetrize(newP[s]) for s in range(d)])
            if gap <= 1e-13 * (1.0 + float(np.max(np.abs(P)))):
                return P
        raise NoConvergence("state-covariance fixed point hit its iteration cap")
    raise ValidationError(f"unknown method {method!r}")


def covariance_residual(model: GbsModel, P: np.ndarray) -> float:
    """Relative residual of the state-covariance equation at P."""
    R = _lyapunov_map(model, P) - P
    return float(np.linalg.norm(R) / (1.0 + np.linalg.norm(P)))


def series_indices(alphabet: Alphabet, p: int) -> tuple:
    """Index set of the output-covariance series family: (j, letter) pairs
    grouped letter-major, j over output components."""
    return tuple((j, name) for name in alphabet.names for j in range(p))


def associated_representation(
    model: GbsModel, P: np.ndarray | None = None
) -> Representation:
    """Representation whose coefficients are the output covariances.

    Dynamics sqrt(p_s) A_s; input columns B_(j,s) are the columns of
    B_s = (1/sqrt(p_s)) (A_s P_s C^T + K_s Q_s D^T).
    """
    if P is None:
        P = solve_state_covariance(model)
    d = len(model.alphabet)
    p = model.output_dim
    n = model.dim
    roots = np.sqrt(model.weights.values)
    Ascaled = np.stack([roots[s] * model.A[s] for s in range(d)]) if n else np.zeros((d, 0, 0))
    B = np.empty((n, d * p))
    for s in range(d):
        Bs = (model.A[s] @ P[s] @ model.C.T + model.K[s] @ model.Q[s] @ model.D.T) / roots[s]
        B[:, s * p : (s + 1) * p] = Bs
    return Representation(
        alphabet=model.alphabet,
        A=Ascaled,
        B=B,
        C=model.C,
        indices=series_indices(model.alphabet, p),
    )


def letter_blocks(rep: Representation) -> np.ndarray:
    """B_s matrices (d, n, p) of a representation indexed by (j, letter)."""
    d = len(rep.alphabet)
    K = len(rep.indices)
    if K % d != 0:
        raise ValidationError("index set is not letter-blocked")
    p = K // d
    expected = series_indices(rep.alphabet, p)
    if tuple(rep.indices) != expected:
        raise ValidationError("representation does not use (j, letter) indexing")
    return np.stack([rep.B[:, s * p : (s + 1) * p] for s in range(d)])


def exact_T_diag(model: GbsModel, P: np.ndarray | None = None) -> np.ndarray:
    """Exact same-letter regression covariances T_{s,s} = E[z_s z_s^T] =
    (C P_s C^T + D Q_s D^T) / p_s."""
    if P is None:
        P = solve_state_covariance(model)
    d = len(model.alphabet)
    out = np.empty((d, model.output_dim, model.output_dim))
    for s in range(d):
        out[s] = (
            model.C @ P[s] @ model.C.T + model.D @ model.Q[s] @ model.D.T
        ) / float(model.weights.values[s])
    return out


class ExactCovariances:
    """Exact output covariances Lambda_w and T_{v,w} of a stable model.

    Lambda reads off the associated representation; T uses the shift
    recursion of the covariance structure (strip equal trailing letters,
    stop at a Lambda or a same-letter base case).
    """

    def __init__(self, model: GbsModel):
        self.model = model
        self.P = solve_state_covariance(model)
        self.rep = associated_representation(model, self.P)
        self.tdiag = exact_T_diag(model, self.P)
        self._blocks = letter_blocks(self.rep)
        self._lam: dict[Word, np.ndarray] = {}
        self._p = model.output_dim

    def lam(self, word: Word) -> np.ndarray:
        """Lambda_w = E[y(t) z_w(t)^T] for a nonempty word."""
        if len(word) == 0:
            raise ValidationError("Lambda is defined for nonempty words")
        if word not in self._lam:
            if not self.model.language.is_admissible(word):
                self._lam[word] = np.zeros((self._p, self._p))
            else:
                s, rest = word[0], word[1:]
                self._lam[word] = self.rep.C @ word_matrix(self.rep, rest) @ self._blocks[s]
        return self._lam[word]

    def tee(self, v: Word, w: Word) -> np.ndarray:
        """T_{v,w} = E[z_v(t) z_w(t)^T] for nonempty words."""
        p = self._p
        if len(v) == 0 or len(w) == 0:
            raise ValidationError("T is defined for nonempty words")
        lang = self.model.language
        if not lang.is_admissible(v) or not lang.is_admissible(w):
            return np.zeros((p, p))
        if v[-1] != w[-1]:
            return np.zeros((p, p))
        if len(v) == 1 and len(w) == 1:
            return self.tdiag[v[0]]
        if len(w) == 1:
            return self.lam(v[:-1]).T
        if len(v) == 1:
            return self.lam(w[:-1])
        return self.tee(v[:-1], w[:-1])


def innovation_gain(
    B_s: np.ndarray,
    A_s: np.ndarray,
    P_s: np.ndarray,
    C: np.ndarray,
    T_ss: np.ndarray,
    p_s: float,
    tol: float = 1e-10,
) -> np.ndarray:
    """Innovation gain K_s = (sqrt(p_s) B_s - A_s P_s C^T / sqrt(p_s)) S^+
    with S = p_s T_ss - C P_s C^T.

    ``A_s`` is the scaled-representation matrix (sqrt(p_s) times the model
    matrix). S must be invertible on the range the numerator lives in: for
    full GBS outputs that means positive definite; for block-structured data
    (pair alphabets) S is PSD of lower rank and a range-consistent
    pseudo-inverse is used. Raises InnovationNotFullRank when the numerator
    leaves the range of S.
    """
    from .linalg import psd_solve_range

    root = math.sqrt(p_s)
    S = symmetrize(p_s * np.asarray(T_ss, dtype=float) - C @ P_s @ C.T)
    num = root * B_s - (A_s @ P_s @ C.T) / root
    wmax = float(np.max(np.linalg.eigvalsh(S))) if S.size else 0.0
    if wmax <= tol * (1.0 + float(np.linalg.norm(T_ss))):
        raise InnovationNotFullRank("innovation covariance vanishes at tolerance")
    Ks, resid = psd_solve_range(S, num, eps=tol)
    if resid > 1e-6:
        raise InnovationNotFullRank(
            f"gain equation inconsistent with the innovation range (residual {resid:.3g})"
        )
    return Ks


@dataclass(frozen=True)
class WeakRealization:
    """Identified tuple ({A_s, K_s, P_s, Q_s}, C, D) of a GBS.

    A holds the unscaled model matrices; P and Q are the stationary mixed
    second moments consistent with the identification, which makes the
    associated representation reproduce the identified covariance sequence
    exactly.
    """

    alphabet: Alphabet
    A: np.ndarray
    K: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    C: np.ndarray
    D: np.ndarray
    weights: LetterWeights
    language: AdmissibleLanguage

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C.shape[0]

    def as_gbs(self) -> GbsModel:
        return GbsModel(
            alphabet=self.alphabet,
            A=self.A,
            K=self.K,
            C=self.C,
            D=self.D,
            weights=self.weights,
            Q=self.Q,
            language=self.language,
        )

    def associated_representation(self) -> Representation:
        """Representation built from the stored P and Q (no re-solve), so its
        coefficients equal the identified covariances."""
        d = len(self.alphabet)
        p = self.output_dim
        n = self.dim
        roots = np.sqrt(self.weights.values)
        Ascaled = np.stack([roots[s] * self.A[s] for s in range(d)]) if n else np.zeros((d, 0, 0))
        B = np.empty((n, d * p))
        for s in range(d):
            B[:, s * p : (s + 1) * p] = (
                self.A[s] @ self.P[s] @ self.C.T + self.K[s] @ self.Q[s] @ self.D.T
            ) / roots[s]
        return Representation(
            alphabet=self.alphabet,
            A=Ascaled,
            B=B,
            C=self.C,
            indices=series_indices(self.alphabet, p),
        )

    def covariance(self, word: Word) -> np.ndarray:
        """Output covariance Lambda_w implied by the identified tuple."""
        if len(word) == 0:
            raise ValidationError("Lambda is defined for nonempty words")
        if not self.language.is_admissible(word):
            return np.zeros((self.output_dim, self.output_dim))
        rep = self.associated_representation()
        blocks = letter_blocks(rep)
        return rep.C @ word_matrix(rep, word[1:]) @ blocks[word[0]]


def innovation_realization(
    rep: Representation,
    T_diag: np.ndarray,
    weights: LetterWeights,
    language: AdmissibleLanguage,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    residual_cap: float = 1e-8,
) -> WeakRealization:
    """Innovation-form weak realization from a minimal representation.

    ``rep`` is the scaled-form minimal representation of the covariance
    family ((j, letter) indices); T_diag stacks the same-letter regression
    covariances T_{s,s}. Solves the coupled gain/covariance fixed point from
    P = 0: Q_s = p_s T_ss - C P_s C^T, K_s by the gain formula, then the
    state-covariance update with the unscaled dynamics. Returns the weak
    realization with unscaled A and D = identity.
    """
    d = len(rep.alphabet)
    p = rep.output_dim
    n = rep.dim
    pv = weights.values
    roots = np.sqrt(pv)
    T_diag = np.asarray(T_diag, dtype=float)
    if T_diag.shape != (d, p, p):
        raise ValidationError(f"T_diag must be ({d}, {p}, {p})")
    if n == 0:
        Q = np.stack([pv[s] * symmetrize(T_diag[s]) for s in range(d)])
        return WeakRealization(
            alphabet=rep.alphabet,
            A=np.zeros((d, 0, 0)),
            K=np.zeros((d, 0, p)),
            P=np.zeros((d, 0, 0)),
            Q=Q,
            C=np.zeros((p, 0)),
            D=np.eye(p),
            weights=weights,
            language=language,
        )
    B = letter_blocks(rep)
    C = rep.C
    A_model = np.stack([rep.A[s] / roots[s] for s in range(d)])

    P = np.zeros((d, n, n))
    K = np.zeros((d, n, p))
    Q = np.zeros((d, p, p))
    for it in range(max_iter):
        for s in range(d):
            Q[s] = symmetrize(pv[s] * T_diag[s] - C @ P[s] @ C.T)
            K[s] = innovation_gain(B[s], rep.A[s], P[s], C, T_diag[s], float(pv[s]), tol)
        newP = np.zeros_like(P)
        for s in range(d):
            acc = np.zeros((n, n))
            for s1 in range(d):
                if (s1, s) in language.pairs:
                    acc += (
                        A_model[s1] @ P[s1] @ A_model[s1].T
                        + K[s1] @ Q[s1] @ K[s1].T
                    )
            newP[s] = symmetrize(pv[s] * acc)
        gap = float(np.max(np.abs(newP - P)))
        P = newP
        if gap <= tol * (1.0 + float(np.max(np.abs(P)))):
            break
    else:
        raise NoConvergence("innovation fixed point hit its iteration cap")

    # final pass so K, Q match the converged P
    for s in range(d):
        Q[s] = symmetrize(pv[s] * T_diag[s] - C @ P[s] @ C.T)
        K[s] = innovation_gain(B[s], rep.A[s], P[s], C, T_diag[s], float(pv[s]), tol)
    resid = float(np.max(np.abs(_weak_lyap_residual(A_model, K, Q, P, pv, language))))
    gain_resid = max(
        float(
            np.linalg.norm(
                K[s] @ (pv[s] * T_diag[s] - C @ P[s] @ C.T)
                - (roots[s] * B[s] - rep.A[s] @ P[s] @ C.T / roots[s])
            )
        )
        for s in range(d)
    )
    if resid > residual_cap * (1.0 + float(np.max(np.abs(P)))) or gain_resid > residual_cap * (
        1.0 + float(np.max(np.abs(B)))
    ):
        raise NoConvergence(
            f"innovation equations not satisfied (residuals {resid:.3g}, {gain_resid:.3g})"
        )
    return WeakRealization(
        alphabet=rep.alphabet,
        A=A_model,
        K=K,
        P=P,
        Q=Q,
        C=C,
        D=np.eye(p),
        weights=weights,
        language=language,
    )


def _weak_lyap_residual(A, K, Q, P, pv, language) -> np.ndarray:
    d, n = A.shape[0], A.shape[1]
    out = np.zeros_like(P)
    for s in range(d):
        acc = np.zeros((n, n))
        for s1 in range(d):
            if (s1, s) in language.pairs:
                acc += A[s1] @ P[s1] @ A[s1].T + K[s1] @ Q[s1] @ K[s1].T
        out[s] = pv[s] * acc - P[s]
    return out
