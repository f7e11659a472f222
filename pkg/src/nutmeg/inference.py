"""Variational-Bayes EM for subpopulation-aware truth inference.

Each (item, subpopulation) cell carries a latent true label T; each record
carries a latent spam indicator S. A non-spamming annotator copies their
subpopulation's true label; a spammer draws from their personal emission
distribution xi. The per-record emission is therefore

    P(a | t) = theta_j * [a == t] + (1 - theta_j) * xi_j[a]

Fitting runs mean-field VB-EM with conjugate Beta/Dirichlet posteriors over
(theta, xi); the E-step uses geometric-mean parameters exp(E[log .]) and the
reported objective is the variational lower bound, which is non-decreasing
per iteration. A plain MAP-EM path (add-prior smoothing) is available for
debugging. All probability arithmetic is in log space.

Fitting with a single subpopulation containing every annotator is exactly
the MACE competence model.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, digamma, gammaln, logsumexp

from .data import CompetenceTable, Dataset, PosteriorTable

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


class NumericalError(RuntimeError):
    """Objective became non-finite (degenerate priors or corrupt input)."""


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 50
    convergence_tol: float = 1e-6
    restarts: int = 10
    seed: int = 0
    theta_prior: tuple = (0.5, 0.5)
    xi_prior: float = 0.5
    truth_prior: tuple | None = None  # None = uniform over labels
    update_rule: str = "vb"  # "vb" or "map"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        a, b = self.theta_prior
        if a <= 0 or b <= 0 or self.xi_prior <= 0:
            raise ValueError("prior parameters must be strictly positive")
        if self.truth_prior is not None and any(
                p <= 0 for p in self.truth_prior):
            raise ValueError("truth_prior entries must be strictly positive")
        if self.update_rule not in ("vb", "map"):
            raise ValueError(f"unknown update_rule {self.update_rule!r}")

    def truth_prior_array(self, n_labels: int) -> np.ndarray:
        if self.truth_prior is None:
            p = np.full(n_labels, 1.0 / n_labels)
        else:
            p = np.asarray(self.truth_prior, dtype=float)
            if p.shape != (n_labels,):
                raise ValueError(
                    f"truth_prior has length {p.size}, expected {n_labels}")
            p = p / p.sum()
        return p


@dataclass(frozen=True)
class FitResult:
    posterior: PosteriorTable        # pre-imputation: NaN at unobserved cells
    competence: CompetenceTable
    spam_posterior: np.ndarray       # (R,) P(record was spam)
    objective_trace: np.ndarray      # chosen restart
    chosen_restart: int
    restart_traces: tuple = field(default=(), repr=False)
    truth_prior: np.ndarray | None = field(default=None, repr=False)


def _annotator_init(ann_id: str, seed: int, restart: int) -> float:
    """Seeded theta draw that depends only on (seed, restart, annotator id).

    Keyed by annotator identity rather than array position so that a fit
    restricted to one subpopulation's records reproduces the same
    per-annotator initialization (the factorization property).
    """
    entropy = [seed & _SEED_MASK, restart,
               zlib.crc32(str(ann_id).encode("utf-8"))]
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    return rng.uniform(0.4, 1.0)


def _kl_beta(a, b, a0, b0):
    """KL(Beta(a, b) || Beta(a0, b0)), elementwise."""
    return (betaln(a0, b0) - betaln(a, b)
            + (a - a0) * digamma(a)
            + (b - b0) * digamma(b)
            + (a0 + b0 - a - b) * digamma(a + b))


def _kl_dirichlet(alpha, alpha0):
    """KL(Dir(alpha) || Dir(alpha0)) per row; alpha is (M, L)."""
    s = alpha.sum(axis=1)
    s0 = alpha0.sum(axis=1)
    return (gammaln(s) - gammaln(alpha).sum(axis=1)
            - gammaln(s0) + gammaln(alpha0).sum(axis=1)
            + ((alpha - alpha0)
               * (digamma(alpha) - digamma(s)[:, None])).sum(axis=1))


def _e_step_arrays(dataset: Dataset, log_ns, log_sp, log_xi, log_prior,
                   cell_of_record, n_cells):
    """One E-step over observed cells.

    log_ns / log_sp are (M,) log weights for not-spamming / spamming
    (point parameters or exp(E[log .]) surrogates); log_xi is (M, L).
    Returns (qT, log_qT, qS, logZ_total) with qT of shape (n_cells, L).
    """
    R = dataset.n_records
    L = dataset.n_labels
    j = dataset.ann_idx
    a = dataset.label_idx

    # log spam part of the emission: same for every candidate t
    log_spam_part = log_sp[j] + log_xi[j, a]
    log_emit = np.repeat(log_spam_part[:, None], L, axis=1)
    log_emit[np.arange(R), a] = np.logaddexp(log_spam_part, log_ns[j])

    scores = np.tile(log_prior, (n_cells, 1))
    np.add.at(scores, cell_of_record, log_emit)
    logZ = logsumexp(scores, axis=1)
    log_qT = scores - logZ[:, None]
    qT = np.exp(log_qT)

    # q(S=1) per record: sum_t q(T=t) * spam_part / emission(t);
    # a zero-emission candidate t has q(T=t) = 0, so its ratio is moot
    with np.errstate(invalid="ignore"):
        ratio = np.exp(log_spam_part[:, None] - log_emit)
    ratio[np.isneginf(log_emit)] = 0.0
    qS = np.clip((qT[cell_of_record] * ratio).sum(axis=1), 0.0, 1.0)
    return qT, log_qT, qS, float(logZ.sum())


def e_step(dataset: Dataset, theta: np.ndarray, xi: np.ndarray,
           truth_prior: np.ndarray):
    """Exact posteriors q(T), q(S=1) at fixed point parameters.

    Returns (qT, qS) with qT of shape (N, P, L); unobserved cells hold the
    truth prior (they carry no evidence).
    """
    with np.errstate(divide="ignore"):
        log_ns = np.log(theta)
        log_sp = np.log1p(-theta)
        log_xi = np.log(xi)
        log_prior = np.log(truth_prior)
    cell_ids = dataset.item_idx * dataset.n_subpops + dataset.record_subpop
    uniq, compact = np.unique(cell_ids, return_inverse=True)
    qT_obs, _, qS, _ = _e_step_arrays(
        dataset, log_ns, log_sp, log_xi, log_prior, compact, uniq.size)
    qT = np.tile(truth_prior, (dataset.n_items, dataset.n_subpops, 1))
    qT[uniq // dataset.n_subpops, uniq % dataset.n_subpops] = qT_obs
    return qT, qS


def _m_counts(dataset: Dataset, qS: np.ndarray):
    """Expected spam/non-spam and spam-emission counts per annotator."""
    M, L = dataset.n_annotators, dataset.n_labels
    spam = np.bincount(dataset.ann_idx, weights=qS, minlength=M)
    total = np.bincount(dataset.ann_idx, minlength=M).astype(float)
    nonspam = total - spam
    emit = np.zeros((M, L))
    np.add.at(emit, (dataset.ann_idx, dataset.label_idx), qS)
    return nonspam, spam, emit


def m_step(nonspam: np.ndarray, spam: np.ndarray, emit: np.ndarray,
           config: FitConfig):
    """Update competence parameters from expected counts.

    Returns (theta, xi, log_ns, log_sp, log_xi) where the log arrays are
    the weights the next E-step should use: digamma-transformed
    pseudo-counts under "vb", plain smoothed estimates under "map". theta
    and xi are the reportable (normalized) parameters.
    """
    a0, b0 = config.theta_prior
    g0 = config.xi_prior
    a = nonspam + a0
    b = spam + b0
    alpha = emit + g0
    theta = a / (a + b)
    xi = alpha / alpha.sum(axis=1, keepdims=True)
    if config.update_rule == "vb":
        log_ns = digamma(a) - digamma(a + b)
        log_sp = digamma(b) - digamma(a + b)
        log_xi = digamma(alpha) - digamma(alpha.sum(axis=1))[:, None]
    else:
        log_ns = np.log(theta)
        log_sp = np.log1p(-theta)
        log_xi = np.log(xi)
    return theta, xi, log_ns, log_sp, log_xi


def _map_penalty(theta, xi, config: FitConfig) -> float:
    """Log-prior pseudo-count penalty making the MAP-EM trace monotone."""
    a0, b0 = config.theta_prior
    return float(a0 * np.log(theta).sum()
                 + b0 * np.log1p(-theta).sum()
                 + config.xi_prior * np.log(xi).sum())


def _run_restart(dataset: Dataset, config: FitConfig, restart: int,
                 log_prior, cell_of_record, n_cells):
    M, L = dataset.n_annotators, dataset.n_labels
    theta0 = np.array([
        _annotator_init(a, config.seed, restart)
        for a in dataset.annotations.annotators])
    # label-symmetric xi init keeps the fit equivariant under label
    # permutation; restart diversity comes from theta0
    xi0 = np.full((M, L), 1.0 / L)

    # burn-in E/M from the point init to obtain the first conjugate posterior
    with np.errstate(divide="ignore"):
        log_ns = np.log(theta0)
        log_sp = np.log1p(-theta0)
        log_xi = np.log(xi0)
    _, _, qS, _ = _e_step_arrays(
        dataset, log_ns, log_sp, log_xi, log_prior, cell_of_record, n_cells)
    nonspam, spam, emit = _m_counts(dataset, qS)
    theta, xi, log_ns, log_sp, log_xi = m_step(nonspam, spam, emit, config)

    a0, b0 = config.theta_prior
    g0 = config.xi_prior
    trace = []
    qT = qS = None
    for _ in range(config.max_iterations):
        qT, _, qS, logZ = _e_step_arrays(
            dataset, log_ns, log_sp, log_xi, log_prior,
            cell_of_record, n_cells)
        if config.update_rule == "vb":
            kl_th = _kl_beta(nonspam + a0, spam + b0, a0, b0).sum()
            kl_xi = _kl_dirichlet(emit + g0,
                                  np.full((M, L), g0)).sum()
            obj = logZ - float(kl_th) - float(kl_xi)
        else:
            obj = logZ + _map_penalty(theta, xi, config)
        if not np.isfinite(obj):
            raise NumericalError(
                "non-finite objective; check priors and input data")
        converged = bool(trace) and (
            abs(obj - trace[-1])
            <= config.convergence_tol * (abs(trace[-1]) + 1e-12))
        trace.append(obj)
        if converged:
            break
        nonspam, spam, emit = _m_counts(dataset, qS)
        theta, xi, log_ns, log_sp, log_xi = m_step(
            nonspam, spam, emit, config)
    return np.asarray(trace), qT, qS, theta, xi


def fit(dataset: Dataset, config: FitConfig = FitConfig()) -> FitResult:
    """Fit the model; deterministic given (dataset, config).

    Runs ``config.restarts`` independent restarts and returns the one with
    the highest final objective (ties to the lowest restart index).
    """
    if dataset.n_labels < 2:
        raise ValueError("need at least 2 labels")
    truth_prior = config.truth_prior_array(dataset.n_labels)
    log_prior = np.log(truth_prior)
    cell_ids = dataset.item_idx * dataset.n_subpops + dataset.record_subpop
    uniq, compact = np.unique(cell_ids, return_inverse=True)

    results = []
    for r in range(config.restarts):
        results.append(_run_restart(
            dataset, config, r, log_prior, compact, uniq.size))
    finals = [res[0][-1] for res in results]
    best = int(np.argmax(finals))
    trace, qT_obs, qS, theta, xi = results[best]

    N, P, L = dataset.n_items, dataset.n_subpops, dataset.n_labels
    entries = np.full((N, P, L), np.nan)
    entries[uniq // P, uniq % P] = qT_obs
    posterior = PosteriorTable(
        items=dataset.annotations.items,
        subpopulations=dataset.subpops.subpopulations,
        label_space=dataset.annotations.label_space,
        entries=entries,
        imputed=~dataset.observed,
        fallback=np.zeros((N, P), dtype=bool),
    )
    competence = CompetenceTable(
        annotators=dataset.annotations.annotators,
        label_space=dataset.annotations.label_space,
        theta=theta,
        xi=xi,
    )
    return FitResult(
        posterior=posterior,
        competence=competence,
        spam_posterior=qS,
        objective_trace=trace,
        chosen_restart=best,
        restart_traces=tuple(res[0] for res in results),
        truth_prior=truth_prior,
    )


def decode(posterior: PosteriorTable) -> np.ndarray:
    """Hard labels per cell: argmax, ties to the lowest label index."""
    return posterior.decoded


def confidence(cell: np.ndarray) -> float:
    """1 - H(q)/log(L): 1 for a point mass, 0 for uniform."""
    q = np.asarray(cell, dtype=float)
    nz = q[q > 0]
    entropy = -np.sum(nz * np.log(nz))
    return float(1.0 - entropy / np.log(q.size))
