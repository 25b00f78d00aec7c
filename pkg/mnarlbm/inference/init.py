"""Initializations of the variational EM engine.

The default starting point is a double spectral clustering: rows are clustered on the
similarity :math:`X X^T` and columns on :math:`X^T X`, with missing cells read as zero.
Each similarity :math:`W` is normalized as :math:`L = D^{-1/2} W D^{-1/2}` and its
eigenvectors of largest absolute eigenvalues are clustered with k-means. Parameters and
posterior are then estimated from the resulting hard labels.
"""
from typing import Tuple

import numpy as np
from mnarlbm.inference.exceptions import DegenerateMatrixError
from mnarlbm.inference.state import LATENT_BLOCKS, VariationalState
from mnarlbm.logging import logger
from mnarlbm.model import MissingnessKind, ModelParams, ObservedMatrix
from mnarlbm.model.types import PI_FLOOR
from mnarlbm.utils import SeedLike, spawn_seeds
from scipy.special import logit
from sklearn.cluster import KMeans

TAU_WEIGHT = 0.9
"""Weight given to the hard label when smoothing an initial class membership."""

PERTURBED_FRACTION = 0.2

KMEANS_RESTARTS = 10

Init = Tuple[ModelParams, VariationalState]


def spectral_labels(features: np.ndarray, n_classes: int, seed: int) -> np.ndarray:
    """Clusters the rows of `features` by normalized spectral clustering.

    Rows without any one have a zero degree: they are left out of k-means and join the
    largest cluster. When fewer than `n_classes` rows have a positive degree, labels
    are drawn uniformly at random.

    :param features: A real matrix whose rows are clustered
    :type features: numpy.ndarray
    :param int n_classes: The number of clusters
    :param int seed: Seed of k-means and of the random fallback
    :return: One label in ``range(n_classes)`` per row
    :rtype: numpy.ndarray
    """
    n = features.shape[0]

    if n_classes == 1:
        return np.zeros(n, dtype=np.int64)

    w = features @ features.T
    degree = w.sum(axis=1)
    connected = degree > 0.0

    if np.count_nonzero(connected) < n_classes:
        logger.warning(
            f"Only {np.count_nonzero(connected)} of {n} nodes are connected, falling "
            f"back to random labels for {n_classes} classes"
        )
        return np.random.default_rng(seed).integers(n_classes, size=n)

    inv_sqrt = np.zeros(n)
    inv_sqrt[connected] = 1.0 / np.sqrt(degree[connected])
    laplacian = inv_sqrt[:, None] * w * inv_sqrt[None, :]
    values, vectors = np.linalg.eigh(laplacian)
    top = np.argsort(-np.abs(values), kind="stable")[:n_classes]
    embedding = vectors[np.ix_(connected, top)]

    kmeans = KMeans(n_clusters=n_classes, n_init=KMEANS_RESTARTS, random_state=seed)
    labels = np.empty(n, dtype=np.int64)
    labels[connected] = kmeans.fit_predict(embedding)
    counts = np.bincount(labels[connected], minlength=n_classes)
    labels[~connected] = int(np.argmax(counts))

    return labels


def spectral_coclustering(
    x: ObservedMatrix, nq: int, nl: int, seed: SeedLike
) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column labels of the double spectral clustering.

    :raises DegenerateMatrixError: `x` has no observed cell
    """
    if x.is_all_missing():
        raise DegenerateMatrixError(x.shape)

    row_seed, col_seed = spawn_seeds(seed, 2)
    filled = x.filled(0)

    return (
        spectral_labels(filled, nq, row_seed),
        spectral_labels(filled.T, nl, col_seed),
    )


def smoothed_tau(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """One-hot memberships with weight :const:`TAU_WEIGHT` on the label and the
    remainder spread over the other classes."""
    if n_classes == 1:
        return np.ones((labels.size, 1))

    tau = np.full((labels.size, n_classes), (1.0 - TAU_WEIGHT) / (n_classes - 1))
    tau[np.arange(labels.size), labels] = TAU_WEIGHT

    return tau


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    return np.eye(n_classes)[labels]


def init_from_labels(
    x: ObservedMatrix,
    row_labels: np.ndarray,
    col_labels: np.ndarray,
    nq: int,
    nl: int,
    seed: SeedLike,
    kind: MissingnessKind = MissingnessKind.MNAR,
) -> Init:
    """Estimates a starting point from hard labels.

    Class proportions and block probabilities are smoothed counts, :math:`\\mu` is the
    logit of the observed rate and the prior variances are drawn from
    :math:`\\mathcal{U}(0, 1]`. Posterior means start at zero and posterior variances
    at the prior variance of their block.

    :rtype: tuple[ModelParams, VariationalState]
    """
    kind = MissingnessKind.parse(kind)
    n1, n2 = x.shape
    ones, zeros, _ = x.indicators()
    y1 = _one_hot(row_labels, nq)
    y2 = _one_hot(col_labels, nl)

    alpha_rows = (y1.sum(axis=0) + 0.5) / (n1 + 0.5 * nq)
    alpha_cols = (y2.sum(axis=0) + 0.5) / (n2 + 0.5 * nl)
    block_ones = y1.T @ ones @ y2
    block_observed = block_ones + y1.T @ zeros @ y2
    pi = (block_ones + 0.5) / (block_observed + 1.0)
    observed_rate = np.clip(1.0 - x.missing_rate(), PI_FLOOR, 1.0 - PI_FLOOR)

    rng = np.random.default_rng(spawn_seeds(seed, 3)[2])
    draws = dict(zip(LATENT_BLOCKS, 1.0 - rng.random(len(LATENT_BLOCKS))))
    variances = {
        f"var_{block}": (draws[block] if block in kind.latent_blocks else 0.0)
        for block in LATENT_BLOCKS
    }

    params = ModelParams(
        kind=kind,
        alpha_rows=alpha_rows / alpha_rows.sum(),
        alpha_cols=alpha_cols / alpha_cols.sum(),
        pi=pi,
        mu=float(logit(observed_rate)),
        **variances,
    )

    latents = {}

    for block in kind.latent_blocks:
        size = n1 if block in ("a", "b") else n2
        latents[f"nu_{block}"] = np.zeros(size)
        latents[f"rho_{block}"] = np.full(size, draws[block])

    gamma = VariationalState(
        tau_rows=smoothed_tau(np.asarray(row_labels), nq),
        tau_cols=smoothed_tau(np.asarray(col_labels), nl),
        **latents,
    )

    return params, gamma


def init_spectral(
    x: ObservedMatrix,
    nq: int,
    nl: int,
    seed: SeedLike,
    kind: MissingnessKind = MissingnessKind.MNAR,
) -> Init:
    """Spectral initialization of the parameters and posterior.

    :param ObservedMatrix x: The observed matrix
    :param int nq: Number of row classes
    :param int nl: Number of column classes
    :param seed: Seed of k-means and of the variance draws
    :type seed: int or numpy.random.SeedSequence
    :param kind: The missingness kind, defaults to MNAR
    :type kind: MissingnessKind, optional
    :return: The initial ``(params, gamma)``
    :rtype: tuple[ModelParams, VariationalState]

    :raises DegenerateMatrixError: `x` has no observed cell
    """
    row_labels, col_labels = spectral_coclustering(x, nq, nl, seed)

    return init_from_labels(x, row_labels, col_labels, nq, nl, seed, kind)


def init_random(
    x: ObservedMatrix,
    nq: int,
    nl: int,
    seed: SeedLike,
    kind: MissingnessKind = MissingnessKind.MNAR,
) -> Init:
    """Initialization from uniformly random labels; works on any matrix."""
    row_seed, col_seed = spawn_seeds(seed, 2)
    row_labels = np.random.default_rng(row_seed).integers(nq, size=x.n_rows)
    col_labels = np.random.default_rng(col_seed).integers(nl, size=x.n_cols)

    return init_from_labels(x, row_labels, col_labels, nq, nl, seed, kind)


def perturb_labels(
    labels: np.ndarray,
    n_classes: int,
    seed: SeedLike,
    fraction: float = PERTURBED_FRACTION,
) -> np.ndarray:
    """Reassigns a random `fraction` of the labels to random classes."""
    rng = np.random.default_rng(seed)
    labels = np.array(labels, copy=True)
    n_chosen = int(round(fraction * labels.size))
    chosen = rng.choice(labels.size, size=n_chosen, replace=False)
    labels[chosen] = rng.integers(n_classes, size=chosen.size)

    return labels


def init_perturbed(
    x: ObservedMatrix,
    row_labels: np.ndarray,
    col_labels: np.ndarray,
    nq: int,
    nl: int,
    seed: SeedLike,
    kind: MissingnessKind = MissingnessKind.MNAR,
) -> Init:
    """Initialization from spectral labels of which a fraction is reassigned."""
    row_seed, col_seed = spawn_seeds(seed, 2)

    return init_from_labels(
        x,
        perturb_labels(row_labels, nq, row_seed),
        perturb_labels(col_labels, nl, col_seed),
        nq,
        nl,
        seed,
        kind,
    )
