"""Asymptotic Integrated Completed Likelihood of fitted models.

The maximized complete log-likelihood is replaced by the final variational criterion
:math:`J` of the fit, and the :math:`o(\\log n)` remainders are dropped. With
:math:`n_1` rows, :math:`n_2` columns, :math:`n_q` row classes and :math:`n_l` column
classes, the class and block penalty is

.. math::

   \\frac{n_q n_l}{2} \\log(n_1 n_2) + \\frac{n_q - 1}{2} \\log n_1
   + \\frac{n_l - 1}{2} \\log n_2

and the Gaussian latent effects add :math:`n_1 \\log 2\\pi - \\log n_1 + n_2 \\log 2\\pi
- \\log n_2` under MNAR, half of it under MAR and nothing under MCAR.
"""
import math

from mnarlbm.inference.state import FitResult
from mnarlbm.model import MissingnessKind
from mnarlbm.selection.exceptions import KindMismatchError

LOG_2PI = math.log(2.0 * math.pi)


def class_penalty(n1: int, n2: int, nq: int, nl: int) -> float:
    """The class-proportion and block-probability penalty."""
    return (
        0.5 * nq * nl * math.log(n1 * n2)
        + 0.5 * (nq - 1) * math.log(n1)
        + 0.5 * (nl - 1) * math.log(n2)
    )


def gaussian_correction(n1: int, n2: int) -> float:
    """The correction of the four Gaussian latent blocks."""
    return n1 * LOG_2PI - math.log(n1) + n2 * LOG_2PI - math.log(n2)


def _bound(fit: FitResult, use_entropy: bool) -> float:
    return fit.elbo if use_entropy else fit.elbo - fit.entropy


def _check_kind(fit: FitResult, kind: MissingnessKind) -> None:
    if fit.kind is not kind:
        raise KindMismatchError(kind.name, fit.kind.name)


def icl_nmar(
    fit: FitResult, n1: int, n2: int, nq: int, nl: int, use_entropy: bool = True
) -> float:
    """ICL of an MNAR fit.

    :param FitResult fit: The fit
    :param int n1: Number of rows
    :param int n2: Number of columns
    :param int nq: Number of row classes
    :param int nl: Number of column classes
    :param use_entropy: Whether the bound keeps the entropy of the posterior,
      defaults to :const:`True`
    :type use_entropy: bool, optional
    :rtype: float

    :raises KindMismatchError: `fit` is not an MNAR fit
    """
    _check_kind(fit, MissingnessKind.MNAR)

    return (
        _bound(fit, use_entropy)
        - class_penalty(n1, n2, nq, nl)
        + gaussian_correction(n1, n2)
    )


def icl_mar(
    fit: FitResult, n1: int, n2: int, nq: int, nl: int, use_entropy: bool = True
) -> float:
    """ICL of a MAR fit; the Gaussian correction is half that of :func:`icl_nmar`.

    :raises KindMismatchError: `fit` is not a MAR fit
    """
    _check_kind(fit, MissingnessKind.MAR)

    return (
        _bound(fit, use_entropy)
        - class_penalty(n1, n2, nq, nl)
        + 0.5 * gaussian_correction(n1, n2)
    )


def icl_mcar(
    fit: FitResult, n1: int, n2: int, nq: int, nl: int, use_entropy: bool = True
) -> float:
    """ICL of an MCAR fit, without Gaussian correction.

    :raises KindMismatchError: `fit` is not an MCAR fit
    """
    _check_kind(fit, MissingnessKind.MCAR)

    return _bound(fit, use_entropy) - class_penalty(n1, n2, nq, nl)


_FORMULAS = {
    MissingnessKind.MNAR: icl_nmar,
    MissingnessKind.MAR: icl_mar,
    MissingnessKind.MCAR: icl_mcar,
}


def icl(fit: FitResult, n1: int, n2: int, use_entropy: bool = True) -> float:
    """ICL of a fit, dispatching on its missingness kind.

    :param FitResult fit: The fit
    :param int n1: Number of rows
    :param int n2: Number of columns
    :param use_entropy: Whether the bound keeps the entropy of the posterior,
      defaults to :const:`True`
    :type use_entropy: bool, optional
    :rtype: float
    """
    return _FORMULAS[fit.kind](fit, n1, n2, fit.nq, fit.nl, use_entropy)
