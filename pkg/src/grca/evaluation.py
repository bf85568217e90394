"""
Unmixing metrics: abundance RNMSE, reconstruction error and detection rates.
"""

from typing import Dict, Optional, Tuple, Union

import numpy as np

from grca.errors import DimensionError
from grca.logger import Logger
from grca.models import AbundanceField, HyperCube, MetricReport

ArrayLike = Union[np.ndarray, AbundanceField, HyperCube]


def _values(x: ArrayLike) -> np.ndarray:
    if isinstance(x, AbundanceField):
        return x.values
    if isinstance(x, HyperCube):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _check_same_shape(name: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{name}: shapes {a.shape} and {b.shape} differ")


def _root_mean_square(truth: np.ndarray, estimate: np.ndarray) -> float:
    """sqrt(sum ||x - x_hat||^2 / (n_pixels * n_layers)) for (layers, rows, cols) arrays."""
    return float(np.sqrt(np.mean((truth - estimate) ** 2)))


def _per_class(
    name: str, truth: np.ndarray, estimate: np.ndarray, class_map: np.ndarray
) -> Dict[int, float]:
    if class_map.shape != truth.shape[1:]:
        raise DimensionError(f"{name}: class map {class_map.shape} does not cover {truth.shape[1:]}")
    values = {}
    for label in np.unique(class_map):
        members = class_map == label
        values[int(label)] = _root_mean_square(truth[:, members], estimate[:, members])
    return values


def rnmse(A_true: ArrayLike, A_est: ArrayLike) -> float:
    """Root normalised mean square error of an abundance estimate."""
    truth, estimate = _values(A_true), _values(A_est)
    _check_same_shape("rnmse", truth, estimate)
    return _root_mean_square(truth, estimate)


def rnmse_per_class(
    A_true: ArrayLike, A_est: ArrayLike, class_map: np.ndarray, n_classes: Optional[int] = None
) -> Dict[int, float]:
    """RNMSE restricted to each class of the map.

    Labels in range(n_classes) that no pixel carries are left out and logged.
    """
    truth, estimate = _values(A_true), _values(A_est)
    _check_same_shape("rnmse_per_class", truth, estimate)
    class_map = np.asarray(class_map)
    values = _per_class("rnmse_per_class", truth, estimate, class_map)
    for label in range(n_classes or 0):
        if label not in values:
            Logger.warning(f"Class {label} has no pixels; skipped in per-class RNMSE")
    return values


def reconstruction_error(Y: ArrayLike, Y_hat: ArrayLike) -> float:
    """sqrt(sum ||y - y_hat||^2 / (N L)) over the whole image."""
    observed, fitted = _values(Y), _values(Y_hat)
    _check_same_shape("reconstruction_error", observed, fitted)
    return _root_mean_square(observed, fitted)


def reconstruction_error_per_class(
    Y: ArrayLike, Y_hat: ArrayLike, class_map: np.ndarray
) -> Dict[int, float]:
    observed, fitted = _values(Y), _values(Y_hat)
    _check_same_shape("reconstruction_error_per_class", observed, fitted)
    return _per_class("reconstruction_error_per_class", observed, fitted, np.asarray(class_map))


def detection_rates(
    decision_map: np.ndarray, nonlin_mask: np.ndarray
) -> Tuple[Optional[float], Optional[float]]:
    """(P_FA, P_D); a rate whose reference set is empty is None."""
    decisions = np.asarray(decision_map, dtype=bool)
    mask = np.asarray(nonlin_mask, dtype=bool)
    _check_same_shape("detection_rates", decisions, mask)
    linear, nonlinear = ~mask, mask
    p_fa = float(np.sum(decisions & linear) / linear.sum()) if linear.any() else None
    p_d = float(np.sum(decisions & nonlinear) / nonlinear.sum()) if nonlinear.any() else None
    return p_fa, p_d


def evaluate(
    A_true: ArrayLike,
    A_est: ArrayLike,
    class_map: Optional[np.ndarray] = None,
    Y: Optional[ArrayLike] = None,
    Y_hat: Optional[ArrayLike] = None,
    decision_map: Optional[np.ndarray] = None,
    nonlin_mask: Optional[np.ndarray] = None,
    n_classes: Optional[int] = None,
) -> MetricReport:
    """Every metric the given inputs allow."""
    report = MetricReport(rnmse_global=rnmse(A_true, A_est))
    if class_map is not None:
        report.rnmse_per_class = rnmse_per_class(A_true, A_est, class_map, n_classes)
    if Y is not None and Y_hat is not None:
        report.re_global = reconstruction_error(Y, Y_hat)
        if class_map is not None:
            report.re_per_class = reconstruction_error_per_class(Y, Y_hat, class_map)
    if decision_map is not None and nonlin_mask is not None:
        report.p_fa, report.p_d = detection_rates(decision_map, nonlin_mask)
    return report
