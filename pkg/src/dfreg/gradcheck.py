"""Finite-difference gradient verification.

gradient_check probes every coordinate of x with central differences and
compares against the analytic gradient returned by f. The relative error
uses max(|analytic|, |numeric|, 1e-8) in the denominator so that exact
zeros on both sides report 0 rather than dividing by zero.
"""

import numpy as np

from .errors import NumericError, ShapeError


def gradient_check(f, x, h: float = 1e-5) -> float:
    """Return the max relative error between analytic and numeric gradients.

    f maps an ndarray to (value, grad) where value is a scalar and grad has
    the shape of x.
    """
    x = np.array(x, dtype=np.float64)
    _, grad = f(x)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x.shape:
        raise ShapeError(
            f"gradient_check: grad shape {grad.shape} does not match x shape {x.shape}"
        )
    max_rel = 0.0
    for i in range(x.size):
        xp = x.copy()
        xp.flat[i] += h
        fp = float(f(xp)[0])
        xm = x.copy()
        xm.flat[i] -= h
        fm = float(f(xm)[0])
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(
                f"gradient_check: non-finite probe value at flat coordinate {i}"
            )
        numeric = (fp - fm) / (2.0 * h)
        analytic = grad.flat[i]
        rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)
        if rel > max_rel:
            max_rel = rel
    return float(max_rel)
