"""Input validation helpers shared by the functional API and the estimators."""
import numbers

import numpy as np


def check_unit_vector(xi, dim):
    """Return ``xi`` as a float array of length ``dim`` with unit Euclidean norm.

    ``None`` means the first coordinate vector.
    """
    if xi is None:
        xi = np.zeros(dim)
        xi[0] = 1.0
        return xi
    xi = np.asarray(xi, dtype=np.float64).ravel()
    if xi.shape != (dim,):
        raise ValueError(f"xi must have {dim} components, got {xi.shape[0]}")
    norm = np.linalg.norm(xi)
    if not np.isclose(norm, 1.0, rtol=0, atol=1e-12):
        raise ValueError(f"xi must have unit norm, got |xi| = {norm:g}")
    return xi


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, numbers.Real) and float(value).is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_eps(eps, dim):
    bound = (dim - 1) / (2 * dim)
    if not 0.0 <= eps < bound:
        raise ValueError(f"eps must lie in [0, {bound:g}) for d = {dim}, got {eps}")
    return float(eps)


def check_seeds(X):
    """Accept an int, a 1-d sequence of ints or an (n, 1) array of seeds."""
    if isinstance(X, numbers.Integral):
        return np.array([int(X)], dtype=np.int64)
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d array of seeds, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("no seeds given")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError("seeds must be integers")
    return arr.astype(np.int64)
