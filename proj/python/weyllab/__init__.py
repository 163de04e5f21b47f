"""Python access to the weyllab numerical core."""

import json

from ._core import (
    InputError,
    NumericalError,
    eigenvalue_count,
    invariants,
    recurrence_grid,
    remainder_exponent_fit,
    return_map,
    sphere3_count,
    torus_count,
    verify_bound,
    weyl_leading,
    weyl_series,
)
from ._core import Model as _Model
from ._core import plan_json as _plan_json

__all__ = [
    "InputError",
    "NumericalError",
    "model",
    "plan",
    "eigenvalue_count",
    "invariants",
    "recurrence_grid",
    "remainder_exponent_fit",
    "return_map",
    "sphere3_count",
    "torus_count",
    "verify_bound",
    "weyl_leading",
    "weyl_series",
]


def model(descriptor):
    """Build a model from a descriptor dict such as {"kind": "torus"}."""
    return _Model(json.dumps(descriptor))


def plan(cls, h, order=1, ell=0.01, lambda_max=None, c=1.0):
    """Parameter plan (delta, eps, T, predicted bound) for a model class."""
    return json.loads(_plan_json(cls, order=order, h=h, ell=ell, lambda_max=lambda_max, c=c))
