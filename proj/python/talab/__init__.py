"""Finite-precision tensor attention toolkit."""

from ._core import (
    FloatP,
    Model,
    TalabError,
    attention_layer,
    audit,
    builtin_monoids,
    closure_decide,
    compare,
    depth_audit_csv,
    evaluate,
    exp_approx,
    floor,
    fp_audit,
    from_double,
    gen_dataset,
    int_div_special,
    iter_add,
    iter_mul,
    layer_norm,
    linked_pairs,
    membership_decide,
    monoid_eval,
    monoid_size,
    reference_depth,
    sin_cos,
    sqrt_approx,
    swap_check,
    theta_schedule,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
