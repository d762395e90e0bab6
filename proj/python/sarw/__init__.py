"""Python bindings for the sarw core library.

The compiled extension `_sarw` carries the actual implementations; this
package re-exports them under a stable name.
"""

from _sarw import (  # noqa: F401
    SarwError,
    __version__,
    aggregate_macro_micro,
    average_precision,
    compute_weight_map,
    db_to_linear,
    generate_synthetic_scene,
    linear_to_db,
    lr_at,
    min_max_normalize,
    sample_mask,
    weighted_dual_reconstruction_loss,
)
