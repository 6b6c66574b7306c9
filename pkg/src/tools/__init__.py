"""
Tools module for the MOHSA toolkit.
Cost accounting, scalar-loop oracles with gradient checks, and curve plotting.
"""

from .accounting import CostItem, CostReport, count_params, estimate_flops, cost_report, format_giga, format_millions
from .oracle import (
    GradcheckFailure,
    SweepSpec,
    SWEEPS,
    finite_diff,
    naive_attention,
    naive_mohsa,
    naive_vit_forward,
    relative_error,
)
from .plotting import render_curves

__all__ = [
    'CostItem',
    'CostReport',
    'count_params',
    'estimate_flops',
    'cost_report',
    'format_giga',
    'format_millions',
    'GradcheckFailure',
    'SweepSpec',
    'SWEEPS',
    'finite_diff',
    'naive_attention',
    'naive_mohsa',
    'naive_vit_forward',
    'relative_error',
    'render_curves',
]
