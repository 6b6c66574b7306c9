"""
Attention module for the MOHSA toolkit.
Overlap schedules and the overlapped multi-head attention layer.
"""

from .schedule import (
    HALF,
    SchedulePolicy,
    OverlapSchedule,
    ScheduleOverflowError,
    PolicyParseError,
    build_schedule,
    parse_policy,
    render_policy,
)
from .mohsa import (
    ALL_TARGETS,
    AttentionConfig,
    AttentionWeights,
    ShapeReport,
    attention_head,
    expected_shapes,
    mhsa_reference,
    mohsa_forward,
    parse_targets,
    render_targets,
    shape_report,
    split_heads_overlapped,
)

__all__ = [
    'HALF',
    'SchedulePolicy',
    'OverlapSchedule',
    'ScheduleOverflowError',
    'PolicyParseError',
    'build_schedule',
    'parse_policy',
    'render_policy',
    'ALL_TARGETS',
    'AttentionConfig',
    'AttentionWeights',
    'ShapeReport',
    'attention_head',
    'expected_shapes',
    'mhsa_reference',
    'mohsa_forward',
    'parse_targets',
    'render_targets',
    'shape_report',
    'split_heads_overlapped',
]
