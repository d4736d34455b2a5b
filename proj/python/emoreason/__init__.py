"""Zero-shot emotion detection and reasoning."""

from ._core import (
    EmoreasonError,
    aggregate_annotations,
    bertscore,
    classify,
    compute_metrics,
    evaluate,
    normalize_label,
    parse_output,
    reason,
    render_baseline_prompt,
    render_context_prompt,
    render_emotion_prompt,
    select_top_k,
    vote_majority,
)

__all__ = [
    "EmoreasonError",
    "aggregate_annotations",
    "bertscore",
    "classify",
    "compute_metrics",
    "evaluate",
    "normalize_label",
    "parse_output",
    "reason",
    "render_baseline_prompt",
    "render_context_prompt",
    "render_emotion_prompt",
    "select_top_k",
    "vote_majority",
]
