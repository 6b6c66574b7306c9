"""
Parameter and multiply-accumulate accounting for ViT + MOHSA configs.
Closed-form counts, derived from the config alone, so they can be checked
against the arrays that init_weights actually allocates.
"""

from typing import List, NamedTuple, Optional, Sequence

from config.settings import ConfigurationError
from src.attention import render_targets
from src.models.vit import ModelConfig

CSV_HEADER = "model,policy,targets,image_size,params,macs,params_m,gmacs"


class CostItem(NamedTuple):
    component: str
    params: int
    macs: int


class CostReport(NamedTuple):
    """Totals plus the per-component breakdown they are summed from."""
    params: int
    macs: int
    image_size: int
    breakdown: List[CostItem]


def format_millions(count: int) -> str:
    return f"{count / 1e6:.1f}M"


def format_giga(count: int) -> str:
    return f"{count / 1e9:.1f}G"


def _tokens(cfg: ModelConfig, image_size: int) -> int:
    if image_size < 1 or image_size % cfg.patch_size:
        raise ConfigurationError(f"patch_size {cfg.patch_size} does not divide image_size {image_size}")
    return (image_size // cfg.patch_size) ** 2


def _attention_params(cfg: ModelConfig, layer: int) -> int:
    att = cfg.attention_config(layer)
    d = cfg.dim
    count = d * 3 * d + att.proj_in * d
    if att.qkv_bias:
        count += 3 * d
    if att.proj_bias:
        count += d
    return count


def _attention_macs(cfg: ModelConfig, layer: int, tokens: int) -> int:
    att = cfg.attention_config(layer)
    d, h, t = cfg.dim, cfg.heads, tokens
    return (t * d * 3 * d
            + h * t * t * att.qk_width
            + h * t * t * att.v_width
            + t * att.proj_in * d)


def cost_report(cfg: ModelConfig, image_size: Optional[int] = None) -> CostReport:
    """Params (image-size independent except for the position table) and MACs at `image_size`."""
    image_size = image_size or cfg.image_size
    patches = _tokens(cfg, image_size)
    tokens = patches + 1
    d, hid, classes = cfg.dim, cfg.hidden_dim, cfg.num_classes
    norm = 2 * d

    items = [CostItem(
        "embed",
        cfg.patch_dim * d + d + d + cfg.num_tokens * d,
        patches * cfg.patch_dim * d,
    )]
    for layer in range(cfg.depth):
        items.append(CostItem(
            f"layer {layer + 1} attention",
            norm + _attention_params(cfg, layer),
            _attention_macs(cfg, layer, tokens),
        ))
        items.append(CostItem(
            f"layer {layer + 1} ffn",
            norm + d * hid + hid + hid * d + d,
            2 * tokens * d * hid,
        ))
    items.append(CostItem("head", norm + d * classes + classes, d * classes))

    return CostReport(
        params=sum(item.params for item in items),
        macs=sum(item.macs for item in items),
        image_size=image_size,
        breakdown=items,
    )


def count_params(cfg: ModelConfig) -> int:
    return cost_report(cfg).params


def estimate_flops(cfg: ModelConfig, image_size: Optional[int] = None) -> int:
    """MACs of one forward pass; softmax, norms and activations are not counted."""
    return cost_report(cfg, image_size).macs


def render_report(report: CostReport, title: str = "", detailed: bool = True) -> str:
    """Aligned text table of a CostReport."""
    width = max([len(item.component) for item in report.breakdown] + [len("total")])
    lines = [title] if title else []
    lines.append(f"{'component':<{width}}  {'params':>12}  {'MACs':>16}")
    if detailed:
        for item in report.breakdown:
            lines.append(f"{item.component:<{width}}  {item.params:>12,}  {item.macs:>16,}")
    lines.append(f"{'total':<{width}}  {report.params:>12,}  {report.macs:>16,}")
    lines.append(f"{'':<{width}}  {format_millions(report.params):>12}  {format_giga(report.macs):>16}")
    return "\n".join(lines)


def csv_row(name: str, cfg: ModelConfig, report: CostReport) -> str:
    return ",".join([
        name,
        cfg.policy,
        render_targets(cfg.attention_config(0).targets),
        str(report.image_size),
        str(report.params),
        str(report.macs),
        f"{report.params / 1e6:.1f}",
        f"{report.macs / 1e9:.1f}",
    ])


def render_variant_table(rows: Sequence[tuple]) -> str:
    """(label, CostReport) pairs as a Params / FLOPs table in the ablation-table layout."""
    width = max([len(label) for label, _ in rows] + [len("variant")])
    lines = [f"{'variant':<{width}}  {'Params':>8}  {'FLOPs':>8}"]
    for label, report in rows:
        lines.append(f"{label:<{width}}  {format_millions(report.params):>8}  {format_giga(report.macs):>8}")
    return "\n".join(lines)
