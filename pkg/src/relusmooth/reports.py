"""Report emission: tab-separated records plus an aligned text table."""

from __future__ import annotations

from .harness import EvaluationRow
from .spectral import DecayRow

EVALUATION_COLUMNS = (
    "attack",
    "sampler",
    "radius",
    "directions",
    "aggregation",
    "epsilon",
    "miss_k",
    "clean_top1",
    "attacked_top1",
    "defended_clean_top1",
    "defended_attacked_top1",
    "clean_topk",
    "attacked_topk",
    "defended_clean_topk",
    "defended_attacked_topk",
    "defence_rate",
    "adv_count",
    "seeds",
)

DECAY_COLUMNS = ("omega", "omega_norm", "spectrum_mag", "averaged_mag")


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, tuple):
        return ",".join(f"{v:.6g}" for v in value)
    return str(value)


def evaluation_tsv(rows: list[EvaluationRow]) -> str:
    lines = ["\t".join(EVALUATION_COLUMNS)]
    for row in rows:
        lines.append("\t".join(_fmt(getattr(row, col)) for col in EVALUATION_COLUMNS))
    return "\n".join(lines) + "\n"


def decay_tsv(rows: list[DecayRow], header_notes: dict | None = None) -> str:
    lines = [f"# {k} = {_fmt(v)}" for k, v in (header_notes or {}).items()]
    lines.append("\t".join(DECAY_COLUMNS))
    for row in rows:
        lines.append("\t".join(_fmt(getattr(row, col)) for col in DECAY_COLUMNS))
    return "\n".join(lines) + "\n"


def aligned_table(rows, columns) -> str:
    """Fixed-width text table for terminals."""
    cells = [list(columns)]
    for row in rows:
        cells.append([_fmt(getattr(row, col)) for col in columns])
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    out = []
    for idx, r in enumerate(cells):
        out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        if idx == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


EVALUATION_TABLE_COLUMNS = (
    "attack",
    "sampler",
    "radius",
    "directions",
    "clean_top1",
    "attacked_top1",
    "defended_clean_top1",
    "defended_attacked_top1",
    "defence_rate",
    "adv_count",
)


def evaluation_table(rows: list[EvaluationRow]) -> str:
    return aligned_table(rows, EVALUATION_TABLE_COLUMNS)


def decay_table(rows: list[DecayRow]) -> str:
    return aligned_table(rows, DECAY_COLUMNS)
