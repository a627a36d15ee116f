"""Ablation driver: train named variants over several seeds and report
per-variant metric means and standard deviations.

A variant is a (name, overrides) pair; overrides are TrainConfig fields.
The report is a plain dict so it serializes to JSON as-is, and
render_report turns it into an aligned text table for terminals.
"""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from ..core.types import ValidationError
from ..mixing import SOURCE_TO_TARGET
from .train import TrainConfig, config_from_mapping, train

METRIC_KEYS = ("miou", "msq", "mrq", "mpq", "map")

DEFAULT_SEEDS = (1, 2, 3)


def default_grid() -> list[tuple[str, dict]]:
    """The standard comparison: mixing semantics only, plus instance
    mixing in both paste directions, plus embedding alignment, plus both."""
    return [
        ("baseline", {}),
        ("imix_t2s", {"use_imix": True}),
        ("imix_s2t", {"use_imix": True, "imix_direction": SOURCE_TO_TARGET}),
        ("cda", {"use_cda": True}),
        ("full", {"use_imix": True, "use_cda": True}),
    ]


def run_ablation(variants: list[tuple[str, dict]] | None = None,
                 seeds: tuple[int, ...] = DEFAULT_SEEDS,
                 base: TrainConfig | None = None,
                 progress=None) -> dict:
    """Train every variant at every seed and collect final held-out metrics.

    `progress`, if given, is called with (variant_name, seed) before each
    run so callers can log long sweeps.
    """
    variants = default_grid() if variants is None else variants
    base = base or TrainConfig()
    if not seeds:
        raise ValidationError("at least one seed required")
    names = [name for name, _ in variants]
    if len(set(names)) != len(names):
        raise ValidationError("variant names must be unique")

    report = {"base": asdict(base), "seeds": list(seeds), "variants": []}
    for name, overrides in variants:
        runs = []
        for seed in seeds:
            if progress is not None:
                progress(name, seed)
            cfg = config_from_mapping({**overrides, "seed": seed}, base)
            result = train(cfg)
            metrics = {k: float(result.final_metrics.get(k, 0.0))
                       for k in METRIC_KEYS}
            runs.append({"seed": seed, **metrics})
        mean = {k: float(np.mean([r[k] for r in runs])) for k in METRIC_KEYS}
        std = {k: float(np.std([r[k] for r in runs])) for k in METRIC_KEYS}
        report["variants"].append({
            "name": name,
            "overrides": dict(overrides),
            "runs": runs,
            "mean": mean,
            "std": std,
        })
    return report


def render_report(report: dict) -> str:
    """Aligned text table of mean +/- std per variant and metric."""
    rows = [["variant"] + list(METRIC_KEYS)]
    for var in report["variants"]:
        row = [var["name"]]
        for k in METRIC_KEYS:
            row.append(f"{var['mean'][k]:.4f} +/- {var['std'][k]:.4f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(f"seeds: {', '.join(str(s) for s in report['seeds'])}")
    return "\n".join(lines) + "\n"
