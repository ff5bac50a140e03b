"""Schedule files and the shipped presets.

A schedule file is a JSON object with the PruneSchedule fields verbatim
(see FORMATS.md).  The four presets carry the published per-stage retention
ratios for a 576-token, 32-layer model at overall pruning rates 66.7%,
77.8%, 88.9% and 94.4%, with stage placement l_s=2 / l_d=22, clustering
cutoff d_c=8 and spatial threshold tau=0.6.
"""

from __future__ import annotations

import json
import math

from .types import ModelDims, PruneSchedule

_PRESET_RATIOS = {
    "p667": (0.5000, 0.4394, 0.0879),
    "p778": (0.4000, 0.2869, 0.0574),
    "p889": (0.3000, 0.1343, 0.0269),
    "p944": (0.2500, 0.0581, 0.0116),
}

PRESET_NAMES = tuple(sorted(_PRESET_RATIOS))

REFERENCE_DEPTH = 32


def preset(name: str, model: ModelDims | None = None) -> PruneSchedule:
    """Build one of the named preset schedules.

    Passing a model with a different layer count rescales the stage
    placement proportionally (round-half-up), since the published l_s/l_d
    are stated for 32-layer models.
    """
    if name not in _PRESET_RATIOS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    pi1, pi2, pi3 = _PRESET_RATIOS[name]
    model = model or ModelDims(m=576, d=4096, n_layers=32)
    l_s, l_d = scaled_placement(model.n_layers)
    return PruneSchedule(pi1=pi1, pi2=pi2, pi3=pi3, l_s=l_s, l_d=l_d, model=model)


def scaled_placement(n_layers: int, l_s: int = 2, l_d: int = 22) -> tuple[int, int]:
    """Scale the reference stage layers to a model of different depth."""
    if n_layers == REFERENCE_DEPTH:
        return l_s, l_d
    scale = n_layers / REFERENCE_DEPTH

    def _place(layer: int) -> int:
        return max(1, min(n_layers, int(layer * scale + 0.5)))

    s, d = _place(l_s), _place(l_d)
    if s >= d:
        raise ValueError(f"cannot place both pruning layers in a {n_layers}-layer model")
    return s, d


def validate_schedule(schedule: PruneSchedule) -> list[str]:
    """Check schedule invariants; empty list means the schedule is usable."""
    bad: list[str] = []
    s = schedule
    m = s.model.m
    for name, value in (("pi1", s.pi1), ("pi2", s.pi2), ("pi3", s.pi3)):
        if not 0.0 < value <= 1.0:
            bad.append(f"{name}: {value} outside (0, 1]")
    if not s.pi1 >= s.pi2 >= s.pi3:
        bad.append(f"ratios must be non-increasing: {s.pi1} >= {s.pi2} >= {s.pi3} fails")
    if not 1 <= s.l_s < s.l_d <= s.model.n_layers:
        bad.append(f"layers: need 1 <= l_s < l_d <= {s.model.n_layers}, got {s.l_s}, {s.l_d}")
    if s.d_c <= 0:
        bad.append(f"d_c: {s.d_c} must be positive")
    if s.tau <= 0:
        bad.append(f"tau: {s.tau} must be positive")
    if not 0.0 < s.alpha <= 1.0:
        bad.append(f"alpha: {s.alpha} outside (0, 1]")
    if m * s.pi1 < 1:
        bad.append(f"pi1: floor({m} * {s.pi1}) < 1 token")
    if m * s.pi3 < 1:
        bad.append(f"pi3: floor({m} * {s.pi3}) < 1 token")
    k1, b, _ = s.stage_targets()
    if b < k1:
        # Stage II actually prunes: the elite budget must be positive.
        n_centers = math.ceil(k1 * s.alpha)
        if b <= n_centers:
            bad.append(
                f"stage II budget {b} must exceed the ceil({k1} * {s.alpha}) "
                f"= {n_centers} cluster centers"
            )
    return bad


def load_schedule(source: str) -> PruneSchedule:
    """Load a schedule from a preset name or a JSON file path."""
    if source in _PRESET_RATIOS:
        schedule = preset(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            schedule = PruneSchedule.from_dict(json.load(fh))
    bad = validate_schedule(schedule)
    if bad:
        raise ValueError(f"invalid schedule {source!r}: " + "; ".join(bad))
    return schedule


def save_schedule(schedule: PruneSchedule, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
