"""Shared fixtures plus the acceptance-criteria summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from vtprune import ActivationBundle, BundleMeta


def make_bundle(
    m: int = 576,
    d_feat: int = 16,
    h_enc: int = 2,
    h_llm: int = 2,
    d_head: int = 8,
    layers: tuple[int, ...] = (2, 22),
    n_layers: int = 32,
    d: int = 4096,
    seed: int = 0,
    with_text_attention: bool = False,
) -> ActivationBundle:
    """Well-formed synthetic bundle with float32 storage tensors."""
    rng = np.random.default_rng(seed)
    grid = max(1, int(round(m ** 0.5)))
    rows, cols = np.divmod(np.arange(m), grid)
    positions = np.stack([(rows % grid + 0.5) / grid, (cols % grid + 0.5) / grid], axis=1)
    meta = BundleMeta(
        model="synthetic",
        m=m,
        d=d,
        n_layers=n_layers,
        h_enc=h_enc,
        h_llm=h_llm,
        d_head=d_head,
        layers=tuple(layers),
    )
    text_attention = {}
    if with_text_attention:
        text_attention = {
            layers[0]: rng.uniform(0.0, 1.0, (h_llm, m)).astype(np.float32)
        }
    return ActivationBundle(
        token_features=rng.normal(0.0, 2.0, (m, d_feat)).astype(np.float32),
        token_positions=positions.astype(np.float32),
        cls_attention=rng.dirichlet(np.ones(m), size=h_enc).astype(np.float32),
        key_vectors={
            layer: rng.normal(0.0, 1.0, (h_llm, m, d_head)).astype(np.float32)
            for layer in layers
        },
        meta=meta,
        text_attention=text_attention,
    )


@pytest.fixture
def small_bundle() -> ActivationBundle:
    return make_bundle(m=64, d_feat=8, seed=3)


@pytest.fixture
def llava_bundle() -> ActivationBundle:
    return make_bundle(m=576, d_feat=16, seed=0)


# --- acceptance summary -----------------------------------------------------

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in item.nodeid:
        _ACCEPTANCE_RESULTS.append((item.name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        status = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"{status}  {name}")
