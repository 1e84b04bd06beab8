import numpy as np
import pytest
from hypothesis import settings

from oracles import TOY
from wrnn import models

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def toy_params():
    """TOY as a wrnn parameter dict."""
    p = {"embedding": np.array(TOY["embedding"], dtype=float), "pool.w": np.array(TOY["w"])}
    for n in ("W_f", "W_g", "W_c", "W_o", "b_f", "b_g", "b_c", "b_o"):
        p["lstm." + n] = np.array(TOY[n], dtype=float)
    for n in ("W_1", "b_1", "W_out", "b_out"):
        p["head." + n] = np.array(TOY[n], dtype=float)
    return p


def toy_spec(candidate="tanh"):
    return models.ModelSpec(kind="wrnn", seq_len=3, vocab_size=5, embed_dim=2, lstm_hidden=2,
                            hidden=2, n_classes=2, candidate=candidate)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
