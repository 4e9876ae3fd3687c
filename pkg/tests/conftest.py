import pytest

from awpctc.ctc import log_softmax
from awpctc.text_metrics import Vocabulary


@pytest.fixture
def cat_vocab():
    # ids: 0 blank, 1 a, 2 c, 3 e, 4 h, 5 t, 6 space
    return Vocabulary.from_tokens(list("aceht") + [" "])


def random_logprobs(rng, T, V, scale=1.5):
    return log_softmax(rng.normal(scale=scale, size=(T, V)))


def random_target(rng, T, V, max_len, blank_id=0):
    """Random non-blank target that fits in T frames."""
    from awpctc.ctc import min_frames
    while True:
        U = int(rng.integers(0, max_len + 1))
        y = [int(x) for x in rng.integers(1, V, size=U)] if V > 1 else []
        if min_frames(y) <= T:
            return y


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
