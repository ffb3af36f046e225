import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_operator(rng, hermitian=False):
    m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    return (m + m.conj().T) / 2 if hermitian else m


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Append ``(ok, line)``; the line is printed immediately and again in the summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def log(ok, text):
        line = f"{'PASS' if ok else 'FAIL'} {text}"
        lines.append(line)
        print(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
