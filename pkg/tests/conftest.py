import numpy as np
import pytest


def random_hermitian(rng, dim, scale=1.0):
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (X + X.conj().T) / 2


def random_matrix(rng, dim, scale=1.0):
    return scale * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))


def random_density(rng, dim, rank=None):
    X = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[ACCEPTANCE]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


class Checks:
    """Collects named checks for one acceptance criterion and reports a single line."""

    def __init__(self, sink, number, title):
        self.sink, self.number, self.title = sink, number, title
        self.failed, self.notes = [], []

    def check(self, name, ok, detail="", quiet=False):
        if not ok:
            self.failed.append(f"{name} ({detail})" if detail else name)
        elif detail and not quiet:
            self.notes.append(f"{name}: {detail}")

    def finish(self):
        status = "PASS" if not self.failed else "FAIL"
        info = "; ".join(self.failed if self.failed else self.notes)
        line = f"criterion {self.number:d} {status}  {self.title}" + (f"  [{info}]" if info else "")
        self.sink.append(line)
        print(line)
        assert not self.failed, line


@pytest.fixture
def criterion(request):
    sink = request.config.stash[ACCEPTANCE]
    return lambda number, title: Checks(sink, number, title)
