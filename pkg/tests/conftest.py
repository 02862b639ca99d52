import pytest

from sparsedistal import predicate as P
from sparsedistal.tuplespace import certified_space


@pytest.fixture
def pow2():
    return P.power(2)


@pytest.fixture
def fib():
    return P.fibonacci()


@pytest.fixture
def example_space(pow2):
    """(2^ℕ)³₂ certified for 𝐀 = (1, 2, 4)."""
    return certified_space(P.whole(pow2), 3, 2, (1, 2, 4))


@pytest.fixture
def report(capsys):
    """Print a line that survives pytest's output capture."""
    def emit(line: str) -> None:
        with capsys.disabled():
            print("\n" + line)
    return emit
