import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ergmbayes.datasets import dataset_paths, load_dixon, load_lazega  # noqa: E402


@pytest.fixture(scope="session")
def lazega_graph():
    """Real law-firm collaboration network; skips when not supplied."""
    if dataset_paths("lazega", "lazega.edges", "lazega_attrs.csv") is None:
        pytest.skip("real lazega dataset not supplied; see "
                    "ergmbayes.datasets.build_lazega_from_source and README "
                    "('External datasets')")
    return load_lazega()


@pytest.fixture(scope="session")
def dixon_graph():
    """Simulated directed high-school network; skips when not supplied."""
    if dataset_paths("dixon", "dixon.edges", "dixon_attrs.csv") is None:
        pytest.skip("dixon dataset not supplied; see the ergmbayes.datasets "
                    "module docstring for the R export recipe")
    return load_dixon()
