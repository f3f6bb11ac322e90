import pytest

from qdr.scalars import declare_parameters


@pytest.fixture(autouse=True, scope="session")
def _params():
    declare_parameters("mu", "q")
