import pytest

from aeromesh.link_model import default_params


@pytest.fixture(scope="session")
def p():
    return default_params()
