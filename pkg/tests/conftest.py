import shutil

import pytest

from parasynth.indexed import parse_spec

ARBITER = """
input r;
output g;
guarantee forall i != j . G !(g_i & g_j);
guarantee forall i . G (r_i -> F g_i);
"""

GRANTING = """
input r;
output g;
guarantee forall i . G (r_i -> F g_i);
"""

needs_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 executable not found")


@pytest.fixture
def arbiter():
    return parse_spec(ARBITER)


@pytest.fixture
def granting():
    return parse_spec(GRANTING)
