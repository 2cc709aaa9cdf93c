import numpy as np
import pytest

from squishgen import SquishPattern, remove_redundant_lines


def canonical_equal(a: SquishPattern, b: SquishPattern) -> bool:
    """Exact equality of two squish patterns after redundant-line removal."""
    ca, cb = remove_redundant_lines(a), remove_redundant_lines(b)
    return (
        np.array_equal(ca.topology, cb.topology)
        and np.array_equal(ca.delta_x, cb.delta_x)
        and np.array_equal(ca.delta_y, cb.delta_y)
    )


@pytest.fixture
def rules_2048():
    from squishgen import RuleSet

    return RuleSet(space_min=100, width_min=100, area_min=10**4, area_max=2048**2, window=2048)
