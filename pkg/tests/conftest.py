import pytest

from peftbo import space


@pytest.fixture
def bert():
    return space.bert_base_space()


@pytest.fixture
def tiny():
    """2-layer space with a 3-level grid: 108 configurations."""
    return space.SearchSpaceSpec(
        num_layers=2, hidden_dim=768, size_grid=(0, 1, 768), base_param_count=109_482_240
    )


@pytest.fixture
def reference_config():
    """Known 5-layer configuration used as the arithmetic fixture."""
    return space.Configuration.from_dict(
        {"layers": [3, 4, 8, 9, 10], "d_sa": 12, "d_pa": 96, "l_pt": 1}, 12
    )
