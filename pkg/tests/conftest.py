import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_small_sample_warning():
    """Many tests deliberately use short series; the below-recommended-sample
    warning is asserted explicitly where it matters."""
    with warnings.catch_warnings():
        warnings.filterwarnings(
            "ignore", message=r"sample of \d+ observations is below", category=RuntimeWarning
        )
        yield
