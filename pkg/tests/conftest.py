import numpy as np
import pytest

from privsense.main import main
from privsense.models import FsgParams
from privsense.services import fsg


@pytest.fixture
def rng():
    """
    A seeded numpy generator, so random property checks are reproducible.
    """
    return np.random.default_rng(20240611)


@pytest.fixture
def random_blocks(rng):
    """
    Draws valid isothermal FSG blocks with moderate squeezing.
    Returns (params, blocks).
    """
    def _draw(max_modes=6, max_nth=5.0, max_squeeze=1.0):
        params = FsgParams(
            M=int(rng.integers(2, max_modes + 1)),
            n_th=float(rng.uniform(0.0, max_nth)),
            s=float(rng.uniform(-max_squeeze, max_squeeze)),
            t=float(rng.uniform(-max_squeeze, max_squeeze)),
        )
        return params, fsg.blocks_from_params(params)

    return _draw


@pytest.fixture
def run_cli(capsys):
    """
    Runs the command line in-process and returns (exit_code, stdout, stderr).
    """
    def _run(*argv):
        code = main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return _run
