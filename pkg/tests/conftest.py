import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hivecote.ts_data import LabeledSeriesSet

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


def make_set(n=20, m=30, c=2, seed=0, name="toy"):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % c
    X = rng.normal(size=(n, m)) + y[:, None]
    return LabeledSeriesSet(X, y, c, tuple(f"c{i}" for i in range(c)), name)


@pytest.fixture
def toy_set():
    return make_set()


def small_hc_config(seed=0, **changes):
    """HIVE-COTE with small components, for tests that build whole ensembles."""
    from hivecote.boss import CBossConfig
    from hivecote.hive_cote import HiveCoteConfig
    from hivecote.rise import RiseConfig
    from hivecote.stc import StcConfig
    from hivecote.tsf import TsfConfig

    base = dict(
        seed=seed,
        cv_folds=3,
        tsf=TsfConfig(tree_count=15),
        rise=RiseConfig(tree_count=8),
        cboss=CBossConfig(max_ensemble_size=3, parameter_samples=6),
        stc=StcConfig(max_shapelets=30, budget_schedule=(40, 40), tree_count=8),
    )
    base.update(changes)
    return HiveCoteConfig(**base)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
