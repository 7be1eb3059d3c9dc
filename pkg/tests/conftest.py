import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polarforming.channel import ChannelSpec, sample_instance

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def make_instance(seed, num_paths=3, rician_db=0.0, inverse_xpd=1.0, wavelength=1.0):
    spec = ChannelSpec(wavelength=wavelength, num_paths=num_paths, inverse_xpd=inverse_xpd,
                       rician_factor_db=rician_db)
    return sample_instance(spec, np.random.default_rng(seed))


def random_point(rng, half=0.5):
    return np.array([rng.uniform(-half, half), rng.uniform(-half, half),
                     rng.uniform(0, 2 * np.pi)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> (passed, detail); filled by test_acceptance and echoed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}")
