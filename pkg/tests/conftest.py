import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=200,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def report(capsys):
    """Print one line to the terminal, bypassing output capture."""

    def _report(line: str) -> None:
        with capsys.disabled():
            print(f"\n{line}")

    return _report
