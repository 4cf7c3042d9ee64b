import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "musb",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "musb"))

MU_GRID = (-0.4, -0.1, 0.0, 0.5, 1.0, 3.0)
T_GRID = (0.25, 1.0, 4.0)

# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
