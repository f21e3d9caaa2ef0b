import sys
from pathlib import Path

import pytest

from excuse_guide import data_path
from excuse_guide.pddl import parse_domain, parse_problem
from excuse_guide.planning import ground

sys.path.insert(0, str(Path(__file__).parent))

SCENARIOS = {
    # name: (robot domain, human domain, problem)
    "kitchen1": ("kitchen1_robot", "kitchen1_human", "kitchen1"),
    "kitchen2": ("kitchen2_robot", "kitchen2_human", "kitchen2"),
    "kitchen2-variant": ("kitchen1_robot", "kitchen2_human", "kitchen2"),
}


def load_domain(name):
    return parse_domain(data_path(name + ".pddl").read_text())


def load_scenario(name):
    robot_name, human_name, problem_name = SCENARIOS[name]
    robot, human = load_domain(robot_name), load_domain(human_name)
    problem = parse_problem(data_path(problem_name + ".pddl").read_text(), robot)
    return robot, human, problem


@pytest.fixture(scope="session")
def kitchen1():
    return load_scenario("kitchen1")


@pytest.fixture(scope="session")
def kitchen2():
    return load_scenario("kitchen2")


@pytest.fixture(scope="session")
def variant():
    return load_scenario("kitchen2-variant")


def tasks(scenario):
    robot, human, problem = scenario
    return ground(robot, problem), ground(human, problem)


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {name} ({detail})")
