"""
When the demonstration satisfies the excuse but still leaves the robot stuck
============================================================================

The Kitchen II excuse is "Clear PinkDrawer": get the chair out of the way.
In the shipped adversarial trace the demonstrator does clear the drawer, but
parks the chair in the aisle, which is the only way to the plate.
"""

from excuse_guide import data_path, generate_excuse, ground, parse_domain, parse_problem, read_trace
from excuse_guide.metrics import check_misdirected

robot = parse_domain(data_path("kitchen2_robot.pddl").read_text())
problem = parse_problem(data_path("kitchen2.pddl").read_text(), robot)
task = ground(robot, problem)
excuse = generate_excuse(task).excuse

trace = read_trace(data_path("kitchen2_misdirected.jsonl").read_text())
for step in trace.steps:
    print(step.label, "+", sorted(map(str, step.adds)), "-", sorted(map(str, step.dels)))

verdict = check_misdirected(task, excuse, trace.final)
print(verdict.status.value)
print(verdict.diagnosis)

# the same demonstration, but leaving the aisle free, is fine
fixed = trace.final | {a for a in trace.initial if str(a) == "(free aisle)"}
print(check_misdirected(task, excuse, fixed).status.value)
