"""
Why can't the robot put the plate away?
=======================================

The robot in the kitchen knows how to walk, pick things up, put them in an
open drawer and close it. It was never taught to open the drawer. Here we
ask the planner for a plan, watch it fail, and then ask for an excuse: the
smallest change to the world after which a plan would exist.
"""

from excuse_guide import data_path, generate_excuse, ground, parse_domain, parse_problem, prove_unsolvable
from excuse_guide.excuses import enumerate_minimal_excuses, rank_excuses, render_excuse


def load(robot, problem, human=None):
    r = parse_domain(data_path(robot).read_text())
    p = parse_problem(data_path(problem).read_text(), r)
    h = parse_domain(data_path(human).read_text()) if human else None
    return r, p, h


robot, problem, human = load("kitchen1_robot.pddl", "kitchen1.pddl", "kitchen1_human.pddl")
task = ground(robot, problem)
print(f"{len(task.atoms)} fluents, {len(task.actions)} ground actions")

# no plan: the drawer cannot be opened, and the relaxation already shows it
verdict = prove_unsolvable(task)
print(verdict.status.value, "-", verdict.certificate.describe())

# the excuse is what the human should demonstrate
result = generate_excuse(task)
print("excuse:", "; ".join(render_excuse(result.excuse)))
for line in render_excuse(result.excuse, "full-diff"):
    print("   ", line)
print("with the excuse in place the robot would do:")
for step in result.excuse.witness.steps:
    print("   ", step.label)

# %%
# Kitchen II: the drawer is blocked by a chair and the robot has no chair action.
# In the variant the robot also cannot open drawers, so two things must change.
for robot_file in ("kitchen2_robot.pddl", "kitchen1_robot.pddl"):
    r, p, h = load(robot_file, "kitchen2.pddl", "kitchen2_human.pddl")
    t = ground(r, p)
    excuses = enumerate_minimal_excuses(t)
    print(robot_file, "->", [render_excuse(e) for e in excuses])

    # rank by how long the human demonstration would be
    for ranked in rank_excuses(excuses, ground(h, p)):
        print("    demonstrate in", ranked.predicted_length, "steps:", render_excuse(ranked.excuse))
