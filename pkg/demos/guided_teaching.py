"""
Guided versus unguided teaching
===============================

A simulated demonstrator plans in its own (human) domain. In the guided
session it only shows how to bring about the excuse. In the unguided session
it shows the whole task. Both sessions learn operators from the
demonstration, merge them into the robot domain and plan again.
"""

import tempfile
from pathlib import Path

from excuse_guide import SessionConfig, data_path, run_guided_session, run_unguided_session
from excuse_guide.metrics import format_table

SCENARIOS = {
    "kitchen1": ("kitchen1_robot.pddl", "kitchen1_human.pddl", "kitchen1.pddl"),
    "kitchen2": ("kitchen2_robot.pddl", "kitchen2_human.pddl", "kitchen2.pddl"),
    "kitchen2-variant": ("kitchen1_robot.pddl", "kitchen2_human.pddl", "kitchen2.pddl"),
}

out = Path(tempfile.mkdtemp(prefix="guided-"))
rows = []
for name, (robot, human, problem) in SCENARIOS.items():
    cfg = SessionConfig(data_path(robot), data_path(problem), data_path(human), out=out / name)
    guided = run_guided_session(cfg)
    unguided = run_unguided_session(cfg)

    demo = guided.find("demonstration")
    print(f"{name}: excuse {guided.find('excuse')['rendered']}")
    print("   guided demo:  ", [s["label"] for s in demo["steps"]])
    print("   unguided demo:", unguided.find("demonstration")["length"], "steps")
    print("   learned:", guided.find("learned")["new"])
    print(f"   useful fraction {guided.report.useful_fraction:.2f} guided vs "
          f"{unguided.report.useful_fraction:.2f} unguided")

    lengths = guided.report.demo_lengths
    rows.append({"scenario": name, "e_min": lengths["demo"], "g_r": lengths["full"],
                 "f1": guided.report.f1_savings, "post_demo": guided.report.post_demo.solvable})

# %%
# The merged domain is what a robot would load next time.
print(format_table(rows))
print("merged domain for kitchen1:", out / "kitchen1" / "merged_domain.pddl")
print((out / "kitchen1" / "merged_domain.pddl").read_text().split("(:action open-drawer")[1][:400])
