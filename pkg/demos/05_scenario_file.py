"""Write a scenario file, load it, and run it like the CLI would.

A small circle around the pole of RP^2, times the fiber circle.  Nothing
twists along it, so every crossing parity must come out even.
"""

import pathlib
import tempfile

from folicheck.report import check_expectations, run_check
from folicheck.scenarios import dump_scenario, load_scenario

TEXT = """
[scenario]
id = polar_cap
[model]
space = product
factors = circle:s:fiber, rp2:base
[foliation]
id = circle_fibers
[embedding]
domain = torus
params = a, t
s = a
u1 = r*cos(2*pi*t); u2 = r*sin(2*pi*t); u3 = sqrt(1 - r^2)
r = 0.3
[perturbation]
eps = 0.05
seed = 2
[expect]
crossing_parity.Sigma = 0
crossing_parity.gamma = 0
"""

sc = load_scenario(TEXT)
path = pathlib.Path(tempfile.mkdtemp()) / "polar_cap.scn"
path.write_text(dump_scenario(sc))
print(path.read_text())

rep = run_check(sc)
print("curves:", rep.data["curve_count"], "| parities:", rep.data["crossing_parity"])
print("expectation mismatches:", check_expectations(sc.expected, rep.data))
print(f"same thing from the shell:  folicheck check {path}")
