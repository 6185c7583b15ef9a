"""FEM calls of OA against the size of the categorical space.

Runs the scalable cantilever for 1 to ``MAX_BLOCKS`` blocks and prints the
number of FEM evaluations next to ``p**n``, the number of slave problems an
enumeration would solve.  Six blocks take a few minutes on one core.
"""
import sys

import numpy as np

from trussoa.cases import gen_case
from trussoa.cli import run_case

MAX_BLOCKS = int(sys.argv[1]) if len(sys.argv) > 1 else 4

ns, fems = [], []
print(f"{'bars':>5} {'w* (kg)':>9} {'NLP':>5} {'FEM':>7} {'p^n':>12}")
for blocks in range(1, MAX_BLOCKS + 1):
    case = gen_case("cantilever", blocks=blocks)
    r = run_case(case)
    ns.append(case.n_bars)
    fems.append(r.fem_calls)
    print(f"{case.n_bars:>5} {r.w_star:>9.3f} {r.nlp_solves:>5} {r.fem_calls:>7} {case.p ** case.n_bars:>12}")
if len(ns) > 1:
    slope = np.polyfit(ns, np.log(fems), 1)[0]
    print(f"\nslope of log(FEM) per bar: {slope:.3f} (enumeration: log p = {np.log(case.p):.3f})")
