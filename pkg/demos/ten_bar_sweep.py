"""OA on the 10-bar cantilever for the five tip-deflection limits.

Compares each optimum with the published weights and catalog vectors
(1-based in the output, as in the published table).  Takes about 15 s.
"""
import time

from trussoa.cases import gen_case
from trussoa.cli import run_case

PUBLISHED = {22: 12.988, 20: 13.996, 19: 14.570, 18: 15.175, 17: 15.912}

print(f"{'ubar':>5} {'w* (kg)':>9} {'published':>10} {'diff':>7} {'iter':>5} {'FEM':>6}  c*")
for ubar, w_pub in PUBLISHED.items():
    t = time.perf_counter()
    r = run_case(gen_case("ten-bar", ubar=ubar))
    c = "".join(str(v + 1) for v in r.c_star)
    print(f"{ubar:>5} {r.w_star:>9.3f} {w_pub:>10.3f} {100 * (r.w_star / w_pub - 1):>6.2f}% "
          f"{r.iterations:>5} {r.fem_calls:>6}  {c}  ({time.perf_counter() - t:.1f} s)")
