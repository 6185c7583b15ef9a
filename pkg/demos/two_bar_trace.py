"""Walk through the OA loop on the 2-bar truss.

Prints every outer iteration (visited catalogs, slave weight, master lower
bound) and the cut gradient, then the final design.  Run from the repository
root with ``python3 demos/two_bar_trace.py``.
"""
import numpy as np

from trussoa.cases import gen_case
from trussoa.cli import slave_options
from trussoa.driver import TrussOracle, bilevel_oa

case = gen_case("two-bar")
model, catalogs = case.to_model(), case.to_catalogs()
oracle = TrussOracle(model, catalogs, case.bounds, case.a_init(), slave_options(case))


def traced(B):
    out = oracle(B)
    names = [catalogs.names[c] for c in B.catalog_vector()]
    print(f"  slave at {names}: Psi = {out.psi:.4f} kg, a* = {np.round(out.a, 2)}")
    print(f"  dPsi/dB = {np.round(out.gradient, 3)}")
    return out


result = bilevel_oa(model, catalogs, case.b0(), case.options["epsilon"], bounds=case.bounds,
                    a_init=case.a_init(), oracle=traced)

print("\nk   U        U_min    eta")
for row in result.history:
    eta = "infeasible" if row["eta"] is None else f"{row['eta']:.4f}"
    print(f"{row['k']:<3} {row['U']:<8.4f} {row['U_min']:<8.4f} {eta}")
print(f"\nw* = {result.w_star:.4f} kg with {[catalogs.names[c] for c in result.c_star]}, "
      f"a* = {result.a_star}, termination: {result.termination}")
