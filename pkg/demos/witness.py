"""Two models that agree on the data but disagree on the effect.

    python demos/witness.py [ROW COLUMN]
"""

import sys

from idsearch.scm import check_witness
from idsearch.terms import render_term
from idsearch.witnesses import CELL_WITNESS, witness_for_cell

row, col = (int(sys.argv[1]), sys.argv[2]) if len(sys.argv) == 3 else (2, "b")
pair = witness_for_cell(row, col)
rep = check_witness(pair)
print(f"cell {row}{col}, construction {CELL_WITNESS[row, col]}")
print(f"  inputs differ by at most {rep.input_gap:.1e}")
print(f"  target differs by {rep.target_gap:.4f}")
for label, m in (("model 1", pair.m1), ("model 2", pair.m2)):
    tab = m.enumerate_term(pair.target)
    print(f"  {label}: {render_term(pair.target, m.graph, 'P')} over {tab.variables} = {tab.values.round(4).tolist()}")
