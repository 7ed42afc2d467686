"""Front-door adjustment found by search, then checked on a random model.

    python demos/front_door.py
"""

from idsearch.engine import identify
from idsearch.scm import formula_check, random_scm
from idsearch.terms import QuerySpec

q = QuerySpec.parse("X -> Z\nZ -> Y\nX <-> Y", "P(X,Z) P(Y|do(Z))", "P(Y|do(X))")
result = identify(q)
print("verdict:", result.status.value)
print("formula:", result.formula_string())
print(f"derivation: {len(result.trace)} steps, {result.stats['terms_generated']} terms generated")
for step in result.trace[-4:]:
    d = step.describe(q.graph)
    print(f"  {d['rule']:>18}: {d['produced']}")

m = random_scm(q.graph, seed=3)
check = formula_check(result.formula, q.target, q.inputs, m)
print(f"max |formula - truth| on a random model: {check.max_abs:.2e}")
