"""Effects from incomplete records: proxies X*, Y*, Z* and missingness flags R_*.

    python demos/missing_data.py
"""

from idsearch.engine import identify
from idsearch.scenarios import DATA_DIR, load
from idsearch.scm import formula_check, random_scm

for name in ("sources1_a", "sources2_b", "sources3_b", "sources1_b"):
    sc = load(DATA_DIR / "scenarios" / "fig4" / f"{name}.scn")
    q = sc.spec()
    r = identify(q)
    print(f"{name}: data {', '.join(sc.data)}")
    print(f"  {r.status.value}; {r.stats['terms_generated']} terms, {r.stats['wall_time']:.1f} s")
    if r.identifiable:
        worst = max(formula_check(r.formula, q.target, q.inputs, random_scm(q.graph, seed=s)).max_abs
                    for s in range(10))
        print(f"  {r.formula_string()}")
        print(f"  worst error over 10 random models: {worst:.1e}")
