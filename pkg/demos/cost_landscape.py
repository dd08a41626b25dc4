"""Tabulate the reduced cost f_a(m) across parameter families.

Prints f, the minimizing tube radius r_star and the transition part for a
few (d, p, a) combinations, and dumps a CSV per family next to this
script.  The d=1, p=2 rows can be checked by hand against
f = 2 + 2 sqrt(a) m.
"""

import os

import numpy as np

from branchflow import CostParams, cost_table, kappa, write_cost_table_csv

HERE = os.path.dirname(os.path.abspath(__file__))

masses = list(np.round(np.linspace(0.25, 3.0, 12), 4))

for d, p in ((1, 2.0), (2, 3.0), (3, 4.0)):
    for a in (0.1, 1.0):
        params = CostParams(d=d, p=p, a=a)
        evals = cost_table(masses, params)
        kap = kappa(params)
        print(f"\nd={d} p={p} a={a}   kappa={kap:.6f}")
        print("  m        f(m)       r_star     q_inf")
        for ev in evals:
            print(f"  {ev.m:<8.4g} {ev.f_value:<10.6f} "
                  f"{ev.r_star:<10.6f} {ev.q_inf_at_r_star:.6f}")
        out = os.path.join(HERE, f"cost_d{d}_a{a}.csv")
        write_cost_table_csv(evals, out)
        print("  ->", out)
