"""Degree of Access over trust level and data sensitivity.

Activity is held at Rare so only the sensitivity/trust/condition rules can
fire.  Prints a text map for a stable patient and for a critical one, then the
corner audit that pins the fuzzy policy to its crisp if/elif reading.

    python3 demos/fuzzy_surface.py
"""
import numpy as np

from flacsim.fuzzy import FuzzyInput, corner_inputs, crisp_rule_table, infer_doa

TIER_MARK = {"Deny": ".", "ReadOnly": "r", "ReadWrite": "w", "Full": "F"}
axis = np.linspace(0.0, 1.0, 11)

for condition in (0.0, 1.0):
    print(f"patient_condition={condition:.1f}  rows: trust 1.0 -> 0.0, cols: sensitivity 0.0 -> 1.0")
    for tl in axis[::-1]:
        cells = []
        for ds in axis:
            d = infer_doa(FuzzyInput(data_sensitivity=float(ds), trust_level=float(tl),
                                     patient_condition=condition, user_activity_level=0.0))
            cells.append(f"{d.doa:.2f}{TIER_MARK[d.tier.label]}")
        print(f"  {tl:.1f} | " + " ".join(cells))
    print()

corners = list(corner_inputs())
agree = sum(infer_doa(c).tier == crisp_rule_table(c) for c in corners)
print(f"corner audit: {agree}/{len(corners)} fuzzy tiers match the crisp table")
