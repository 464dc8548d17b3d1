"""Regenerate the bundled topology files from MATPOWER case data.

Requires ``pypower`` (not a runtime dependency). Every case is written with
one injection meter per bus followed by one flow meter per branch, so that
measurement numbering matches the usual "injections first" convention.
"""
import importlib
import json
import sys
from pathlib import Path

# Sparse 14-bus set: nine injection meters and six flow meters. The original
# listing is not available, so this is a reconstruction chosen to be observable.
SPARSE14_INJECTIONS = [2, 3, 5, 6, 8, 9, 10, 12, 14]
SPARSE14_LINES = [0, 5, 7, 10, 15, 19]

CASES = {"ieee6": "case6ww", "ieee14": "case14", "ieee57": "case57", "ieee118": "case118"}


def main(out_dir):
    out_dir = Path(out_dir)
    for name, mod in CASES.items():
        ppc = getattr(importlib.import_module("pypower." + mod), mod)()
        buses = [int(b) for b in ppc["bus"][:, 0]]
        lines = [[int(f), int(t)] for f, t in ppc["branch"][:, :2]]
        meas = [{"type": "injection", "bus": b} for b in buses]
        meas += [{"type": "flow", "line": k} for k in range(len(lines))]
        doc = {"name": name, "buses": buses, "lines": lines, "measurements": meas}
        (out_dir / f"{name}.json").write_text(json.dumps(doc) + "\n")
        if name == "ieee14":
            meas = [{"type": "injection", "bus": b} for b in SPARSE14_INJECTIONS]
            meas += [{"type": "flow", "line": k} for k in SPARSE14_LINES]
            doc = dict(doc, name="ieee14-sparse-reconstruction", measurements=meas)
            (out_dir / "ieee14_sparse.json").write_text(json.dumps(doc) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/ktuple/data")
