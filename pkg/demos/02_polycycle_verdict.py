"""Analyze the four-saddle polycycle and read its cyclicity verdict.

The model in models/four_saddle.model keeps the unit square invariant for
every parameter value, so the four corner saddles form a persistent
polycycle. At the default parameter point the graphic number r and the
leading return coefficient A are both 1, and the verdict has to dig into
the second-order data to pin the cyclicity.
"""

from pathlib import Path

from polycycles.model import load_model
from polycycles.pipeline import analyze
from polycycles.resultdoc import dumps

mf = load_model(Path(__file__).resolve().parents[1] / "models" / "four_saddle.model")
doc = analyze(mf)

ret = doc["return"]
print("graphic number        r =", ret["ratio"])
print("leading coefficient   A =", ret["leading"])
print("second coefficient      =", ret["second_coeff"],
      "at exponent", ret["second_exponent"])

verdict = doc["verdict"]
print()
print("cyclicity bounds: [", verdict["lower"], ",", verdict["upper"], "]")
for item in verdict["items"]:
    mark = "*" if item["fired"] else " "
    print(f"  {mark} {item['label']:16s} {item['condition']}")

# The same document the CLI would write, in its archival key=value form.
out = Path(__file__).with_suffix(".out.txt")
out.write_text(dumps(doc))
print()
print("full document written to", out.name)
