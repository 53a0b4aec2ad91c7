"""Food x sleep-quality co-occurrence counts for fixtures/scenario.jsonl.

Written independently of the engine as the expected CLI output. Food labels
are the catalog item a dish name or barcode resolves to; pairs count when the
sleep starts after the meal and at most six hours later.
"""
import csv
import datetime as dt
import json
import sys

WINDOW = dt.timedelta(hours=6)
CUTS = [65, 70]


def ts(s):
    return dt.datetime.fromisoformat(s.replace("Z", "+00:00"))


names = {}
for line in open("fixtures/nutrition.jsonl"):
    item = json.loads(line)
    names[item["item_id"]] = item["item_id"]
    for n in item.get("names", []):
        names[n.lower()] = item["item_id"]
barcodes = {json.loads(l)["barcode"]: json.loads(l)["item_id"] for l in open("fixtures/barcodes.jsonl")}

foods, sleeps = [], []
for line in open("fixtures/scenario.jsonl"):
    e = json.loads(line)
    if e["type"] == "food":
        code = e["what"].get("barcode")
        label = barcodes[code] if code else names[e["what"]["dish"].strip().lower()]
        foods.append((ts(e["when"]["eaten_at"]), label))
    elif e["stream"] == "sleep":
        sleeps.append((ts(e["start"]), e["attributes"]["sleep_quality"]["value"]))

cols = [f"sleep_quality<{CUTS[0]}", f"sleep_quality[{CUTS[0]},{CUTS[1]})", f"sleep_quality>={CUTS[1]}"]
rows = sorted({label for _, label in foods})
counts = {r: [0, 0, 0] for r in rows}
for t, label in foods:
    for s, q in sleeps:
        if t < s <= t + WINDOW:
            counts[label][sum(q >= c for c in CUTS)] += 1

out = csv.writer(sys.stdout, lineterminator="\n")
out.writerow(["category"] + cols)
for r in rows:
    out.writerow([r] + counts[r])
