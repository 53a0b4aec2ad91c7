"""Writes fixtures/scenario.jsonl: 42 days of a sweet-drink habit for user `demo`.

Evening cola lowers sleep quality by about 8 points and late pizza by about 6.
Dishes are logged by name without nutrition so import enrichment fills it.
"""
import datetime as dt
import json
import random
import sys

rng = random.Random(7)
start = dt.datetime(2024, 1, 1, tzinfo=dt.timezone.utc)
user = "demo"


def iso(t):
    return t.strftime("%Y-%m-%dT%H:%M:%S.000Z")


def food(eid, dish, t, grams=0, rating=None, place=""):
    e = {
        "event_id": eid,
        "how": "text",
        "schema_version": 1,
        "type": "food",
        "user_id": user,
        "what": {"dish": dish, "quantity_g": grams},
        "when": {"eaten_at": iso(t), "logged_at": iso(t), "tz_offset_min": 0},
        "where": {"place": place},
    }
    if rating is not None:
        e["rating"] = rating
        e["provenance"] = {"rating": {"kind": "subjective", "source": "user-prompt"}}
    return e


def life(eid, stream, s, e, attrs):
    return {
        "attributes": attrs,
        "end": iso(e),
        "event_id": eid,
        "schema_version": 1,
        "start": iso(s),
        "stream": stream,
        "type": "life",
        "tz_offset_min": 0,
        "user_id": user,
    }


out = []
for d in range(42):
    day = start + dt.timedelta(days=d)
    tag = f"s{d:03d}"
    at = lambda h, m, j=10: day + dt.timedelta(hours=h, minutes=m + rng.randint(-j, j))
    out.append(food(f"{tag}-breakfast", "porridge", at(7, 30), 250, rating=3 if d % 7 == 0 else None, place="home"))
    lunch = "chicken salad" if d % 2 == 0 else "spaghetti"
    out.append(food(f"{tag}-lunch", lunch, at(12, 30), 350, place="office" if day.weekday() < 5 else "home"))
    if d % 3 == 0:
        out.append(food(f"{tag}-snack", "dark chocolate", at(15, 30), 40, rating=5))
    if d % 5 == 2:
        out.append(food(f"{tag}-lemonade", "lemon soda", at(13, 0), 330, rating=4))
    dinner = ["grilled salmon", "spaghetti", "chicken salad"][d % 3]
    out.append(food(f"{tag}-dinner", dinner, at(19, 0), 300, rating=3 if d % 4 == 0 else None, place="home"))
    cola = rng.random() < 0.45
    pizza = rng.random() < 0.3
    exercise = rng.random() < 0.4
    if cola:
        out.append(food(f"{tag}-cola", "coca cola", at(21, 0, 20), 355, rating=5, place="home"))
    if pizza:
        out.append(food(f"{tag}-pizza", "large pizza", at(21, 30, 15), 300, place="home"))
    if d == 20:
        w = food(f"{tag}-water", "seltzer", at(17, 0), 355, rating=2)
        out.append(w)
    if exercise:
        s = at(17, 30)
        out.append(life(f"{tag}-run", "exercise", s, s + dt.timedelta(minutes=45),
                        {"duration": {"unit": "min", "value": 45}, "kcal_burned": {"unit": "kcal", "value": 350}}))
    bed = at(23, 0, 15)
    quality = 74 - 8 * cola - 6 * pizza + 2 * exercise + rng.gauss(0, 2.5)
    latency = 14 + 5 * cola + rng.gauss(0, 2)
    out.append(life(f"{tag}-sleep", "sleep", bed, bed + dt.timedelta(minutes=450), {
        "duration": {"unit": "min", "value": 450},
        "sleep_latency": {"unit": "min", "value": round(max(latency, 1), 1)},
        "sleep_quality": {"unit": "score", "value": round(quality, 1)},
    }))

# one barcode-only scan, no dish name
scan = food("s041-scan", "", start + dt.timedelta(days=41, hours=10), 0)
scan["how"] = "barcode"
scan["what"]["barcode"] = "049000028911"
out.append(scan)

out.sort(key=lambda e: (e.get("start") or e["when"]["eaten_at"], e["event_id"]))
dest = sys.argv[1] if len(sys.argv) > 1 else "fixtures/scenario.jsonl"
with open(dest, "w") as f:
    for e in out:
        f.write(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n")
