"""Exercise the Python bindings end to end against the demo corpus and fixtures.

Build and install first:  pip install --no-build-isolation .
Then run from the repository root:  python python/smoke_test.py
"""

import json
import pathlib
import sys

import personagram

ROOT = pathlib.Path(__file__).resolve().parent.parent
DEMO = ROOT / "demo"
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"


def check(condition, message):
    if not condition:
        print(f"FAIL {message}")
        sys.exit(1)
    print(f"ok   {message}")


def main():
    corpus = personagram.Corpus.load(str(DEMO / "personas.jsonl"))
    check(len(corpus) == 200, "corpus loads 200 personas")
    young = corpus.filter([("BasicInfo/Age", ["18–25"])])
    check(young and all(corpus.preview(i)["facets"]["BasicInfo/Age"] == "18–25" for i in young), "age filter agrees with previews")
    check(corpus.filter() == corpus.ids(), "empty filter returns everyone")
    try:
        corpus.filter([("BasicInfo/Shoe", ["42"])])
        check(False, "unknown facet rejected")
    except personagram.PersonagramError as e:
        check(e.args[0] == "validation_error", "unknown facet rejected")

    products = json.loads((FIXTURES / "product_contract.json").read_text())
    batch = personagram.parse_product_response(products["well_formed"][0]["text"], "p0001")
    check(len(batch["suggestions"]) == 9, "product response parses to nine suggestions")
    codes = []
    for case in products["mutations"]:
        try:
            personagram.parse_product_response(case["text"], "p0001")
            codes.append(None)
        except personagram.PersonagramError as e:
            codes.append(e.args[0])
    check(codes == [c["expected"] for c in products["mutations"]], "product mutations classified")

    features = json.loads((FIXTURES / "feature_contract.json").read_text())
    matrix = personagram.parse_feature_response(features["well_formed"][0]["text"], "p0001", "YETI Tundra 45 Cooler", "https://images.example/x.jpg")
    check(sum(len(matrix[d]) for d in ("aesthetics", "behavioral", "contextual")) == 27, "feature response parses to 27 entries")

    selections = json.loads((DEMO / "selections.json").read_text())
    prompt = personagram.compose("a balcony planter", selections)
    check(prompt.startswith("Design a balcony planter.") and all(prompt.count(s["phrase"]) == 1 for s in selections), "compose lists each phrase once")

    session, metrics = personagram.replay_events((DEMO / "logs" / "P6-personagram.json").read_text())
    check((metrics["counts"]["bulb"], metrics["counts"]["tab_switch"]) == (9, 13), "P6 log replays to its counts")
    check(abs(metrics["tab_switch_rate"] - 130 / 14.2) <= 0.01, "P6 switch rate")
    check(personagram.metrics_csv([metrics]).splitlines()[1].startswith("P6,Personagram,6,9,5,6,20"), "metrics csv row")

    engine = personagram.Engine(corpus, str(DEMO / "fixtures"))
    s = engine.create_session(subject="a balcony planter", participant="demo")
    tile = engine.add_tile(s["id"], "p0001")
    bulb = engine.infer(tile["id"])
    check(len(bulb["cards"]) == 5, "first bulb shows five cards")
    stored = engine.features(bulb["cards"][0]["id"])
    entry = stored["matrix"]["aesthetics"][0]
    engine.change_selection(s["id"], {"matrix_id": stored["id"], "dimension": "aesthetics", "key": entry["key"], "phrase": entry["phrase"]})
    check(entry["phrase"] in engine.draft(s["id"])["auto_text"], "selection reaches the prompt")
    engine.record_event(s["id"], "tab_switch")
    kinds = [e["kind"] for e in engine.session(s["id"])["event_log"]]
    check(kinds == ["select_persona", "bulb", "puzzle", "plus", "tab_switch"], "each action logs one event")
    check(personagram.round_trip_session(engine.session_document(s["id"])), "session document round-trips")
    try:
        engine.infer(engine.add_tile(s["id"], "p0150")["id"])
        check(False, "missing fixture surfaces as provider error")
    except personagram.PersonagramError as e:
        check(e.args[0] == "provider_error", "missing fixture surfaces as provider error")
    print("smoke test passed")


if __name__ == "__main__":
    main()
