"""
Multi-round refinement with visualization hints
===============================================

Round 1 recommends charts plus natural-language hints. Selecting a hint
freezes every graph node outside its constraint and re-searches warm, so the
next round only contains charts the hint allows.
"""

from vizscout import SearchConfig, load_table_text, start_session
from vizscout.query import to_canonical_text

CSV = """\
City,Delay,Date
LA,5,2012-01-01
MSP,40,2012-01-02
SEA,20,2012-01-03
LA,10,2012-01-04
MSP,35,2012-01-05
SEA,25,2012-01-06
LA,6,2012-01-07
MSP,45,2012-01-08
"""

table = load_table_text(CSV, name="flights")
session = start_session(table, SearchConfig(iterations=100, seed=42, top_k=5))

round1 = session.history[0]
print("round 1 charts:")
for rec in round1.recommendations.ranked:
    print("   ", to_canonical_text(rec.query))
print("\nround 1 hints:")
for h in round1.hints_offered:
    print(f"    [{h.id}] {h.text}  (cost {h.cost}, avg {h.avg_score:.3f})")

# The user clicks "Explore Delay over categories or time": the y layer keeps
# only the Delay node from here on.
hint = next(h for h in round1.hints_offered
            if h.template_kind == "explore_field_y" and h.target == "Delay")
round2 = session.apply_hint(hint.id)

print(f"\nselected: {hint.text!r}")
print("round 2 charts (all bound to y=Delay):")
for rec in round2.recommendations.ranked:
    print("   ", to_canonical_text(rec.query))
print("\nactive constraints:", session.constraints_payload())

# Keep two charts; the session log records everything for exact replay.
kept = round2.recommendation_texts()[:2]
session.record_kept(2, kept)
print("\nkept so far:", session.kept_union())
print("\nevent log:")
for line in session.to_jsonl().splitlines():
    print("   ", line[:100] + ("..." if len(line) > 100 else ""))
