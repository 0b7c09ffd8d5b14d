"""Generate fixtures/user_study_synthetic.jsonl.

15 participants x 10 items. Each item gets six Likert ratings, a preference
choice and two yes/no answers; each participant answers two yes/no questions
once, with item_id "overall". Yes/simplified counts are fixed exactly:

    preference = simplified   98 / 150
    cognitive_load_reduced   122 / 150
    comparison_helpful       104 / 150
    confidence_improved       12 / 15
    would_use                 14 / 15

Likert ratings are synthetic draws from a seeded RNG. Run from the repo root:

    python3 fixtures/tools/gen_survey.py
"""

import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "user_study_synthetic.jsonl"
PARTICIPANTS = [f"P{i:02d}" for i in range(1, 16)]
ITEMS = [f"img{i:02d}" for i in range(1, 11)]


def exact_flags(rng, n, yes):
    flags = [True] * yes + [False] * (n - yes)
    rng.shuffle(flags)
    return flags


def draw(rng, weights):
    return rng.choices([1, 2, 3, 4, 5], weights=weights)[0]


def shifted(rng, base, deltas):
    d = rng.choices([-1, 0, 1, 2], weights=deltas)[0]
    return max(1, min(5, base + d))


def main():
    rng = random.Random(20240917)
    n = len(PARTICIPANTS) * len(ITEMS)
    pref = exact_flags(rng, n, 98)
    cog = exact_flags(rng, n, 122)
    comp = exact_flags(rng, n, 104)
    conf = exact_flags(rng, len(PARTICIPANTS), 12)
    use = exact_flags(rng, len(PARTICIPANTS), 14)

    lines = []
    k = 0
    for pi, p in enumerate(PARTICIPANTS):
        for item in ITEMS:
            def rec(q, **kw):
                lines.append({"participant_id": p, "item_id": item, "question_id": q, **kw})

            ease_c = draw(rng, [12, 26, 32, 20, 10])
            clar_c = draw(rng, [10, 24, 34, 22, 10])
            acc_c = draw(rng, [6, 14, 34, 30, 16])
            rec("ease_complex", rating=ease_c)
            rec("ease_simplified", rating=shifted(rng, ease_c, [10, 30, 40, 20]))
            rec("clarity_complex", rating=clar_c)
            rec("clarity_simplified", rating=shifted(rng, clar_c, [20, 36, 34, 10]))
            rec("accuracy_complex", rating=acc_c)
            rec("accuracy_simplified", rating=shifted(rng, acc_c, [30, 42, 24, 4]))
            rec("preference", choice="simplified" if pref[k] else "complex")
            rec("cognitive_load_reduced", answer=cog[k])
            rec("comparison_helpful", answer=comp[k])
            k += 1
        for q, flags in (("confidence_improved", conf), ("would_use", use)):
            lines.append({"participant_id": p, "item_id": "overall", "question_id": q, "answer": flags[pi]})

    OUT.write_text("".join(json.dumps(r, separators=(",", ":")) + "\n" for r in lines))
    print(f"wrote {len(lines)} lines to {OUT}")


if __name__ == "__main__":
    main()
