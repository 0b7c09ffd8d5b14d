"""Writes fixtures/parser_corpus/NNN.input.txt and NNN.expected.json.

Both the inputs and the expected results below are written out by hand; this
script only lays them down as files. Expected results are one of

    {"repairs": [...], "regions": [...], "overall_summary": str|null, "issues": [...]}
    {"error": "unrecoverable" | "shape" | "all_entries_invalid", "repairs": [...]}
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "parser_corpus"

A_JSON = '{"region": "Region A", "simple_explanation": "The shadow falls the wrong way.", "emoji": "🔦", "edit_instruction": "Remove the Region A and restore the background."}'
A = {"region": "Region A", "simple_explanation": "The shadow falls the wrong way.", "emoji": "🔦",
     "edit_instruction": "Remove the Region A and restore the background."}
B_JSON = '{"region": "Region B", "simple_explanation": "Its edges look too sharp.", "emoji": "✂️", "edit_instruction": "Remove the Region B and restore the background."}'
B = {"region": "Region B", "simple_explanation": "Its edges look too sharp.", "emoji": "✂️",
     "edit_instruction": "Remove the Region B and restore the background."}
A_CURLY = '{“region”: “Region A”, “simple_explanation”: “The shadow falls the wrong way.”, “emoji”: “🔦”, “edit_instruction”: “Remove the Region A and restore the background.”}'


def ok(repairs, regions, summary=None, issues=()):
    return {"repairs": list(repairs), "regions": list(regions), "overall_summary": summary, "issues": list(issues)}


def err(cls, repairs=()):
    return {"error": cls, "repairs": list(repairs)}


CASES = [
    # 001 clean object, nothing to repair
    ('{"regions": [' + A_JSON + ']}', ok([], [A])),
    # 002 fenced with a language tag
    ('```json\n{"regions": [' + A_JSON + ']}\n```', ok(["strip_code_fences"], [A])),
    # 003 fenced without a tag
    ('```\n{"regions": [' + A_JSON + ', ' + B_JSON + ']}\n```', ok(["strip_code_fences"], [A, B])),
    # 004 leading and trailing prose
    ('Here is the analysis you asked for:\n{"regions": [' + A_JSON + ']}\nLet me know if you need more detail.',
     ok(["trim_surrounding_prose"], [A])),
    # 005 trailing comma inside an entry
    ('{"regions": [' + A_JSON[:-1] + ',}]}', ok(["remove_trailing_commas"], [A])),
    # 006 trailing comma after the last entry
    ('{"regions": [' + A_JSON + ', ' + B_JSON + ',\n]}', ok(["remove_trailing_commas"], [A, B])),
    # 007 curly quotes everywhere
    ('{“regions”: [' + A_CURLY + ']}', ok(["normalize_curly_quotes"], [A])),
    # 008 prose around a fence whose body has a trailing comma
    ('Sure!\n```json\n{"regions": [' + A_JSON + ',]}\n```\nHope this helps.',
     ok(["strip_code_fences", "remove_trailing_commas"], [A])),
    # 009 prose around curly-quoted JSON
    ('Result: {“regions”: [' + A_CURLY + ']} (end of result)',
     ok(["trim_surrounding_prose", "normalize_curly_quotes"], [A])),
    # 010 a refusal, no JSON at all
    ("I'm sorry, I cannot help with that image.", err("unrecoverable")),
    # 011 a refusal with a typographic apostrophe: the quote pass changes text but nothing parses
    ("I’m unable to analyze this picture.", err("unrecoverable", ["normalize_curly_quotes"])),
    # 012 truncated mid-string
    ('{"regions": [{"region": "Region A", "simple_explanation": "The shadow fa', err("unrecoverable")),
    # 013 wrong top-level key
    ('{"explanations": [' + A_JSON + ']}', err("shape")),
    # 014 regions is an object, not an array
    ('{"regions": ' + A_JSON + '}', err("shape")),
    # 015 the only entry lacks simple_explanation
    ('{"regions": [{"region": "Region A", "emoji": "🔦", "edit_instruction": "Remove it."}]}',
     err("all_entries_invalid")),
    # 016 second entry lacks region and is dropped
    ('{"regions": [' + A_JSON + ', {"simple_explanation": "Odd texture.", "emoji": "🧱", "edit_instruction": "Smooth it."}]}',
     ok([], [A], issues=[{"kind": "rejected", "index": 1, "reason": "missing_region"}])),
    # 017 emoji replaced by plain letters
    ('{"regions": [{"region": "Region A", "simple_explanation": "The shadow falls the wrong way.", "emoji": "xx", "edit_instruction": "Remove the Region A and restore the background."}]}',
     ok([], [dict(A, emoji="🔍")], issues=[{"kind": "emoji_substituted", "index": 0, "original": "xx"}])),
    # 018 emoji missing entirely
    ('{"regions": [{"region": "Region A", "simple_explanation": "The shadow falls the wrong way.", "edit_instruction": "Remove the Region A and restore the background."}]}',
     ok([], [dict(A, emoji="🔍")], issues=[{"kind": "emoji_substituted", "index": 0}])),
    # 019 two emoji where one is allowed
    ('{"regions": [{"region": "Region A", "simple_explanation": "The shadow falls the wrong way.", "emoji": "🔥🔥", "edit_instruction": "Remove the Region A and restore the background."}]}',
     ok([], [dict(A, emoji="🔍")], issues=[{"kind": "emoji_substituted", "index": 0, "original": "🔥🔥"}])),
    # 020 a ZWJ sequence is one grapheme and is kept
    ('{"regions": [{"region": "Region A", "simple_explanation": "The faces are blended.", "emoji": "👨‍👩‍👧", "edit_instruction": "Remove the Region A and restore the background."}]}',
     ok([], [{"region": "Region A", "simple_explanation": "The faces are blended.", "emoji": "👨‍👩‍👧",
              "edit_instruction": "Remove the Region A and restore the background."}])),
    # 021 empty list with a summary parses; the pipeline decides what to do with zero entries
    ('{"regions": [], "overall_summary": "Nothing stood out."}', ok([], [], summary="Nothing stood out.")),
    # 022 a bare string among the entries
    ('{"regions": ["just text", ' + B_JSON + '], "overall_summary": "One region looks pasted in."}',
     ok([], [B], summary="One region looks pasted in.",
        issues=[{"kind": "rejected", "index": 0, "reason": "not_an_object"}])),
    # 023 top-level array: prose trimming pulls out the first object, which has no regions key
    ('[' + A_JSON + ']', err("shape", ["trim_surrounding_prose"])),
    # 024 a brace pair in the prose is taken as the object and does not parse
    ('Note {see below}: {"regions": [' + A_JSON + ']}', err("unrecoverable", ["trim_surrounding_prose"])),
    # 025 whitespace-only explanation is missing
    ('{"regions": [{"region": "Region A", "simple_explanation": "   ", "emoji": "🔦", "edit_instruction": "Remove it."}, ' + B_JSON + ']}',
     ok([], [B], issues=[{"kind": "rejected", "index": 0, "reason": "missing_simple_explanation"}])),
    # 026 fence, trailing comma and curly quotes together
    ('```json\n{“regions”: [' + A_CURLY + ',]}\n```',
     ok(["strip_code_fences", "remove_trailing_commas", "normalize_curly_quotes"], [A])),
    # 027 typographic apostrophe inside a valid string needs no repair and survives
    ('{"regions": [{"region": "Region A", "simple_explanation": "The shadow doesn’t match the sun.", "emoji": "🌑", "edit_instruction": "Remove the Region A and restore the background."}], "overall_summary": "   "}',
     ok([], [{"region": "Region A", "simple_explanation": "The shadow doesn’t match the sun.", "emoji": "🌑",
              "edit_instruction": "Remove the Region A and restore the background."}])),
]


def main():
    OUT.mkdir(exist_ok=True)
    for i, (raw, expected) in enumerate(CASES, start=1):
        (OUT / f"{i:03d}.input.txt").write_text(raw, encoding="utf-8")
        (OUT / f"{i:03d}.expected.json").write_text(json.dumps(expected, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(CASES)} cases")


if __name__ == "__main__":
    main()
