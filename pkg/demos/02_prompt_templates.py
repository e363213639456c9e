"""
Turning referring expressions into segmentation prompts
=======================================================

Declarative expressions and questions get different templates; the
chooser looks at the final question mark and the first word.
"""

from refvos.prompts import QUESTION_WORDS, build_prompt, is_question

EXPRESSIONS = [
    "the brown dog",
    "a man riding a bike.",
    "what is the girl holding?",
    "where does the cat sleep",
    "Is anyone wearing red",
    "the person who is talking",
]

for exp in EXPRESSIONS:
    prompt = build_prompt(exp)
    kind = "question   " if prompt.template_id == 2 else "declarative"
    print(f"{kind}  {exp!r}")
    print(f"    -> {prompt.text!r}")

# The question test is purely lexical: a trailing "?" or a leading
# interrogative word.  "who" mid-sentence does not count.
print()
print("is_question('the person who is talking'):", is_question("the person who is talking"))
print("interrogative lexicon size:", len(QUESTION_WORDS))
