"""Byte-exact tests for prompt construction and the question heuristic."""

import pytest

from refvos.errors import UsageError
from refvos.prompts import IMAGE_TOKEN, QUESTION_WORDS, build_prompt, is_question

# Golden fixture: (expression, expected prompt text, expected template id).
# Covers plain statements, trailing-period collapse, whitespace trimming,
# question mark detection, every interrogative-word pathway class, and
# punctuation stripping on the first token.
GOLDEN = [
    ("the red car", "<image>\nPlease segment the red car.", 1),
    ("the red car.", "<image>\nPlease segment the red car.", 1),
    ("  the dog on the left  ", "<image>\nPlease segment the dog on the left.", 1),
    ("a man riding a horse", "<image>\nPlease segment a man riding a horse.", 1),
    ("the person who waves", "<image>\nPlease segment the person who waves.", 1),
    (
        "woman in a red coat holding an umbrella",
        "<image>\nPlease segment woman in a red coat holding an umbrella.",
        1,
    ),
    ("the third sheep from the right.", "<image>\nPlease segment the third sheep from the right.", 1),
    ("the truck turning left ", "<image>\nPlease segment the truck turning left.", 1),
    # Contractions are not interrogative tokens: "where's" != "where".
    ("Where's the skater going", "<image>\nPlease segment Where's the skater going.", 1),
    ("elephant walking. slowly", "<image>\nPlease segment elephant walking. slowly.", 1),
    (
        "which zebra is closest to the camera?",
        "<image>\nwhich zebra is closest to the camera? Please respond with a segmentation mask.",
        2,
    ),
    (
        "the object the child points at?",
        "<image>\nthe object the child points at? Please respond with a segmentation mask.",
        2,
    ),
    (
        "What is the man holding",
        "<image>\nWhat is the man holding Please respond with a segmentation mask.",
        2,
    ),
    (
        "Is the bird flying?",
        "<image>\nIs the bird flying? Please respond with a segmentation mask.",
        2,
    ),
    (
        "Who enters the room last",
        "<image>\nWho enters the room last Please respond with a segmentation mask.",
        2,
    ),
    (
        "How many ducks swim",
        "<image>\nHow many ducks swim Please respond with a segmentation mask.",
        2,
    ),
    (
        "Can you find the blue umbrella",
        "<image>\nCan you find the blue umbrella Please respond with a segmentation mask.",
        2,
    ),
    (
        "Does the cat jump onto the table",
        "<image>\nDoes the cat jump onto the table Please respond with a segmentation mask.",
        2,
    ),
    (
        '"What" said the parrot',
        '<image>\n"What" said the parrot Please respond with a segmentation mask.',
        2,
    ),
    (
        "Should the goalkeeper dive",
        "<image>\nShould the goalkeeper dive Please respond with a segmentation mask.",
        2,
    ),
]


@pytest.mark.parametrize("expression,text,template_id", GOLDEN)
def test_golden_prompts_byte_exact(expression, text, template_id):
    p = build_prompt(expression)
    assert p.text == text
    assert p.template_id == template_id


def test_fixture_covers_both_templates():
    ids = {tid for _, _, tid in GOLDEN}
    assert ids == {1, 2}
    assert len(GOLDEN) == 20


def test_image_token_leads_every_prompt():
    for expression, _, _ in GOLDEN:
        assert build_prompt(expression).text.startswith(IMAGE_TOKEN + "\n")


def test_no_double_period_after_collapse():
    assert ".." not in build_prompt("the red car.").text


def test_empty_expression_rejected():
    with pytest.raises(UsageError):
        build_prompt("")
    with pytest.raises(UsageError):
        build_prompt("   ")


def test_is_question_rules():
    assert is_question("anything at all?")
    assert is_question("does it move")
    assert is_question("DOES it move")
    assert not is_question("the dog")
    assert not is_question("whatever remains")  # "whatever" is not "what"
    assert not is_question("")


def test_is_question_strips_punctuation_from_first_token():
    assert is_question("'why' is written on the wall")
    assert is_question("(who) left the door open")


def test_custom_question_words():
    words = frozenset({"find"})
    assert is_question("find the cat", question_words=words)
    assert not is_question("what cat", question_words=words)
    p = build_prompt("find the cat", question_words=words)
    assert p.template_id == 2


def test_question_word_set_contents():
    # 21 interrogatives and auxiliaries; frozen so prompts stay stable.
    assert len(QUESTION_WORDS) == 21
    assert {"what", "which", "is", "did", "should"} <= QUESTION_WORDS
