"""Turn a transcript into a segmentation-oriented prompt.

Two templates exist.  The plain one wraps the expression in a
"Please segment ..." instruction; the question one appends a request
for a mask instead, and is used when the expression already resembles
a question.  The question heuristic (terminal "?" or an interrogative
first word) is configurable via the ``question_words`` argument.
"""

import string
from dataclasses import dataclass

from .errors import UsageError

__all__ = ["Prompt", "build_prompt", "is_question", "QUESTION_WORDS"]

IMAGE_TOKEN = "<image>"

QUESTION_WORDS = frozenset(
    {
        "what", "which", "who", "whom", "whose", "where", "when", "why", "how",
        "is", "are", "was", "were", "do", "does", "did",
        "can", "could", "will", "would", "should",
    }
)


@dataclass(frozen=True)
class Prompt:
    """A ready-to-send prompt plus the template that produced it."""

    text: str
    template_id: int  # 1 = plain, 2 = question


def is_question(exp: str, question_words=QUESTION_WORDS) -> bool:
    """True iff ``exp`` ends with "?" or starts with an interrogative word."""
    exp = exp.strip()
    if not exp:
        return False
    if exp.endswith("?"):
        return True
    first = exp.split()[0].lower().strip(string.punctuation)
    return first in question_words


def build_prompt(exp: str, question_words=QUESTION_WORDS) -> Prompt:
    """Build the segmentation prompt for a (final, cleaned) expression.

    The expression is kept verbatim apart from surrounding whitespace;
    template 1 appends a period only when the expression does not
    already end with one, so transcripts ending in "." never produce
    "..".
    """
    exp = exp.strip()
    if not exp:
        raise UsageError("cannot build a prompt from an empty expression")
    if is_question(exp, question_words):
        return Prompt(
            f"{IMAGE_TOKEN}\n{exp} Please respond with a segmentation mask.",
            template_id=2,
        )
    body = f"Please segment {exp}"
    if not body.endswith("."):
        body += "."
    return Prompt(f"{IMAGE_TOKEN}\n{body}", template_id=1)
