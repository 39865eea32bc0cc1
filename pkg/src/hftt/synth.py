"""Synthetic text generation for training without any image data.

A large generic word list stands in for the unknown space of images: every
word is wrapped in caption-style prompt templates and the resulting strings
are what the text encoder later embeds.  The same machinery renders the
in-distribution concept names.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

PLACEHOLDER = "{}"
DEFAULT_TEMPLATE = "This is a photo of a {}."


@dataclass(frozen=True)
class PromptTemplate:
    """A caption pattern with exactly one ``{}`` placeholder."""

    pattern: str

    def __post_init__(self):
        if self.pattern.count(PLACEHOLDER) != 1:
            raise ValidationError(
                f"template {self.pattern!r} must contain exactly one {PLACEHOLDER!r} placeholder"
            )

    def fill(self, word: str) -> str:
        return self.pattern.replace(PLACEHOLDER, word)


@dataclass
class WordCorpus:
    """A deduplicated, order-preserving list of corpus words."""

    words: list[str]

    def __post_init__(self):
        cleaned = (str(w).strip() for w in self.words)
        self.words = list(dict.fromkeys(w for w in cleaned if w))

    def __len__(self) -> int:
        return len(self.words)


def load_word_set(path) -> WordCorpus:
    """Read a newline-delimited word list, dropping blanks and duplicates."""
    with open(path, "r", encoding="utf-8") as fh:
        corpus = WordCorpus(fh.read().splitlines())
    if not corpus.words:
        raise ValidationError(f"{path}: no usable words after cleaning")
    return corpus


def load_templates(path) -> list[PromptTemplate]:
    """Read newline-delimited prompt templates, reporting the offending line on error."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    templates = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            templates.append(PromptTemplate(stripped))
        except ValidationError as exc:
            raise ValidationError(f"{path}, template on line {lineno}: {exc}") from exc
    if not templates:
        raise ValidationError(f"{path}: no templates found")
    return templates


def _coerce_templates(templates) -> list[PromptTemplate]:
    templates = list(templates)
    if not templates:
        raise ValidationError("at least one prompt template is required")
    coerced = []
    for index, template in enumerate(templates):
        if not isinstance(template, PromptTemplate):
            try:
                template = PromptTemplate(str(template))
            except ValidationError as exc:
                raise ValidationError(f"template {index}: {exc}") from exc
        coerced.append(template)
    return coerced


def word2data(words, templates) -> list[str]:
    """Render every word through every template, words-major.

    The output has exactly ``len(words) * len(templates)`` strings: all
    templated variants of the first word, then of the second, and so on.
    """
    if isinstance(words, WordCorpus):
        words = words.words
    templates = _coerce_templates(templates)
    return [template.fill(str(word)) for word in words for template in templates]


def synthesize_in_distribution(names, templates) -> list[str]:
    """Render the in-distribution concept names through the templates."""
    names = list(names)
    if not names:
        raise ValidationError("at least one in-distribution concept name is required")
    return word2data(names, templates)
