"""Optional linguistic tagger behind the /v1/tag endpoint.

A token string is high-density when it is a noun, a proper noun, a number,
or part of a recognized named entity. Requires the ``tagging`` extra
(spaCy plus the small English model); callers get None when unavailable
and the endpoint answers 501.
"""

from __future__ import annotations

HD_POS = {"NOUN", "PROPN", "NUM"}


def load_tagger():
    """Return a callable list[str] -> list[bool], or None when the
    tagging extra is not installed."""
    try:
        import spacy
    except ImportError:
        return None
    try:
        nlp = spacy.load("en_core_web_sm")
    except OSError:
        return None

    def tag(tokens: list[str]) -> list[bool]:
        if not tokens:
            return []
        doc = spacy.tokens.Doc(nlp.vocab, words=[t.strip() or "_" for t in tokens])
        for name, proc in nlp.pipeline:
            doc = proc(doc)
        entity_tokens = {t.i for ent in doc.ents for t in ent}
        return [
            tok.pos_ in HD_POS or tok.i in entity_tokens for tok in doc
        ]

    return tag
