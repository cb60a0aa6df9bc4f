"""Exception hierarchy shared by all modules."""


class ParsetopoError(ValueError):
    """Base class for input and validation errors."""


class BracketSyntaxError(ParsetopoError):
    """Malformed bracket-notation tree; ``offset`` is the character position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ContactError(ParsetopoError):
    pass


class GrammarError(ParsetopoError):
    pass


class SequenceError(ParsetopoError):
    """A sequence symbol could not be mapped to a grammar terminal."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class UndefinedMeasureError(ParsetopoError):
    """A measure's formula is undefined for the given input (e.g. 0/0)."""


class EmptyPairClassError(UndefinedMeasureError):
    """A contact or non-contact pair class is empty.

    ``which`` is ``"contact"``, ``"non-contact"`` or ``"admissible"`` (no pair
    satisfies the sequence separation at all).
    """

    def __init__(self, which, message=None):
        if message is None:
            message = {
                "contact": "empty contact class",
                "non-contact": "empty non-contact class",
                "admissible": "no admissible pairs",
            }[which]
        super().__init__(message)
        self.which = which
