"""Incremental word-by-word speech synthesis experiments.

Synthesize each word of a sentence with limited knowledge of the words
after it (nothing, the truth, a language-model guess, a random word, or
the whole sentence), measure what that does to duration, energy and pitch,
and run listening tests on the results.
"""

__version__ = "0.1.0"
