"""Conversational tables engine.

Retrieves the table relevant to an opening query, ranks its cells against
follow-up queries using dialogue history, and generates knowledge-grounded
answers through a pluggable generation provider.
"""

__version__ = "0.1.0"
