"""Request quality assurance for public code review.

Pipeline: ingest a posts dump, build a labeled corpus, turn code snippets
into program dependence graphs, assemble mask-fill prompts with knowledge
prefixes, train/serve a mask-fill backend, and score predictions.
"""

__version__ = "0.1.0"
