"""Anchor-word visual storytelling pipeline.

Library layout:

- ``tensor`` / ``optim`` / ``checkpoint``: float64 autodiff core, Adam,
  binary parameter serialization
- ``corpus`` / ``features``: dataset model, tokenization, vocabulary,
  anchor-word extraction, SAFV feature files, synthetic corpora
- ``model``: fusion MLP + BiGRU encoder + GRU decoder + anchor predictor
- ``training``: two-stage optimization and the ablation harness
- ``decoding``: greedy and beam-search generation
- ``metrics``: multi-reference BLEU / ROUGE-L / CIDEr / METEOR-lite and
  the leave-one-out human baseline
- ``cli``: the ``storyanchor`` command-line entry point
"""

__version__ = "0.1.0"
