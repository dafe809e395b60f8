"""Face-driven virtual pointer engine.

Detects the between-the-eyes point with a six-segmented rectangle filter
over integral images, tracks the nose tip through accumulated intensity
profiles and template matching, reads eye blinks from frame differences,
and turns nose motion plus voluntary blinks into virtual pointer moves
and clicks.
"""

__version__ = "0.1.0"
