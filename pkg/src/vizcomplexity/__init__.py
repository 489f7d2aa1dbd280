"""Visual-complexity measurement suite.

Subpackages cover image decoding (imagecore), the twelve complexity
metrics (pixmetrics, objmetrics), pairwise-comparison score inference
(ranking), statistical attribution (attribution), and a study-hosting
HTTP service (studysvc).
"""

__version__ = "0.1.0"
