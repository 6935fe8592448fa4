"""Distributed online convex optimization with time-varying constraints.

Library layout: `network` (graphs, mixing weights), `mirror` (Bregman
machinery and projections), `problems` (generated online problem suites),
`algorithm` (the primal-dual mirror-descent engine) and `evaluation`
(comparators, regret, fit and bound checks). `cli` wires them together.
"""

__version__ = "0.1.0"
