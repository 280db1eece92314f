"""Numerical laboratory for quenched limit laws of random interval maps.

The package simulates i.i.d. random compositions of interval maps (the
intermittent LSV family and a doubling-map baseline), discretizes their
transfer operators on a uniform grid, builds the induced return-time
structure on [1/2, 1], and statistically verifies the quenched CLT / LIL /
functional-CLT consequences of the almost-sure invariance principle.
"""

__version__ = "0.1.0"
