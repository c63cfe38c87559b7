"""Desk-scale simulator of an atomic-frequency-comb optical quantum memory.

Subpackages/modules:

- :mod:`afcmem.signals` -- time/frequency grids and complex pulse envelopes
- :mod:`afcmem.comb` -- comb profiles, transfer functions, analytic efficiency
- :mod:`afcmem.memory` -- storage simulation, decoherence, decay fitting
- :mod:`afcmem.multiplex` -- serrodyne shifting, filter cavity, crosstalk
- :mod:`afcmem.repeater` -- spin-wave scheduling and entanglement-rate model
- :mod:`afcmem.quantumstats` -- photon-pair coincidence Monte Carlo and g2
- :mod:`afcmem.cli` -- experiment runners and CSV emission
"""

__version__ = "0.1.0"
