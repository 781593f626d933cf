"""delayosc: time-delayed feedback self-oscillator simulation toolkit.

Three mutually cross-validating solution layers:

* :mod:`delayosc.dde` — classical delay differential equations by the
  method of steps;
* :mod:`delayosc.stability` — characteristic-equation analysis (oscillation
  boundary curves, critical delays, leading roots);
* :mod:`delayosc.fock` / :mod:`delayosc.cascade` — the full quantum master
  equation on a cascaded chain of truncated Fock modes with amplified
  feedback;
* :mod:`delayosc.moments` — cumulant-truncated moment dynamics of the same
  chain.

The command line front end lives in :mod:`delayosc.cli`.
"""

__version__ = "0.1.0"

from . import errors  # noqa: F401
