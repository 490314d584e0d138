"""Mesh TWDM-PON fronthaul toolkit.

Models a passive optical network whose splitter nodes reflect selected
wavelengths, so endpoints (RU sites, MEC nodes) can talk to each other
directly instead of only to the central office.  The package covers:

* optical power budgets for the reflective paths (``powerbudget``),
* synthetic network layouts with a two-stage splitter hierarchy (``topology``),
* load-dependent fronthaul bit rates per functional split (``traffic``),
* upstream latency of a vPON slice by discrete-event simulation (``despon``)
  and by a closed-form queueing approximation (``latmodel``),
* minimum-MEC slice optimization with iterative latency cuts (``maio``),
* a FastAPI service plus a thin CLI client (``service``, ``cli``).
"""

__version__ = "0.1.0"
