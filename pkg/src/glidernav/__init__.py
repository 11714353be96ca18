"""Flow-aware waypoint guidance for underwater gliders.

Subsystems: coordinate handling (:mod:`.geo`), flow sources
(:mod:`.flowfield`), model bias correction (:mod:`.fusion`), the dive
simulator (:mod:`.simulator`), flow-cancelling waypoint tracking
(:mod:`.tracking`), grid planning over the whole field (:mod:`.planning`),
the shore protocol and pilot loop (:mod:`.formats`, :mod:`.dockserver`),
flow comparison (:mod:`.flowcmp`), and mission orchestration
(:mod:`.config`, :mod:`.mission`, :mod:`.cli`).
"""

from .flowfield import FlowVector
from .geo import LatLon, LocalVec

__all__ = ["LatLon", "LocalVec", "FlowVector"]

__version__ = "0.1.0"
