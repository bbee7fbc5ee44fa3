"""Built-in benchmark problems.

Geometry, supports, tractions and the volume budget for the four
standard cases.  All use lambda = mu = 1 and unit load magnitude
unless overridden; loaded boundary strips default to 20% of their
edge length.
"""

from dataclasses import dataclass

from .fem import BoundaryConditions, Dirichlet, EdgeSpan, Neumann, NodePin
from .laminate import IsotropicMaterial
from .quadmesh import uniform_mesh

SCENARIO_NAMES = ("carrier-plate", "cantilever", "bridge", "l-shape")


@dataclass(frozen=True)
class Scenario:
    name: str
    lower: tuple
    upper: tuple
    root_shape: tuple
    active_roots: object      # frozenset of root cells, or None for all
    bc: BoundaryConditions
    material: IsotropicMaterial
    volume_fraction: float

    def mesh(self, level):
        return uniform_mesh(self.lower, self.upper, level,
                            root_shape=self.root_shape,
                            active_roots=self.active_roots)

    @property
    def domain_area(self):
        full = (self.upper[0] - self.lower[0]) \
            * (self.upper[1] - self.lower[1])
        if self.active_roots is None:
            return full
        nx, ny = self.root_shape
        return full * len(self.active_roots) / (nx * ny)


def builtin_scenario(name, volume=None, lam=1.0, mu=1.0, load=1.0):
    mat = IsotropicMaterial(lam=lam, mu=mu)
    if name == "carrier-plate":
        # unit square, clamped bottom, tangential traction on the top
        bc = BoundaryConditions(
            dirichlet=(Dirichlet(EdgeSpan("y", 0.0, 0.0, 1.0)),),
            neumann=(Neumann(EdgeSpan("y", 1.0, 0.0, 1.0),
                             g=(load, 0.0)),))
        return Scenario(name, (0.0, 0.0), (1.0, 1.0), (1, 1), None, bc,
                        mat, volume if volume is not None else 0.33)
    if name == "cantilever":
        # 2x1 strip, clamped left edge, downward load on the middle
        # fifth of the right edge
        bc = BoundaryConditions(
            dirichlet=(Dirichlet(EdgeSpan("x", 0.0, 0.0, 1.0)),),
            neumann=(Neumann(EdgeSpan("x", 2.0, 0.4, 0.6),
                             g=(0.0, -load)),))
        return Scenario(name, (0.0, 0.0), (2.0, 1.0), (2, 1), None, bc,
                        mat, volume if volume is not None else 0.50)
    if name == "bridge":
        # 2x1 strip on vertical rollers at both ends of the bottom
        # edge, pinned at the origin, loaded across the middle
        bc = BoundaryConditions(
            dirichlet=(Dirichlet(EdgeSpan("y", 0.0, 0.0, 0.4),
                                 comps=(1,)),
                       Dirichlet(EdgeSpan("y", 0.0, 1.6, 2.0),
                                 comps=(1,))),
            pins=(NodePin(0.0, 0.0, comps=(0,)),),
            neumann=(Neumann(EdgeSpan("y", 0.0, 0.4, 1.6),
                             g=(0.0, -load)),))
        return Scenario(name, (0.0, 0.0), (2.0, 1.0), (2, 1), None, bc,
                        mat, volume if volume is not None else 0.33)
    if name == "l-shape":
        # unit square without its upper-right quadrant, clamped bottom,
        # downward load on part of the right edge
        bc = BoundaryConditions(
            dirichlet=(Dirichlet(EdgeSpan("y", 0.0, 0.0, 1.0)),),
            neumann=(Neumann(EdgeSpan("x", 1.0, 0.2, 0.3),
                             g=(0.0, -load)),))
        return Scenario(name, (0.0, 0.0), (1.0, 1.0), (2, 2),
                        frozenset({(0, 0), (1, 0), (0, 1)}), bc, mat,
                        volume if volume is not None else 0.33)
    raise ValueError("unknown scenario %r; choose from %s"
                     % (name, ", ".join(SCENARIO_NAMES)))
