"""nctindex: symbolic + numeric engine for the conformally twisted index
computation on the noncommutative two-torus."""

from .scalars import Scalar
from .ncalg import Atom, B0Node, DmNode, Expr, apply_delta, apply_twist

__all__ = [
    "Scalar", "Atom", "B0Node", "DmNode", "Expr", "apply_delta", "apply_twist",
]
