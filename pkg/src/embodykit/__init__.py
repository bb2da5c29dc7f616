"""embodykit: developmental embodiment numerics.

Growing body model, developing visual acuity with foveation,
sensorimotor delay lines, hinge-tree rigid-body dynamics, task-priority
operational-space control, and seeded procedural scene generation.
"""

__version__ = "0.1.0"
