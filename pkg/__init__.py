"""
untangle: interpenetration repair for triangle meshes

untangle finds edge-face intersections between two meshes, builds penetration
stencils against the oriented mesh and moves the offending vertices with a
mass-weighted minimum-displacement projection, repeating until the meshes are
penetration-free. A small mass-spring harness drives the shipped experiments.
"""

__version__ = "0.1.0"
