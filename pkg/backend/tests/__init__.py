"""
Tests Package for untangle

This package contains the test modules for the untangle system.
It covers the mesh core, collision detection, stencils, the response solve,
diffusion, the untangle loop, the simulation harness and the CLI.
"""
