"""
untangle application layer: settings, report models, phase timing and the CLI.
"""
