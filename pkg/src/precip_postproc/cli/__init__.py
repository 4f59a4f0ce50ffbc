"""
Batch entry points.

Modules:
- config: YAML experiment files with line-precise validation, seed/worker resolution
- commands: datagen, train, predict, fit-tail, verify and report
- main: argparse front end and exit-code mapping
"""
