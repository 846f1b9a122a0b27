"""Desk-scale planar neuromusculoskeletal lab for hip-exoskeleton assistance.

Trains a privileged teacher policy on a muscle-driven planar biped, distills
it into a gyroscope-only student network, and quantifies assistance effects
with gait-cycle metrics.
"""

__version__ = "0.1.0"
