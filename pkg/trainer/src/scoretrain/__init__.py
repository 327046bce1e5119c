"""Training side of the compressive-reconstruction toolkit.

Produces weight files in the portable "CSSM" container that the
reconstruction library consumes; the file format is the only contract
between the two packages.
"""

from .model import EpsilonMlp, export_weight_bytes, time_embedding_table
from .phantoms import synth_particles
from .train import TrainSpec, TrainingDiverged, train

__all__ = [
    "EpsilonMlp",
    "TrainSpec",
    "TrainingDiverged",
    "export_weight_bytes",
    "synth_particles",
    "time_embedding_table",
    "train",
]
