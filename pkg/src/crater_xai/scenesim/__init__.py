from .field import CraterEntry, generate_crater_field
from .trajectory import Trajectory, generate_trajectory
from .render import RenderOptions, render_frame
from .project import CraterLabel2D, project_craters
from .dataset import (
    DatasetManifest,
    FrameRecord,
    TrajectoryRecord,
    generate_dataset,
    read_dataset,
    write_dataset,
)

__all__ = [
    "CraterEntry",
    "CraterLabel2D",
    "DatasetManifest",
    "FrameRecord",
    "RenderOptions",
    "Trajectory",
    "TrajectoryRecord",
    "generate_crater_field",
    "generate_dataset",
    "generate_trajectory",
    "project_craters",
    "read_dataset",
    "render_frame",
    "write_dataset",
]
