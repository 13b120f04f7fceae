"""Feature-importance driven adaptation of eye-tracking areas of interest."""

from aoiadapt.aoi_map import AOIMap, SubAOISplit, centroid_of, split_sub_aois
from aoiadapt.gaze_data import Dataset, GazeRecording, load_dataset

__version__ = "0.1.0"

__all__ = [
    "AOIMap",
    "Dataset",
    "GazeRecording",
    "SubAOISplit",
    "centroid_of",
    "load_dataset",
    "split_sub_aois",
]
