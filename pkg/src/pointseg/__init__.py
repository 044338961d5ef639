"""Nuclei instance-segmentation labels from point annotations."""

from .datasets import DatasetManifest, SynthConfig, TileEntry, mix_labels, synth_corpus, synth_tile
from .geometry import VoronoiPartition, distance_transform, voronoi_partition
from .harness import SweepSpec, run_sweep
from .kmeans import LloydKMeans
from .metrics import DQReport, dice, dq_classic, dq_point, pool_reports
from .perturb import PerturbConfig, PointPerturber, perturb_pointset, shift_point
from .postproc import InstanceReconstructor, PostprocConfig, instances_from_predictions
from .pseudolabel import (
    KMeansConfig,
    PseudoLabelConfig,
    PseudoLabeler,
    color_kmeans_labels,
    combine_pseudo_label,
    distance_based_labels,
    generate_pseudo_labels,
    refine_pseudo_label,
    split_instances,
)
from .raster import area, centroid, connected_components, dilate
from .targets import HoverMapEncoder, HoverMaps, build_training_record, centroid_targets, hover_maps

__version__ = "0.1.0"
