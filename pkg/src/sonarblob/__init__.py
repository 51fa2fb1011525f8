"""Detection of frequency-diverse echo blobs in active-sonar point clouds.

Processing chain: matched filter and thresholding (:mod:`.signalproc`),
spectral information distances (:mod:`.infodist`), a velocity-gated affinity
graph (:mod:`.graphbuild`), spectral clustering with model-order selection
(:mod:`.cluster`) and a connectivity/entropy rule (:mod:`.classify`).
:mod:`.simulate` and :mod:`.evaluate` generate seeded scenarios and score
detections against ground truth.
"""

from .classify import (
    CLUTTER,
    TARGET,
    ClusterReport,
    calibrate_thresholds,
    classify_clusters,
    connectivity,
    decide,
    median_entropy,
)
from .cluster import Clustering, kmeans, partition_cost, select_model_order, spectral_embed
from .config import RunConfig, load_config, save_config
from .errors import NumericalError, ParameterError, SonarBlobError
from .evaluate import (
    GroundTruth,
    MetricsTable,
    SimulationSetup,
    SweepGrid,
    aggregate,
    point_ground_truth,
    scenario_detection,
    sweep,
)
from .graphbuild import AffinityGraph, AffinityParams, build_graph, edge_weight, pair_distance
from .infodist import joint_entropy, marginal_entropy, mutual_information, nid
from .pipeline import BlockResult, DetectorConfig, process_block
from .signalproc import (
    ChirpSpec,
    EchoPoint,
    PingRecord,
    PointCloud,
    build_point_cloud,
    extract_spectrum,
    interference_region,
    make_chirp,
    matched_filter,
    spectral_entropy,
    threshold_detect,
)
from .simulate import (
    ClutterBank,
    Scenario,
    ScenarioConfig,
    SyntheticClutter,
    gen_clutter_synthetic,
    gen_impulse,
    gen_path,
    make_scenario,
    set_scr,
    synth_block,
    synth_ping,
)

__version__ = "0.1.0"
