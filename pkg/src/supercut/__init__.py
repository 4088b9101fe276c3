"""Scalable panoptic segmentation of 3D point clouds by graph clustering."""

from .core import (IGNORE, ClassTable, ClusteringParams, NodeSignal,
                   PanopticLabels, PointCloud, normalize_scores,
                   validate_ground_truth)
from .cutpursuit import (Partition, binary_split, dissimilarity, energy,
                         optimal_component_value, solve_gmp,
                         solve_piecewise_constant)
from .errors import DataError, NumericError, ParameterError, SupercutError
from .graphs import AdjacencyGraph, build_knn_graph, superpoint_adjacency
from .matchbench import (CostMatrix, bench_matching, hungarian_assign,
                         synthetic_cost_matrix)
from .metrics import (PanopticMetrics, agreement_loss, class_loss,
                      combined_loss, miou, panoptic_quality, precision_recall)
from .panoptic import (PipelineConfig, PipelineResult, apply_weights,
                       clusters_to_panoptic, edge_weight, grid_search,
                       run_pipeline)
from .scenegen import SceneSpec, default_class_table, generate_scene, oracle_signals
from .superpoints import (SuperpointPartition, compute_superpoints,
                          majority_labels, pointwise_agreement,
                          propagate_to_points, true_agreement, true_agreements)

__version__ = "0.1.0"
