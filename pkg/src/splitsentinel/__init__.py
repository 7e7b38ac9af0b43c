"""Anomaly detection with autoencoders divided along learned feature correlations."""
from .autoencoder import AEConfig, AEModel, anomaly_score, new_model, reconstruct, train
from .attribution import ImportanceMatrix, contributions, importance_matrix, reference_pass
from .ensemble import DividedDetector, SchemaChange, apply_schema_change, score, score_batch, train_divided
from .evaluation import auroc, run_random_baseline, run_sweep
from .schema import Dimension, FeatureMatrix, FeatureSchema
from .separation import Partition, binarize, group_dimensions, random_partition, threshold_from_ratio

__version__ = "0.1.0"
