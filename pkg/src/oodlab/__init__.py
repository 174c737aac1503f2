"""oodlab: a self-contained OOD-detection training laboratory.

Trains a small (K+1)-class MLP with outlier exposure, selecting training
outliers from an auxiliary pool with one of five strategies (random, greedy,
biased, uniform-over-clusters, or per-cluster most-informative), and
evaluates detectors with FPR95/AUROC against brute-force-verifiable metrics.
"""

from .clustering import (
    ClusterAssignment,
    assign_to_nearest,
    calinski_harabasz,
    kmeans_normalized,
    kmeans_plusplus_seed,
)
from .data import (
    EmbeddingDataset,
    GaussianSpec,
    LabeledBatch,
    ToyBenchmark,
    ToyConfig,
    candidate_batches,
    generate_toy,
    load_embeddings,
    save_embeddings,
    toy_to_embeddings,
)
from .evaluation import (
    EvalReport,
    auroc,
    build_report,
    export_report,
    fpr_at_tpr,
    id_accuracy,
    read_report,
    threshold_at_tpr,
)
from .harness import (
    ComparisonResult,
    ExperimentConfig,
    RunArtifacts,
    cluster_histogram,
    compare,
    parse_config_file,
    train,
)
from .model import (
    Checkpoint,
    MlpModel,
    SgdState,
    backward,
    forward,
    forward_cached,
    init_mlp,
    init_sgd_state,
    load_checkpoint,
    lr_at_epoch,
    save_checkpoint,
    sgd_step,
)
from .numeric import (
    child_rng,
    child_seed,
    l2_normalize,
    logsumexp,
    make_rng,
    matmul,
    normalize_rows,
    softmax,
)
from .sampling import (
    CandidateBatch,
    SelectedOutliers,
    diversity_delta,
    sample_biased,
    sample_dos,
    sample_greedy,
    sample_random,
    sample_uniform_clusters,
)
from .scoring import (
    LossValue,
    absent_category_loss,
    absent_category_score,
    absent_category_scores,
    energy_reg_loss,
    energy_score,
    energy_scores,
    msp_score,
    msp_scores,
    oe_uniform_loss,
)

__version__ = "0.1.0"
