"""Search-based robustness testing for object detectors.

Finds minimal, localized Gaussian-patch perturbations that degrade or break
black-box object detection, via NSGA-II over a 7-parameter patch genome
with three minimized objectives (matched confidence, matched IoU,
perturbation budget), plus a failure taxonomy, metamorphic stability
analysis, hypervolume/nonparametric statistics, and a deterministic
synthetic detector for oracle-grade verification.
"""

from .geometry import BoundingBox, RoiRegion, build_roi, iou, roi_contains
from .perturbation import (
    EmptyRoiError,
    GenomeBounds,
    MaskGrid,
    PerturbationGenome,
    apply_perturbation,
    gaussian_mask,
    genome_from_csv_fields,
    genome_to_csv_fields,
    repair_genome,
    sample_genome,
)
from .detection import (
    Annotation,
    DatasetFormatError,
    DatasetItem,
    Detection,
    Matching,
    best_same_class_match,
    greedy_match,
    load_dataset,
)
from .detectors import (
    Detector,
    DetectorError,
    DiskSpec,
    ExternalDetector,
    ProtocolError,
    SyntheticDetector,
    SyntheticDetectorParams,
    SyntheticSceneSpec,
    build_detector,
    detect,
    external_detect,
    render_synthetic_scene,
    synthetic_detect,
)
from .objectives import (
    EvaluatedCandidate,
    ObjectiveVector,
    budget_objective,
    confidence_objective,
    evaluate_candidate,
    localization_objective,
)
from .search import (
    ParetoArchive,
    SearchConfig,
    crowding_distance,
    dominates,
    nondominated_sort,
    nsga2_run,
    random_search_run,
)
from .failures import (
    FAILURE_TYPES,
    STABILITY_CATEGORIES,
    FailureRecord,
    FailureThresholds,
    StabilityDeviation,
    StabilityThresholds,
    categorize_stability,
    classify_failures,
    failure_occurrences,
    failure_rate,
    is_violation,
    stability_deviation,
)
from .stats import (
    HvConfig,
    TestResult,
    hypervolume,
    mann_whitney_u,
    rank_biserial,
    vargha_delaney,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"

from .campaign import (  # noqa: E402  (campaign pulls in most of the above)
    ArchiveRow,
    CampaignConfig,
    CampaignError,
    CampaignReport,
    CandidateRow,
    TransferabilityResult,
    archive_rows_from_report,
    replay_genome,
    run_campaign,
    transferability_matrix,
)
from .reporting import analyze, emit_reports, load_archive_rows  # noqa: E402
from .scenes import (  # noqa: E402
    NamedScene,
    items_from_scenes,
    load_scene_suite,
    make_random_scene_suite,
    save_scene_suite,
    write_synthetic_dataset,
)
