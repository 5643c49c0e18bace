"""Dense ReLU networks: piecewise-linear geometry, closed-form spectra,
gradient attacks and a post-averaging defense."""

from .nn import (
    DenseLayer,
    ForwardTrace,
    Network,
    SgdConfig,
    forward,
    forward_batch,
    init_network,
    input_gradient,
    load_model,
    predict_topk,
    save_model,
    train,
)
from .geometry import (
    Decomposition,
    HyperplaneDistance,
    SimplexTerm,
    activation_pattern,
    approx_layer_distances,
    crossing_count,
    decompose_2d,
    evaluate_decomposition,
    evaluate_term,
    exact_distances,
    fluctuation_scale,
    max_region_count,
)
from .spectral import (
    QuadConfig,
    QuadResult,
    ball_average_multiplier,
    bessel_j,
    lift_biased_network,
    network_spectrum,
    quadrature_ft,
    simplex_spectrum,
    simplex_spectrum_grad,
    spectrum_decay_report,
)
from .attacks import (
    AttackResult,
    CwConfig,
    ThreatModel,
    box_threat_model,
    cw_l2,
    deepfool,
    fgsm,
    is_adversarial,
    pgd,
)
from .defense import (
    DefenseConfig,
    DirectionSet,
    approx_directions,
    post_average_predict,
    random_directions,
    sample_points,
)
from .data import AttackedSet, LabeledDataset, generate_dataset
from .harness import (
    DefendedModel,
    EvaluationRow,
    accuracy,
    build_attacked_set,
    defence_rate,
    load_experiment_config,
    run_experiment,
)

__version__ = "0.1.0"
