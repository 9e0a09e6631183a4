"""Adaptive vibrotactile spatial-acuity testing engine."""

from .psymodel import (
    NOT_REACHED,
    CurveSamples,
    GridConfig,
    ParameterGrid,
    WeibullParams,
    build_grid,
    eval_weibull,
    invert_curve,
)
from .bape import (
    CandidateSet,
    LikelihoodTable,
    Posterior,
    entropy,
    expected_params,
    postmean_curve,
    predict_correct,
    select_next,
    update,
)
from .apparatus import ApparatusConfig, Orientation, SimulatedApparatus, Task
from .protocol import Phase, Session, SessionConfig, TrialRecord, start_session
from .observer import ObserverKind, ObserverModel, respond

__version__ = "0.1.0"
