"""Task-aware interaction fluency model for remote collaborative AR.

Closed-form scores under delay and stalling, a session simulator, least-squares
fitting of the model constants, and the evaluation metrics used to compare it
against task-agnostic baselines.
"""
from .model import (
    ImpairmentCondition,
    Mode,
    baseline1_predict,
    baseline2_predict,
    baseline3_predict,
    predict,
    q_combined,
    q_delay,
    q_stall,
    stall_ratio,
    tpifm_batch,
    tpifm_predict,
    v2_from_jnd,
    v4_from_jnd,
)
from .params import GENERALIZED, TASKS, ModelParamSet, TaskProfile

__version__ = "0.1.0"

__all__ = [
    "GENERALIZED", "ImpairmentCondition", "Mode", "ModelParamSet", "TASKS", "TaskProfile",
    "baseline1_predict", "baseline2_predict", "baseline3_predict", "predict", "q_combined",
    "q_delay", "q_stall", "stall_ratio", "tpifm_batch", "tpifm_predict", "v2_from_jnd",
    "v4_from_jnd",
]
