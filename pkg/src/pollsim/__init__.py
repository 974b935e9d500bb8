"""Synthetic issue polling with chat LLMs, compared against human survey data."""

from pollsim.demographics import (
    CrosstabKey,
    DemographicProfile,
    DemographicSchema,
    SamplingPlan,
    age_interval_label,
    build_plan,
    enumerate_cells,
)
from pollsim.questionnaire import Question, Questionnaire, ResponseScale, load_questionnaire
from pollsim.prompting import PromptContext, render_prompt

__version__ = "0.1.0"

__all__ = [
    "CrosstabKey",
    "DemographicProfile",
    "DemographicSchema",
    "PromptContext",
    "Question",
    "Questionnaire",
    "ResponseScale",
    "SamplingPlan",
    "age_interval_label",
    "build_plan",
    "enumerate_cells",
    "load_questionnaire",
    "render_prompt",
]
