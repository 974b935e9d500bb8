"""Render the persona prompt for one (question, profile) pair."""

from __future__ import annotations

from dataclasses import dataclass

from pollsim.demographics import DemographicProfile, age_interval_label
from pollsim.questionnaire import Question

DEFAULT_SYSTEM_PROMPT = "You are a helpful assistant"

# Word order and quoting are fixed; the score line precedes the letter.
USER_TEMPLATE = (
    "Please write a 1 paragraph letter to the editor from the perspective of a politically "
    "{ideology} {gender} in the age range of {age} years who identifies as {race} expressing "
    'a clear point of view on the policy proposal to: "{issue}". Before the letter, summarize '
    'their position with a "Position score:" statement followed by a single number (strictly '
    "numeric, with no other description) representing the person's position on the issue on a "
    '{cardinality}-point scale, where 1 represents the position "{low_label}" and {cardinality} '
    'represents the position "{high_label}".'
)


@dataclass(frozen=True)
class PromptContext:
    profile: DemographicProfile
    question: Question
    rendered_system: str
    rendered_user: str

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.rendered_system},
            {"role": "user", "content": self.rendered_user},
        ]


def render_prompt(
    question: Question,
    profile: DemographicProfile,
    system_prompt: str = DEFAULT_SYSTEM_PROMPT,
) -> PromptContext:
    scale = question.scale
    user = USER_TEMPLATE.format(
        ideology=profile.ideology,
        gender=profile.gender,
        age=age_interval_label(profile.age_bin),
        race=profile.race,
        issue=question.prompt_text,
        cardinality=scale.cardinality,
        low_label=scale.low_label,
        high_label=scale.high_label,
    )
    return PromptContext(
        profile=profile, question=question, rendered_system=system_prompt, rendered_user=user
    )
