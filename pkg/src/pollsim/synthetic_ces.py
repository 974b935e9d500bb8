"""Generator for the shipped CES-like fixture (synthetic rows, no real microdata).

Column names and response options mirror the CES 2022 Common Content; the
responses are drawn from a simple latent model with ideology, age, gender
and race effects so that every question has a visible ideological gradient.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

COLUMNS = [
    "caseid", "birthyr", "gender", "race", "ideo5",
    "CC22_307", "CC22_320c", "CC22_321_1", "CC22_327d", "CC22_332f", "CC22_333e", "CC22_330e",
]

IDEO = ["Very liberal", "Liberal", "Moderate", "Conservative", "Very conservative", "Not sure"]
IDEO_P = [0.12, 0.19, 0.29, 0.22, 0.13, 0.05]
GENDER = ["Man", "Woman", "Non-binary", "Other"]
GENDER_P = [0.47, 0.50, 0.02, 0.01]
RACE = ["White", "Black", "Hispanic", "Asian", "Native American", "Middle Eastern",
        "Two or more races", "Other"]
RACE_P = [0.66, 0.12, 0.11, 0.05, 0.01, 0.01, 0.03, 0.01]
POLICE = ["Mostly safe", "Somewhat safe", "Somewhat unsafe", "Mostly unsafe"]
APPROVE = ["Strongly approve", "Somewhat approve", "Somewhat disapprove", "Strongly disapprove"]


def _ordinal(rng: np.random.Generator, mean: float, labels: list[str], sd: float = 0.9) -> str:
    levels = np.arange(1, len(labels) + 1)
    w = np.exp(-0.5 * ((levels - mean) / sd) ** 2)
    return labels[rng.choice(len(labels), p=w / w.sum())]


def _binary(rng: np.random.Generator, p_high: float, low: str, high: str) -> str:
    return high if rng.random() < min(max(p_high, 0.02), 0.98) else low


def generate_rows(n: int = 1000, seed: int = 2022, fielding_year: int = 2022) -> list[dict[str, str]]:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        ideo = IDEO[rng.choice(len(IDEO), p=IDEO_P)]
        z = IDEO.index(ideo) - 2 if ideo != "Not sure" else 0  # -2 very liberal .. +2 very conservative
        age = int(rng.integers(18, 91))
        gender = GENDER[rng.choice(len(GENDER), p=GENDER_P)]
        race = RACE[rng.choice(len(RACE), p=RACE_P)]
        young = age <= 30
        woman = gender == "Woman"
        nonwhite = race != "White"

        police = _ordinal(rng, 2.0 - 0.35 * z - 0.01 * (age - 45) + 0.35 * nonwhite, POLICE)
        scotus = _ordinal(rng, 2.6 - 0.45 * z, APPROVE)
        row = {
            "caseid": str(1200000 + i),
            "birthyr": str(fielding_year - age),
            "gender": gender,
            "race": race,
            "ideo5": ideo,
            "CC22_307": "Not sure" if rng.random() < 0.04 else police,
            "CC22_320c": "Not sure" if rng.random() < 0.06 else scotus,
            # selected = agrees the US should stay out
            "CC22_321_1": _binary(rng, 0.72 - 0.07 * z, "selected", "not selected"),
            "CC22_327d": _binary(rng, 0.22 + 0.06 * z + 0.08 * woman, "Support", "Oppose"),
            "CC22_332f": _binary(rng, 0.62 - 0.17 * z - 0.03 * woman, "Support", "Oppose"),
            "CC22_333e": _binary(rng, 0.42 - 0.17 * z + 0.10 * young, "Support", "Oppose"),
            "CC22_330e": _binary(rng, 0.16 + 0.06 * z, "selected", "not selected"),
        }
        rows.append(row)
    return rows


def write_fixture(path: str | Path, n: int = 1000, seed: int = 2022) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(generate_rows(n, seed))
    return path


if __name__ == "__main__":
    import sys

    write_fixture(sys.argv[1] if len(sys.argv) > 1 else "ces_synthetic_2022.csv")
