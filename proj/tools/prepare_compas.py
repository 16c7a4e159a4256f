#!/usr/bin/env python3
# Copyright 2026 The disagree Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds data/compas.csv from ProPublica's compas-scores-two-years.csv.

Rows are filtered the same way as ProPublica's original analysis notebook
(screening within 30 days of arrest, known recidivism outcome, no ordinary
traffic offences, a scored assessment). Seven numerically encoded features
are kept; the label is 1 when the COMPAS risk-of-recidivism score text is
"High" and 0 otherwise.

Usage: prepare_compas.py compas-scores-two-years.csv data/compas.csv
"""

import sys

import pandas as pd


FEATURES = [
    "age",
    "sex_male",
    "race_african_american",
    "priors_count",
    "juvenile_count",
    "charge_degree_felony",
    "length_of_stay",
]
LABEL = "high_risk"


def main(src, dst):
    df = pd.read_csv(src)
    df = df[(df.days_b_screening_arrest <= 30)
            & (df.days_b_screening_arrest >= -30)
            & (df.is_recid != -1)
            & (df.c_charge_degree != "O")
            & (df.score_text != "N/A")]
    stay = pd.to_datetime(df.c_jail_out) - pd.to_datetime(df.c_jail_in)
    out = pd.DataFrame({
        "age": df.age,
        "sex_male": (df.sex == "Male").astype(int),
        "race_african_american": (df.race == "African-American").astype(int),
        # the raw header repeats priors_count; pandas keeps the first as-is
        "priors_count": df.priors_count,
        "juvenile_count": df.juv_fel_count + df.juv_misd_count
        + df.juv_other_count,
        "charge_degree_felony": (df.c_charge_degree == "F").astype(int),
        "length_of_stay": (stay.dt.total_seconds() / 86400.0).round(4),
        LABEL: (df.score_text == "High").astype(int),
    })
    out.to_csv(dst, index=False)
    print(f"wrote {len(out)} rows to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
