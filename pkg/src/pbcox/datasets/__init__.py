"""Bundled example datasets.

Provenance note: these CSVs are *synthetic replicas*, not the original
study data. The build environment has no access to the R data archives
that distribute the male laryngeal cancer study (n=90) and the NCCTG
lung cancer study (n=228), so stand-ins were generated from Cox-Weibull
models whose sample sizes, covariate layouts, censoring fractions, tie
patterns and coefficient magnitudes mirror the published analyses. They
exercise every pipeline the originals would; substitute the real CSVs
(same column names) to reproduce published numbers.

``larynx.csv``: time (years, 0.1 resolution), status, age, diagyr,
stage, stage2/3/4 indicators. The conventional analysis uses age,
stage3, stage4.

``lung.csv``: time (days), status, sex (1=female), ph_ecog, ph_karno,
pat_karno, wt_loss; 18 rows carry missing covariate cells, matching the
missingness pattern of the original.
"""

from pathlib import Path

_HERE = Path(__file__).parent

LARYNX_PATH = _HERE / "larynx.csv"
LUNG_PATH = _HERE / "lung.csv"

LARYNX_COVARIATES = ["age", "stage3", "stage4"]
LUNG_COVARIATES = ["sex", "ph_ecog", "ph_karno", "pat_karno", "wt_loss"]


def load_larynx():
    """Laryngeal-cancer replica with covariates age, stage3, stage4."""
    from ..survival import load_csv

    return load_csv(LARYNX_PATH, "time", "status", LARYNX_COVARIATES)


def load_lung():
    """Lung-cancer replica; returns (dataset, n_dropped).

    The fixture ships with the original's missingness pattern; rows with a
    missing covariate cell are dropped and counted.
    """
    from ..survival import load_csv_dropping_missing

    return load_csv_dropping_missing(LUNG_PATH, "time", "status", LUNG_COVARIATES)
