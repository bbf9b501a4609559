"""Dataset ingestion, encoding, splitting, and synthetic generators.

Loaders parse the published raw files (see README for source URLs; they are
not vendored) into canonical in-memory datasets: discrete ones carry dense
0-based index sequences plus the category dictionaries that produced them,
continuous ones carry a real feature matrix with named columns.  Splitting is
a seeded shuffle; feature standardization for continuous data happens at
split time so test rows never influence the training statistics.

The synthetic generators plant known structure (independence, full
confounding, conditional independence, weak dependence at a chosen
chi-square level) and are what the test-suite oracles are built on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import IngestionError, InputError
from .probability import JointPmf

__all__ = [
    "DiscreteDataset",
    "ContinuousDataset",
    "SplitSpec",
    "encode_category",
    "decode_category",
    "load_compas",
    "load_adult",
    "load_cc",
    "split",
    "synth_discrete",
    "synth_continuous",
    "eps_dependent_joint",
    "export_discrete",
    "export_continuous",
]


@dataclass(frozen=True)
class DiscreteDataset:
    """Index-encoded samples: decision variable x, target y, sensitive d."""

    x: np.ndarray
    y: np.ndarray
    d: np.ndarray
    card_x: int
    card_y: int
    card_d: int
    encoders: dict

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.int64)
        d = np.asarray(self.d, dtype=np.int64)
        if not (x.shape == y.shape == d.shape) or x.ndim != 1:
            raise InputError("x, y, d must be equal-length 1-D index arrays")
        for name, arr, card in (("x", x, self.card_x), ("y", y, self.card_y), ("d", d, self.card_d)):
            if card < 1:
                raise InputError(f"card_{name} must be positive")
            if arr.size and (arr.min() < 0 or arr.max() >= card):
                raise InputError(f"{name} indices outside [0, {card})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.x.size

    def subset(self, indices) -> "DiscreteDataset":
        idx = np.asarray(indices)
        return DiscreteDataset(
            self.x[idx], self.y[idx], self.d[idx],
            self.card_x, self.card_y, self.card_d, self.encoders,
        )


@dataclass(frozen=True)
class ContinuousDataset:
    """Real-valued samples: feature matrix x, target y, sensitive d."""

    x: np.ndarray
    y: np.ndarray
    d: np.ndarray
    feature_names: list | None = None
    standardization: dict | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if x.ndim != 2:
            raise InputError(f"x must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or d.ndim not in (1, 2):
            raise InputError("y must be 1-D and d 1-D or 2-D")
        if not (x.shape[0] == y.shape[0] == d.shape[0]):
            raise InputError("x, y, d row counts disagree")
        for name, arr in (("x", x), ("y", y), ("d", d)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"{name} contains non-finite values")
        if self.feature_names is not None and len(self.feature_names) != x.shape[1]:
            raise InputError("feature_names length disagrees with x width")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def subset(self, indices) -> "ContinuousDataset":
        idx = np.asarray(indices)
        return ContinuousDataset(
            self.x[idx], self.y[idx], self.d[idx],
            self.feature_names, self.standardization,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Either a train fraction in (0, 1) or explicit exhaustive counts."""

    train_fraction: float | None = None
    train_count: int | None = None
    test_count: int | None = None
    seed: int = 0


def encode_category(encoders: dict, variable: str, value) -> int:
    """Index of a category under a dataset's encoder tables."""
    table = encoders[variable]
    try:
        return table.index(value)
    except ValueError:
        raise InputError(f"{value!r} is not a known {variable} category") from None


def decode_category(encoders: dict, variable: str, index: int):
    """Category for an index; inverse of :func:`encode_category`."""
    table = encoders[variable]
    if not 0 <= index < len(table):
        raise InputError(f"index {index} outside {variable} encoder of size {len(table)}")
    return table[index]


def _read_csv(path, **kwargs) -> pd.DataFrame:
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError:
        raise IngestionError(f"file not found: {path}") from None
    except pd.errors.ParserError as exc:
        raise IngestionError(f"{path}: unparseable CSV ({exc})") from None


# ---------------------------------------------------------------------------
# COMPAS
# ---------------------------------------------------------------------------

COMPAS_CHARGE_BINS = ["F", "M"]
COMPAS_PRIORS_BINS = ["0", "1-3", ">3"]
COMPAS_AGE_BINS = ["<25", "25-45", ">45"]
COMPAS_RACES = ["African-American", "Caucasian"]
_COMPAS_AGE_MAP = {
    "Less than 25": "<25",
    "25 - 45": "25-45",
    "Greater than 45": ">45",
}
_COMPAS_REQUIRED = ["c_charge_degree", "priors_count", "age_cat", "race", "two_year_recid"]
_COMPAS_FILTER_COLS = ["days_b_screening_arrest", "is_recid", "score_text"]


def _priors_bin(count: int) -> int:
    if count <= 0:
        return 0
    return 1 if count <= 3 else 2


def load_compas(path, apply_standard_filters: bool = True) -> DiscreteDataset:
    """Load the ProPublica two-year recidivism file.

    X jointly encodes (charge degree {F, M}, priors count {0, 1-3, >3}, age
    category {<25, 25-45, >45}); Y is the two-year recidivism indicator and D
    the race, restricted to African-American and Caucasian defendants.

    ``apply_standard_filters`` applies the conventional row filters (screening
    within 30 days of arrest, recidivism flag recorded, ordinary-traffic
    charges and unscored rows removed); rows whose charge degree is neither F
    nor M are always excluded because the encoding has no bin for them.
    """
    df = _read_csv(path)
    required = list(_COMPAS_REQUIRED) + (_COMPAS_FILTER_COLS if apply_standard_filters else [])
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise IngestionError(f"{path}: missing required column(s): {', '.join(missing)}")
    if apply_standard_filters:
        days = pd.to_numeric(df["days_b_screening_arrest"], errors="coerce")
        df = df[(days >= -30) & (days <= 30)]
        df = df[pd.to_numeric(df["is_recid"], errors="coerce") != -1]
        df = df[df["score_text"].astype(str) != "N/A"]
    df = df[df["c_charge_degree"].isin(COMPAS_CHARGE_BINS)]
    df = df[df["race"].isin(COMPAS_RACES)]
    if len(df) == 0:
        raise IngestionError(f"{path}: no rows left after filtering")

    charge = df["c_charge_degree"].map({c: i for i, c in enumerate(COMPAS_CHARGE_BINS)})
    priors = pd.to_numeric(df["priors_count"], errors="coerce")
    if priors.isna().any():
        raise IngestionError(f"{path}: non-numeric priors_count")
    priors = priors.astype(int).map(_priors_bin)
    age_labels = df["age_cat"].map(_COMPAS_AGE_MAP)
    if age_labels.isna().any():
        bad = sorted(set(df["age_cat"][age_labels.isna()]))
        raise IngestionError(f"{path}: unrecognized age_cat value(s): {bad}")
    age = age_labels.map({c: i for i, c in enumerate(COMPAS_AGE_BINS)})

    x = (charge.to_numpy() * 9 + priors.to_numpy() * 3 + age.to_numpy()).astype(np.int64)
    y = pd.to_numeric(df["two_year_recid"], errors="coerce")
    if y.isna().any() or not set(np.unique(y)).issubset({0, 1}):
        raise IngestionError(f"{path}: two_year_recid must be 0/1")
    d = df["race"].map({c: i for i, c in enumerate(COMPAS_RACES)}).to_numpy()
    encoders = {
        "x_components": ["charge_degree", "priors_bin", "age_bin"],
        "charge_degree": COMPAS_CHARGE_BINS,
        "priors_bin": COMPAS_PRIORS_BINS,
        "age_bin": COMPAS_AGE_BINS,
        "race": COMPAS_RACES,
        "label": ["0", "1"],
    }
    return DiscreteDataset(
        x, y.to_numpy(np.int64), d, card_x=18, card_y=2, card_d=2, encoders=encoders
    )


# ---------------------------------------------------------------------------
# Adult
# ---------------------------------------------------------------------------

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]
ADULT_DECADES = [f"{10 * k}s" for k in range(1, 10)]
ADULT_EDU_YEARS = [str(v) for v in range(1, 17)]
ADULT_SEXES = ["Female", "Male"]


def load_adult(path) -> DiscreteDataset:
    """Load the UCI Adult (census income) file.

    X jointly encodes (age quantized to decades, education in years); Y is
    the >50K income indicator and D the recorded gender.  Ages clamp into the
    10s..90s decade bins.  Accepts the raw headerless ``adult.data`` layout
    or a file with a header row.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except FileNotFoundError:
        raise IngestionError(f"file not found: {path}") from None
    has_header = first.split(",")[0].strip().lower() == "age"
    if has_header:
        df = _read_csv(path, skipinitialspace=True)
    else:
        df = _read_csv(path, header=None, names=ADULT_COLUMNS, skipinitialspace=True)
    missing = [c for c in ("age", "education-num", "sex", "income") if c not in df.columns]
    if missing:
        raise IngestionError(f"{path}: missing required column(s): {', '.join(missing)}")

    age = pd.to_numeric(df["age"], errors="coerce")
    edu = pd.to_numeric(df["education-num"], errors="coerce")
    if age.isna().any() or edu.isna().any():
        raise IngestionError(f"{path}: non-numeric age or education-num")
    decade_idx = np.clip(age.to_numpy(int) // 10, 1, 9) - 1
    edu_idx = np.clip(edu.to_numpy(int), 1, 16) - 1
    x = (decade_idx * 16 + edu_idx).astype(np.int64)

    income = df["income"].astype(str).str.strip().str.rstrip(".")
    valid = income.isin(["<=50K", ">50K"])
    if not valid.all():
        bad = sorted(set(income[~valid]))
        raise IngestionError(f"{path}: unrecognized income value(s): {bad}")
    y = (income == ">50K").to_numpy(np.int64)

    sex = df["sex"].astype(str).str.strip()
    valid = sex.isin(ADULT_SEXES)
    if not valid.all():
        bad = sorted(set(sex[~valid]))
        raise IngestionError(f"{path}: unrecognized sex value(s): {bad}")
    d = sex.map({c: i for i, c in enumerate(ADULT_SEXES)}).to_numpy(np.int64)

    encoders = {
        "x_components": ["age_decade", "education_years"],
        "age_decade": ADULT_DECADES,
        "education_years": ADULT_EDU_YEARS,
        "sex": ADULT_SEXES,
        "label": ["<=50K", ">50K"],
    }
    return DiscreteDataset(
        x, y, d, card_x=9 * 16, card_y=2, card_d=2, encoders=encoders
    )


# ---------------------------------------------------------------------------
# Communities & Crimes
# ---------------------------------------------------------------------------

CC_COLUMN_NAMES = [
    "state", "county", "community", "communityname", "fold",
    "population", "householdsize", "racepctblack", "racePctWhite",
    "racePctAsian", "racePctHisp", "agePct12t21", "agePct12t29", "agePct16t24",
    "agePct65up", "numbUrban", "pctUrban", "medIncome", "pctWWage",
    "pctWFarmSelf", "pctWInvInc", "pctWSocSec", "pctWPubAsst", "pctWRetire",
    "medFamInc", "perCapInc", "whitePerCap", "blackPerCap", "indianPerCap",
    "AsianPerCap", "OtherPerCap", "HispPerCap", "NumUnderPov",
    "PctPopUnderPov", "PctLess9thGrade", "PctNotHSGrad", "PctBSorMore",
    "PctUnemployed", "PctEmploy", "PctEmplManu", "PctEmplProfServ",
    "PctOccupManu", "PctOccupMgmtProf", "MalePctDivorce", "MalePctNevMarr",
    "FemalePctDiv", "TotalPctDiv", "PersPerFam", "PctFam2Par", "PctKids2Par",
    "PctYoungKids2Par", "PctTeen2Par", "PctWorkMomYoungKids", "PctWorkMom",
    "NumIlleg", "PctIlleg", "NumImmig", "PctImmigRecent", "PctImmigRec5",
    "PctImmigRec8", "PctImmigRec10", "PctRecentImmig", "PctRecImmig5",
    "PctRecImmig8", "PctRecImmig10", "PctSpeakEnglOnly",
    "PctNotSpeakEnglWell", "PctLargHouseFam", "PctLargHouseOccup",
    "PersPerOccupHous", "PersPerOwnOccHous", "PersPerRentOccHous",
    "PctPersOwnOccup", "PctPersDenseHous", "PctHousLess3BR", "MedNumBR",
    "HousVacant", "PctHousOccup", "PctHousOwnOcc", "PctVacantBoarded",
    "PctVacMore6Mos", "MedYrHousBuilt", "PctHousNoPhone", "PctWOFullPlumb",
    "OwnOccLowQuart", "OwnOccMedVal", "OwnOccHiQuart", "RentLowQ",
    "RentMedian", "RentHighQ", "MedRent", "MedRentPctHousInc",
    "MedOwnCostPctInc", "MedOwnCostPctIncNoMtg", "NumInShelters", "NumStreet",
    "PctForeignBorn", "PctBornSameState", "PctSameHouse85", "PctSameCity85",
    "PctSameState85", "LemasSwornFT", "LemasSwFTPerPop", "LemasSwFTFieldOps",
    "LemasSwFTFieldPerPop", "LemasTotalReq", "LemasTotReqPerPop",
    "PolicReqPerOffic", "PolicPerPop", "RacialMatchCommPol", "PctPolicWhite",
    "PctPolicBlack", "PctPolicHisp", "PctPolicAsian", "PctPolicMinor",
    "OfficAssgnDrugUnits", "NumKindsDrugsSeiz", "PolicAveOTWorked", "LandArea",
    "PopDens", "PctUsePubTrans", "PolicCars", "PolicOperBudg",
    "LemasPctPolicOnPatr", "LemasGangUnitDeploy", "LemasPctOfficDrugUn",
    "PolicBudgPerPop", "ViolentCrimesPerPop",
]
CC_NON_PREDICTIVE = CC_COLUMN_NAMES[:5]
CC_TARGET = "ViolentCrimesPerPop"
CC_SENSITIVE = "racepctblack"


def load_cc(path) -> ContinuousDataset:
    """Load the UCI Communities and Crime file (headerless, '?' for missing).

    The community-level crime rate is the target and the black-population
    percentage the sensitive variable.  Predictive columns containing any
    missing marker are dropped rather than imputed, so the surviving feature
    count (at most 121) is explicit in ``feature_names``.
    """
    df = _read_csv(path, header=None, na_values="?", skipinitialspace=True)
    if df.shape[1] != len(CC_COLUMN_NAMES):
        raise IngestionError(
            f"{path}: expected {len(CC_COLUMN_NAMES)} columns, found {df.shape[1]}"
        )
    df.columns = CC_COLUMN_NAMES
    for col in (CC_TARGET, CC_SENSITIVE):
        if df[col].isna().any():
            raise IngestionError(f"{path}: column {col} has missing values")

    pool = [
        c for c in CC_COLUMN_NAMES
        if c not in CC_NON_PREDICTIVE and c not in (CC_TARGET, CC_SENSITIVE)
    ]
    kept = [c for c in pool if not df[c].isna().any()]
    numeric = {}
    for col in kept + [CC_TARGET, CC_SENSITIVE]:
        values = pd.to_numeric(df[col], errors="coerce")
        bad = values.isna() & df[col].notna()
        if bad.any():
            row = int(np.argmax(bad.to_numpy()))
            raise IngestionError(f"{path}: malformed numeric cell at row {row}, column {col}")
        numeric[col] = values.to_numpy(float)

    x = np.column_stack([numeric[c] for c in kept])
    return ContinuousDataset(
        x, numeric[CC_TARGET], numeric[CC_SENSITIVE], feature_names=kept
    )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def _split_sizes(n: int, spec: SplitSpec) -> int:
    by_fraction = spec.train_fraction is not None
    by_counts = spec.train_count is not None or spec.test_count is not None
    if by_fraction == by_counts:
        raise InputError("give either train_fraction or explicit counts, not both")
    if by_fraction:
        if not 0.0 < spec.train_fraction < 1.0:
            raise InputError(f"train_fraction must be in (0, 1), got {spec.train_fraction}")
        n_train = int(round(n * spec.train_fraction))
        if n_train in (0, n):
            raise InputError("split leaves one side empty")
        return n_train
    if spec.train_count is None or spec.test_count is None:
        raise InputError("explicit split needs both train_count and test_count")
    if spec.train_count < 1 or spec.test_count < 1:
        raise InputError("split counts must be positive")
    if spec.train_count + spec.test_count != n:
        raise InputError(
            f"split counts {spec.train_count}+{spec.test_count} != {n} rows"
        )
    return spec.train_count


def split(
    dataset,
    spec: SplitSpec,
    standardize_x: bool = True,
    standardize_y: bool = False,
    standardize_d: bool = False,
):
    """Seeded shuffle-and-partition into (train, test).

    For continuous datasets the flagged fields are standardized with
    statistics computed on the training rows only, and those statistics are
    recorded on both returned datasets.
    """
    n = dataset.n
    n_train = _split_sizes(n, spec)
    perm = np.random.default_rng(spec.seed).permutation(n)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    if isinstance(dataset, DiscreteDataset):
        return dataset.subset(train_idx), dataset.subset(test_idx)

    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    stats = {}

    def standardized(field: str, tr: np.ndarray, te: np.ndarray):
        mean = tr.mean(axis=0)
        std = tr.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        stats[field] = {"mean": np.atleast_1d(mean).tolist(), "std": np.atleast_1d(std).tolist()}
        return (tr - mean) / std, (te - mean) / std

    x_tr, x_te = (train.x, test.x)
    y_tr, y_te = (train.y, test.y)
    d_tr, d_te = (train.d, test.d)
    if standardize_x:
        x_tr, x_te = standardized("x", x_tr, x_te)
    if standardize_y:
        y_tr, y_te = standardized("y", y_tr, y_te)
    if standardize_d:
        d_tr, d_te = standardized("d", d_tr, d_te)
    meta = stats or None
    return (
        ContinuousDataset(x_tr, y_tr, d_tr, dataset.feature_names, meta),
        ContinuousDataset(x_te, y_te, d_te, dataset.feature_names, meta),
    )


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

def _flip(values: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(values.size) < p, 1 - values, values)


def synth_discrete(kind: str, n: int, seed: int = 0, **params) -> DiscreteDataset:
    """Discrete samples with planted structure.

    kinds:
      - ``coins``: independent fair Y and D, X = 2*Y + D (X carries D but
        Y and D are independent).
      - ``independent``: X independent of D; X = 2*Y + noise-coin.
      - ``confounded``: D equals Y exactly.
      - ``biased``: correlated Y and D with noisy copies of both inside X;
        params p_agree (default 0.8), noise_y / noise_d (default 0.1).
      - ``eps_dependent``: (X, Y) drawn from a weakly dependent joint with
        chi-square divergence ``chi2`` (default 0.01) from the product of its
        marginals; D an independent coin.  Params card_a (4), card_b (3).
    """
    if n < 1:
        raise InputError("n must be positive")
    rng = np.random.default_rng(seed)
    if kind == "coins":
        y = rng.integers(0, 2, n)
        d = rng.integers(0, 2, n)
        x = 2 * y + d
        return DiscreteDataset(x, y, d, 4, 2, 2, {})
    if kind == "independent":
        y = rng.integers(0, 2, n)
        c = rng.integers(0, 2, n)
        d = rng.integers(0, 2, n)
        return DiscreteDataset(2 * y + c, y, d, 4, 2, 2, {})
    if kind == "confounded":
        y = rng.integers(0, 2, n)
        c = rng.integers(0, 2, n)
        return DiscreteDataset(2 * y + c, y, y.copy(), 4, 2, 2, {})
    if kind == "biased":
        p_agree = params.pop("p_agree", 0.8)
        noise_y = params.pop("noise_y", 0.1)
        noise_d = params.pop("noise_d", 0.1)
        if params:
            raise InputError(f"unknown params for kind 'biased': {sorted(params)}")
        y = rng.integers(0, 2, n)
        d = np.where(rng.random(n) < p_agree, y, 1 - y)
        x = 2 * _flip(y, noise_y, rng) + _flip(d, noise_d, rng)
        return DiscreteDataset(x, y, d, 4, 2, 2, {})
    if kind == "eps_dependent":
        chi2 = params.pop("chi2", 0.01)
        card_a = params.pop("card_a", 4)
        card_b = params.pop("card_b", 3)
        if params:
            raise InputError(f"unknown params for kind 'eps_dependent': {sorted(params)}")
        joint = eps_dependent_joint(card_a, card_b, float(np.sqrt(chi2)), seed)
        flat = rng.choice(card_a * card_b, size=n, p=joint.probs.ravel())
        x, y = np.divmod(flat, card_b)
        d = rng.integers(0, 2, n)
        return DiscreteDataset(x, y, d, card_a, card_b, 2, {})
    raise InputError(f"unknown discrete synth kind {kind!r}")


def synth_continuous(kind: str, n: int, seed: int = 0, **params) -> ContinuousDataset:
    """Continuous samples with planted structure.

    kinds:
      - ``independent``: y = x0, d = x1 with x0, x1 independent normals.
      - ``confounded``: target equals sensitive exactly; x predicts it.
      - ``planted_ci``: x and d both generated from y, so d is independent
        of x given y.  Params noise_x (0.3), noise_d (0.3).
      - ``planted_bias``: y = a*x0 + b*x1 + noise and d is a noisy copy of
        x1, so an accurate predictor leans on a d-correlated feature.  The
        target noise is substantial by default, which leaves the prediction
        residual carrying sensitive information beyond the target itself.
        Params a (1.0), b (1.0), noise_y (0.75), noise_d (0.3).
    """
    if n < 1:
        raise InputError("n must be positive")
    rng = np.random.default_rng(seed)
    if kind == "independent":
        x = rng.standard_normal((n, 2))
        return ContinuousDataset(x, x[:, 0].copy(), x[:, 1].copy())
    if kind == "confounded":
        z = rng.standard_normal(n)
        x = np.column_stack([z + 0.1 * rng.standard_normal(n), rng.standard_normal(n)])
        return ContinuousDataset(x, z.copy(), z.copy())
    if kind == "planted_ci":
        noise_x = params.pop("noise_x", 0.3)
        noise_d = params.pop("noise_d", 0.3)
        if params:
            raise InputError(f"unknown params for kind 'planted_ci': {sorted(params)}")
        y = rng.standard_normal(n)
        x = np.column_stack([
            y + noise_x * rng.standard_normal(n),
            y + noise_x * rng.standard_normal(n),
            rng.standard_normal(n),
        ])
        d = y + noise_d * rng.standard_normal(n)
        return ContinuousDataset(x, y, d)
    if kind == "planted_bias":
        a = params.pop("a", 1.0)
        b = params.pop("b", 1.0)
        noise_y = params.pop("noise_y", 0.75)
        noise_d = params.pop("noise_d", 0.3)
        if params:
            raise InputError(f"unknown params for kind 'planted_bias': {sorted(params)}")
        x = rng.standard_normal((n, 2))
        y = a * x[:, 0] + b * x[:, 1] + noise_y * rng.standard_normal(n)
        d = x[:, 1] + noise_d * rng.standard_normal(n)
        return ContinuousDataset(x, y, d)
    raise InputError(f"unknown continuous synth kind {kind!r}")


def eps_dependent_joint(
    card_a: int, card_b: int, amplitude: float, seed: int = 0
) -> JointPmf:
    """Weakly dependent joint P_A P_B * (1 + amplitude * E).

    The perturbation direction E preserves both marginals and is normalized
    to unit chi-square energy under the product measure, so the chi-square
    divergence from independence equals amplitude**2 exactly.  The direction
    is a deterministic function of the seed, which lets callers compare
    several amplitudes along a fixed E.
    """
    if card_a < 2 or card_b < 2:
        raise InputError("alphabets must have at least 2 letters")
    if not 0 <= amplitude < 1:
        raise InputError(f"amplitude must be in [0, 1), got {amplitude}")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        pa = rng.dirichlet(5.0 * np.ones(card_a))
        pb = rng.dirichlet(5.0 * np.ones(card_b))
        raw = rng.uniform(-1.0, 1.0, size=(card_a, card_b))
        row_means = raw @ pb
        col_means = pa @ raw
        grand = pa @ raw @ pb
        direction = raw - row_means[:, None] - col_means[None, :] + grand
        energy = float(np.einsum("a,b,ab->", pa, pb, direction**2))
        if energy < 1e-12:
            continue
        direction /= np.sqrt(energy)
        probs = np.outer(pa, pb) * (1.0 + amplitude * direction)
        if np.all(probs > 0):
            return JointPmf(probs / probs.sum())
    raise InputError(
        f"could not build a positive joint at amplitude {amplitude}; reduce it"
    )


# ---------------------------------------------------------------------------
# Normalized exports
# ---------------------------------------------------------------------------

def export_discrete(dataset: DiscreteDataset, path) -> None:
    """Write index columns as CSV plus an encoder sidecar JSON."""
    frame = pd.DataFrame({"x": dataset.x, "y": dataset.y, "d": dataset.d})
    frame.to_csv(path, index=False)
    sidecar = {
        "card_x": dataset.card_x,
        "card_y": dataset.card_y,
        "card_d": dataset.card_d,
        "encoders": dataset.encoders,
    }
    with open(f"{path}.encoders.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")


def export_continuous(dataset: ContinuousDataset, path) -> None:
    """Write named feature columns plus y and d as CSV with a JSON sidecar."""
    names = dataset.feature_names or [f"x{i}" for i in range(dataset.x.shape[1])]
    frame = pd.DataFrame(dataset.x, columns=names)
    frame["y"] = dataset.y
    d = np.atleast_2d(dataset.d.T).T
    for j in range(d.shape[1]):
        frame["d" if d.shape[1] == 1 else f"d{j}"] = d[:, j]
    frame.to_csv(path, index=False)
    sidecar = {
        "feature_names": names,
        "standardization": dataset.standardization,
    }
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")
