"""
CSV format for datasets.

One row per (subject, time_index, outcome) cell, all three 1-based, followed
by y, r_star, crossed (0/1) and the covariate columns v1_0.., v2_0... A
covariate vector shorter than the widest one leaves the remaining columns
blank; a censored r_star is blank as well. Numbers are written with 17
significant digits so a read reproduces the written floats exactly.
"""
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from latent_rt.core.errors import DataFormatError
from latent_rt.services.model_core import CovariateDesign, ModelSpec
from latent_rt.services.simulator import Dataset, SubjectData

logger = logging.getLogger(__name__)

KEY_COLUMNS = ["subject", "time_index", "outcome"]
VALUE_COLUMNS = ["y", "r_star", "crossed"]
FLOAT_FORMAT = "%.17g"


def _covariate_columns(prefix: str, width: int) -> List[str]:
    return [f"{prefix}_{c}" for c in range(width)]


def dataset_to_frame(dataset: Dataset) -> pd.DataFrame:
    """Flattens a dataset into the CSV row layout."""
    spec, design = dataset.spec, dataset.design
    m, n, p = spec.m, spec.n, spec.p
    k, i, j = np.meshgrid(np.arange(m), np.arange(n), np.arange(p), indexing="ij")
    k, i, j = k.ravel(), i.ravel(), j.ravel()

    def stacked(attr: str) -> np.ndarray:
        if m == 0:
            return np.zeros(0)
        return np.stack([getattr(s, attr) for s in dataset.subjects]).ravel()

    frame = pd.DataFrame({
        "subject": k + 1,
        "time_index": i + 1,
        "outcome": j + 1,
        "y": stacked("y").astype(float),
        "r_star": stacked("r_star").astype(float),
        "crossed": stacked("crossed").astype(int),
    })
    for prefix, mats in (("v1", design.v1), ("v2", design.v2)):
        width = max(mat.shape[1] for mat in mats)
        block = np.full((m, p, width), np.nan)
        for jj, mat in enumerate(mats):
            block[:, jj, :mat.shape[1]] = mat
        values = block[k, j] if m else np.zeros((0, width))
        for c, name in enumerate(_covariate_columns(prefix, width)):
            frame[name] = values[:, c]
    return frame


def write_dataset_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Writes the dataset as UTF-8 CSV with a header row; returns the path."""
    path = Path(path)
    dataset_to_frame(dataset).to_csv(
        path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n", encoding="utf-8",
    )
    logger.info("Wrote %d cells to %s", dataset.spec.m * dataset.spec.n * dataset.spec.p, path)
    return path


def _parse(frame: pd.DataFrame, column: str, kind: str, allow_blank: bool = False) -> np.ndarray:
    out = np.empty(len(frame), dtype=int if kind == "int" else float)
    for row, raw in enumerate(frame[column].tolist()):
        text = str(raw).strip()
        line = row + 2
        if not text:
            if allow_blank:
                out[row] = np.nan
                continue
            raise DataFormatError(f"{column} is blank", line=line)
        try:
            if kind == "int":
                out[row] = int(text)
            elif kind == "bool":
                lowered = text.lower()
                if lowered not in ("0", "1", "true", "false"):
                    raise ValueError(text)
                out[row] = float(lowered in ("1", "true"))
            else:
                value = float(text)
                if not np.isfinite(value):
                    raise ValueError(text)
                out[row] = value
        except ValueError:
            raise DataFormatError(f"{column} has malformed value {text!r}", line=line) from None
    return out


def read_dataset_csv(path: Union[str, Path], dt: float, u1_index: Sequence[Sequence[int]],
                     u2_index: Sequence[Sequence[int]]) -> Dataset:
    """
    Reads a dataset written by write_dataset_csv.

    Args:
        path: CSV file.
        dt: Time increment of the model the data belongs to.
        u1_index: Per outcome, the V(1) columns forming U(1).
        u2_index: Per outcome, the V(2) columns forming U(2).

    Raises:
        DataFormatError: On missing columns, malformed values (with the line
            number), duplicate or missing cells, or covariates that vary
            within a subject.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        raise DataFormatError(f"malformed CSV: {e}") from e
    frame = frame.fillna("")
    missing = [c for c in KEY_COLUMNS + VALUE_COLUMNS if c not in frame.columns]
    if missing:
        raise DataFormatError(f"missing columns {missing}")

    subject = _parse(frame, "subject", "int")
    time_index = _parse(frame, "time_index", "int")
    outcome = _parse(frame, "outcome", "int")
    y = _parse(frame, "y", "float")
    r_star = _parse(frame, "r_star", "float", allow_blank=True)
    crossed = _parse(frame, "crossed", "bool").astype(bool)
    for name, values in (("subject", subject), ("time_index", time_index), ("outcome", outcome)):
        bad = np.flatnonzero(values < 1)
        if bad.size:
            raise DataFormatError(f"{name} must be 1-based", line=int(bad[0]) + 2)

    p = len(u1_index)
    ids = np.unique(subject)
    m = ids.size
    n = int(time_index.max()) if len(frame) else 1
    if len(frame) and int(outcome.max()) != p:
        raise DataFormatError(f"data has {int(outcome.max())} outcomes, model has p={p}")
    k = np.searchsorted(ids, subject)
    i = time_index - 1
    j = outcome - 1

    seen = np.full((m, n, p), -1, dtype=int)
    for row, cell in enumerate(zip(k, i, j)):
        if seen[cell] >= 0:
            raise DataFormatError(f"duplicate cell, first seen on line {seen[cell] + 2}", line=row + 2)
        seen[cell] = row
    if m and np.any(seen < 0):
        kk, ii, jj = (int(x[0]) for x in np.nonzero(seen < 0))
        raise DataFormatError(f"missing cell subject={ids[kk]}, time_index={ii + 1}, outcome={jj + 1}")

    def cube(values: np.ndarray) -> np.ndarray:
        out = np.empty((m, n, p), dtype=values.dtype)
        out[k, i, j] = values
        return out

    def covariates(prefix: str) -> Tuple[np.ndarray, ...]:
        names = sorted((c for c in frame.columns if c.startswith(prefix + "_")),
                       key=lambda c: int(c.split("_")[1]))
        if not names:
            return tuple(np.zeros((m, 0)) for _ in range(p))
        block = np.stack([_parse(frame, c, "float", allow_blank=True) for c in names], axis=1)
        full = np.full((m, n, p, len(names)), np.nan)
        full[k, i, j] = block
        first = full[:, :1]
        same = (full == first) | (np.isnan(full) & np.isnan(first))
        if not np.all(same):
            row = int(seen[np.nonzero(~same.all(axis=3))][0])
            raise DataFormatError(f"{prefix} covariates vary within a subject", line=row + 2)
        mats = []
        for jj in range(p):
            present = ~np.isnan(full[:, 0, jj, :]) if m else np.zeros((0, len(names)), dtype=bool)
            # Without subjects the header alone fixes the width
            width = int(present.sum(axis=1).max()) if m else len(names)
            mats.append(full[:, 0, jj, :width] if m else np.zeros((0, width)))
        return tuple(mats)

    design = CovariateDesign(covariates("v1"), tuple(u1_index), covariates("v2"), tuple(u2_index))
    spec = ModelSpec(m, n, p, design.q1, design.q2, dt, design.d1, design.d2)
    y_c, r_c, crossed_c = cube(y), cube(r_star), cube(crossed)
    subjects = tuple(
        SubjectData(y=y_c[kk], r_star=r_c[kk], crossed=crossed_c[kk], covariates=design.subject(kk), index=kk)
        for kk in range(m)
    )
    logger.info("Read %d subjects (n=%d, p=%d) from %s", m, n, p, path)
    return Dataset(spec=spec, design=design, subjects=subjects)
