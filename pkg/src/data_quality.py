"""
Quality checks for tabulated densities (two columns t, psi; header optional).
"""
import pandas as pd
import numpy as np
from typing import Dict, Any, List, Tuple
import logging

logger = logging.getLogger(__name__)

EXPECTED_COLUMNS = ["t", "psi"]


def _is_number(val) -> bool:
    try:
        float(val)
        return True
    except (TypeError, ValueError):
        return False


def is_valid_header_row(row: List) -> bool:
    """
    Check if a row looks like a header.
    Returns True if every non-empty cell is a non-numeric name.
    """
    if not row or len(row) == 0:
        return False

    cells = [val for val in row if pd.notna(val) and str(val).strip() != ""]
    if len(cells) < len(row):
        return False
    return all(not _is_number(val) for val in cells)


def split_header(raw: pd.DataFrame) -> Tuple[pd.DataFrame, bool]:
    """Drop the first row when it is a header. Returns (data, had_header)."""
    if len(raw) > 0 and is_valid_header_row(raw.iloc[0].tolist()):
        data = raw.iloc[1:].reset_index(drop=True)
        logger.info(f"Detected header row {raw.iloc[0].tolist()}")
        return data, True
    return raw, False


def detect_sample_issues(df: pd.DataFrame) -> Dict[str, Any]:
    """
    Issues in an already header-stripped two-column frame.
    Returns dict with issues found (empty when the table is usable).
    """
    issues = {}

    if df.shape[1] != 2:
        issues['column_count'] = int(df.shape[1])
        return issues
    if len(df) < 2:
        issues['too_few_rows'] = int(len(df))

    numeric = df.apply(pd.to_numeric, errors="coerce")
    numeric.columns = EXPECTED_COLUMNS

    # Missing or non-numeric cells
    missing = numeric.isnull().sum()
    if missing.sum() > 0:
        issues['missing_values'] = {k: int(v) for k, v in missing[missing > 0].items()}

    values = numeric.dropna()
    non_finite = int((~np.isfinite(values.to_numpy())).any(axis=1).sum())
    if non_finite > 0:
        issues['non_finite_rows'] = non_finite

    # Duplicate abscissae
    duplicates = int(values['t'].duplicated().sum())
    if duplicates > 0:
        issues['duplicate_t'] = duplicates

    steps = np.diff(values['t'].to_numpy())
    decreasing = int((steps < 0).sum())
    if decreasing > 0:
        issues['non_increasing_t'] = decreasing

    return issues


def generate_quality_report(raw: pd.DataFrame) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """
    Full report for a raw CSV frame read with header=None.
    Returns: (report_dict, numeric frame with columns t, psi)
    """
    data, had_header = split_header(raw)
    issues = detect_sample_issues(data)

    report = {
        'total_rows': len(data),
        'header': had_header,
        'issues_found': issues,
        'usable': not issues,
    }
    if issues:
        logger.warning(f"Tabulated density has issues: {issues}")
        return report, pd.DataFrame(columns=EXPECTED_COLUMNS)

    numeric = data.apply(pd.to_numeric, errors="coerce").astype(float)
    numeric.columns = EXPECTED_COLUMNS
    return report, numeric


def parse_mask(payload: Dict[str, Any]) -> Tuple[float, Tuple[Tuple[float, float], Tuple[float, float]], np.ndarray]:
    """
    Validate a binary mask {h, window: [[x0, x1], [y0, y1]], rows: ["0110", ...]}.
    Row 0 sits at the window's lower y. Returns (h, window, cells[row, col] as bool).
    """
    issues = []
    try:
        h = float(payload["h"])
        (x0, x1), (y0, y1) = [(float(a), float(b)) for a, b in payload["window"]]
        rows = list(payload["rows"])
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"Mask must provide h, window [[x0, x1], [y0, y1]] and rows: {e}") from e

    if not h > 0:
        issues.append(f"h must be positive, got {h}")
    if not (x1 > x0 and y1 > y0):
        issues.append("window bounds must be increasing")
    if issues:
        raise ValueError("; ".join(issues))

    n_rows = int(round((y1 - y0) / h))
    n_cols = int(round((x1 - x0) / h))
    if len(rows) != n_rows:
        issues.append(f"expected {n_rows} rows for the window, found {len(rows)}")
    bad_rows = [i for i, row in enumerate(rows) if len(str(row)) != n_cols or set(str(row)) - {"0", "1"}]
    if bad_rows:
        issues.append(f"rows {bad_rows[:5]} are not {n_cols} characters of 0/1")
    if issues:
        logger.warning(f"Mask rejected: {issues}")
        raise ValueError("; ".join(issues))

    cells = np.array([[ch == "1" for ch in str(row)] for row in rows], dtype=bool).reshape(n_rows, n_cols)
    return h, ((x0, x1), (y0, y1)), cells
