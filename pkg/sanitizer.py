"""
Data Sanitization Module for the estimation CLI
Provides validation and numeric parsing of CSV design files.
"""

import io
import logging
import os
import re
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

import config  # Import configuration settings
from dataset import Dataset, ResponseFamily
from errors import ValidationError

logger = logging.getLogger(__name__)


class DataSanitizer:
    """Handles all CSV validation and conversion to a Dataset"""

    # Load configuration from config.py (can be easily modified)
    MAX_FILE_SIZE_MB = config.MAX_FILE_SIZE_MB
    MAX_ROWS = config.MAX_ROWS
    MAX_COLUMNS = config.MAX_COLUMNS

    ENCODINGS = ("utf-8", "latin-1")

    @staticmethod
    def validate_file(path: str) -> None:
        """
        Validate a CSV path before reading it.

        Args:
            path: Location of the CSV file

        Raises:
            ValidationError: If the file is missing, not a .csv, empty or too large
        """
        if not path:
            raise ValidationError("No data file provided")

        if not os.path.isfile(path):
            raise ValidationError(f"Data file not found: {path}", path=path)

        if not path.lower().endswith(".csv"):
            raise ValidationError("Invalid file type. Only CSV files are allowed.", path=path)

        file_size = os.path.getsize(path)
        if file_size == 0:
            raise ValidationError("File is empty", path=path)

        max_size_bytes = DataSanitizer.MAX_FILE_SIZE_MB * 1024 * 1024
        if file_size > max_size_bytes:
            raise ValidationError(
                f"File too large. Maximum size: {DataSanitizer.MAX_FILE_SIZE_MB}MB",
                path=path,
                size_bytes=file_size,
            )

    @staticmethod
    def _read_text_frame(path: str) -> pd.DataFrame:
        """Read every cell as text so parsing problems can be located exactly"""
        with open(path, "rb") as f:
            content = f.read()

        last_exc = None
        for encoding in DataSanitizer.ENCODINGS:
            try:
                return pd.read_csv(
                    io.BytesIO(content),
                    encoding=encoding,
                    dtype=str,
                    keep_default_na=False,
                    skipinitialspace=True,
                )
            except UnicodeDecodeError as e:
                last_exc = e
                continue
            except pd.errors.EmptyDataError:
                raise ValidationError("CSV file is empty", path=path)
            except pd.errors.ParserError as e:
                raise ValidationError(f"Failed to parse CSV file: {e}", path=path)

        raise ValidationError(f"Failed to decode CSV file: {last_exc}", path=path)

    @staticmethod
    def _sanitize_column_names(columns: pd.Index) -> List[str]:
        """Strip column names; blank names get a positional placeholder"""
        sanitized = []
        for col in columns:
            col_str = re.sub(r"\s+", " ", str(col)).strip()
            if not col_str or col_str.startswith("Unnamed:"):
                col_str = f"column_{len(sanitized) + 1}"
            sanitized.append(col_str[:100])
        return sanitized

    @staticmethod
    def _parse_numeric(df: pd.DataFrame) -> np.ndarray:
        """Convert text cells to floats, citing the first bad cell by (data row, column)"""
        values = np.empty(df.shape, dtype=float)
        for j, col in enumerate(df.columns):
            text = df[col].str.strip()
            parsed = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)

            for i in range(len(text)):
                value = parsed[i]
                if np.isfinite(value):
                    continue
                cell = text.iloc[i]
                row = i + 1
                if cell == "":
                    raise ValidationError(
                        f"missing value at row {row}, column '{col}'", row=row, column=col
                    )
                if np.isnan(value) and cell.lower() not in ("nan", "-nan", "+nan"):
                    raise ValidationError(
                        f"non-numeric value {cell!r} at row {row}, column '{col}'",
                        row=row,
                        column=col,
                    )
                raise ValidationError(
                    f"non-finite value {cell!r} at row {row}, column '{col}'", row=row, column=col
                )
            values[:, j] = parsed
        return values

    @staticmethod
    def ingest_csv(
        path: str,
        response_column: Optional[str] = None,
        family: ResponseFamily = ResponseFamily.GAUSSIAN,
    ) -> Tuple[Dataset, Dict[str, Any]]:
        """
        Read a CSV design file into a Dataset.

        Args:
            path: CSV with a header row; every cell must be numeric
            response_column: Name of the response column (default: last column)
            family: Likelihood family of the response

        Returns:
            Tuple of (dataset, manifest_dict)

        Raises:
            ValidationError: If the file or any cell fails validation
        """
        DataSanitizer.validate_file(path)
        df = DataSanitizer._read_text_frame(path)

        # Validate dataframe dimensions
        if df.shape[0] == 0:
            raise ValidationError("CSV contains no data rows", path=path)

        if df.shape[0] > DataSanitizer.MAX_ROWS:
            raise ValidationError(f"Too many rows. Maximum: {DataSanitizer.MAX_ROWS:,}", path=path)

        if df.shape[1] > DataSanitizer.MAX_COLUMNS:
            raise ValidationError(f"Too many columns. Maximum: {DataSanitizer.MAX_COLUMNS}", path=path)

        if df.shape[1] < 2:
            raise ValidationError("CSV needs a response column and at least one predictor", path=path)

        df.columns = DataSanitizer._sanitize_column_names(df.columns)

        # Check for duplicate column names
        duplicated = df.columns[df.columns.duplicated()].tolist()
        if duplicated:
            raise ValidationError(f"Duplicate column names: {duplicated}", path=path)

        response = response_column if response_column is not None else df.columns[-1]
        if response not in df.columns:
            raise ValidationError(
                f"Response column '{response}' not found; columns are {df.columns.tolist()}",
                path=path,
            )

        values = DataSanitizer._parse_numeric(df)
        columns = df.columns.tolist()
        y = values[:, columns.index(response)]
        predictors = [c for c in columns if c != response]
        X = values[:, [columns.index(c) for c in predictors]]

        family = ResponseFamily(family)
        if family is ResponseFamily.BINOMIAL:
            bad = np.flatnonzero((y != 0) & (y != 1))
            if bad.size:
                row = int(bad[0]) + 1
                raise ValidationError(
                    f"binomial response must be 0 or 1; found {y[bad[0]]:g} at row {row}, "
                    f"column '{response}'",
                    row=row,
                    column=response,
                )

        X, kept, dropped = DataSanitizer.drop_constant_columns(X, predictors)

        dataset = Dataset(X, y, family=family, feature_names=tuple(kept))

        # Collect metadata
        manifest = {
            "path": os.path.abspath(path),
            "rows": int(X.shape[0]),
            "response": response,
            "family": family.value,
            "predictors": kept,
            "dropped_constant": dropped,
        }
        logger.info("Read %d rows x %d predictors from %s", X.shape[0], len(kept), path)
        return dataset, manifest

    @staticmethod
    def drop_constant_columns(X: np.ndarray, names: List[str]) -> Tuple[np.ndarray, List[str], List[str]]:
        """Remove predictors with zero variance"""
        constant = np.all(X == X[0], axis=0)
        dropped = [name for name, c in zip(names, constant) if c]
        if dropped:
            logger.warning("Dropping constant predictor columns: %s", dropped)
        if np.all(constant):
            raise ValidationError("All predictor columns are constant")
        kept = [name for name, c in zip(names, constant) if not c]
        return X[:, ~constant], kept, dropped
