"""
Data Processor for mixture observation / concentration CSV files
"""
import pandas as pd
import numpy as np
import logging
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence
from pathlib import Path

from config import Config
from weights import ConcentrationMatrix, InvalidConcentrations

logger = logging.getLogger(__name__)

OBSERVATION_COLUMN = 'x'
CONCENTRATION_PATTERN = re.compile(r'^p(\d+)$')


class MalformedInputError(ValueError):
    """CSV content does not follow the x, p1..pM schema"""
    pass


@dataclass
class DataSet:
    """Observations with their known concentrations"""

    observations: np.ndarray
    concentrations: ConcentrationMatrix
    component_names: List[str]

    @property
    def N(self) -> int:
        return self.observations.shape[0]

    @property
    def M(self) -> int:
        return self.concentrations.M


class MixtureDataProcessor:
    """Load and validate mixture data from CSV"""

    def __init__(self, csv_file_path: str):
        """
        Initialize data processor

        Args:
            csv_file_path: Path to CSV file with columns x, p1, ..., pM
        """
        self.csv_file_path = Path(csv_file_path)
        if not self.csv_file_path.exists():
            raise FileNotFoundError(f"CSV file not found: {csv_file_path}")

        self.df = None

    def load_data(self) -> pd.DataFrame:
        """
        Load data from CSV file

        Returns:
            Loaded DataFrame (all cells as text, converted during validation)
        """
        logger.info(f"Loading data from {self.csv_file_path}")
        try:
            self.df = pd.read_csv(self.csv_file_path, dtype=str, encoding='utf-8',
                                  skipinitialspace=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise MalformedInputError(f"Cannot parse {self.csv_file_path}: {e}") from e
        self.df.columns = [str(c).strip() for c in self.df.columns]
        logger.info(f"Loaded {len(self.df)} rows from CSV")

        # Log column names for debugging
        logger.debug(f"Columns found: {list(self.df.columns)}")

        return self.df

    def _concentration_columns(self) -> List[str]:
        numbered = {}
        for col in self.df.columns:
            match = CONCENTRATION_PATTERN.match(col)
            if match:
                numbered[int(match.group(1))] = col
        if not numbered:
            raise MalformedInputError("No concentration columns p1..pM found")
        expected = list(range(1, len(numbered) + 1))
        if sorted(numbered) != expected:
            raise MalformedInputError(f"Concentration columns must be p1..p{len(numbered)} without gaps, "
                                      f"found {[numbered[k] for k in sorted(numbered)]}")
        return [numbered[k] for k in expected]

    def _numeric_column(self, col: str) -> np.ndarray:
        try:
            # exact round trip; to_numeric can be 1 ulp off on 17-digit text
            values = self.df[col].astype(float).to_numpy()
        except (TypeError, ValueError):
            # only used to locate the offending cell
            values = pd.to_numeric(self.df[col], errors='coerce').to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            # header is line 1, first data row is line 2
            line = int(bad[0]) + 2
            raise MalformedInputError(
                f"Column '{col}', line {line}: value {self.df[col].iloc[bad[0]]!r} is not a finite number "
                f"({bad.size} bad cells in this column)"
            )
        return values

    def build_dataset(self, renormalize: bool = False,
                      component_names: Optional[Sequence[str]] = None) -> DataSet:
        """
        Validate the loaded CSV and build a DataSet

        Args:
            renormalize: Divide concentration rows by their sums instead of failing
            component_names: Optional labels for the components

        Returns:
            DataSet
        """
        if self.df is None:
            self.load_data()

        if OBSERVATION_COLUMN not in self.df.columns:
            raise MalformedInputError(f"Column '{OBSERVATION_COLUMN}' not found. "
                                      f"Available columns: {list(self.df.columns)}")
        if self.df.empty:
            raise MalformedInputError("CSV file has no data rows")

        x = self._numeric_column(OBSERVATION_COLUMN)
        p_cols = self._concentration_columns()
        P = np.column_stack([self._numeric_column(col) for col in p_cols])

        out_of_range = np.flatnonzero(np.any((P < 0.0) | (P > 1.0), axis=1))
        if out_of_range.size:
            raise MalformedInputError(f"Line {out_of_range[0] + 2}: concentrations must lie in [0, 1]")

        deviation = np.abs(P.sum(axis=1) - 1.0)
        bad_rows = np.flatnonzero(deviation > Config.ROW_SUM_TOLERANCE)
        if bad_rows.size:
            if not renormalize:
                raise MalformedInputError(
                    f"Line {bad_rows[0] + 2}: concentrations sum to {P[bad_rows[0]].sum():.12g}, not 1 "
                    f"({bad_rows.size} rows affected; use --renormalize to rescale)"
                )
            logger.warning(f"Renormalizing {bad_rows.size} concentration rows that do not sum to 1")

        try:
            concentrations = ConcentrationMatrix.from_array(P, renormalize=renormalize)
        except InvalidConcentrations as e:
            raise MalformedInputError(str(e)) from e

        if component_names:
            names = [str(n) for n in component_names]
            if len(names) != concentrations.M:
                raise MalformedInputError(f"Got {len(names)} component names for {concentrations.M} components")
        else:
            names = [f"component {m + 1}" for m in range(concentrations.M)]

        logger.info(f"Data set: N={len(x)} observations, M={concentrations.M} components")
        return DataSet(observations=x, concentrations=concentrations, component_names=names)


def export_dataset(dataset: DataSet, output_file) -> Path:
    """
    Write a DataSet in the x, p1..pM schema

    Args:
        dataset: Data to write
        output_file: Path to output CSV file

    Returns:
        Path written
    """
    output_file = Path(output_file)
    frame = pd.DataFrame({OBSERVATION_COLUMN: dataset.observations})
    for m in range(dataset.M):
        frame[f"p{m + 1}"] = dataset.concentrations.P[:, m]
    frame.to_csv(output_file, index=False, float_format='%.17g')
    logger.info(f"Exported {dataset.N} rows to {output_file}")
    return output_file
