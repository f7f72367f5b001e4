from __future__ import annotations
import logging
import math
from pathlib import Path

import pandas as pd

from .abstract import AbstractParser, RESPONSE_COLUMNS
from ..errors import InputError
from ..models import DoseResponseCsvConfig

logger = logging.getLogger(__name__)


class DoseResponseCsvParser(AbstractParser):
    """
    Parses observation CSVs with format:
      dose,response
    One row per observation. Errors name the offending line of the file.
    """
    config_model = DoseResponseCsvConfig

    def __init__(self, config: DoseResponseCsvConfig):
        super().__init__(config)

    def load(self) -> pd.DataFrame:
        path = Path(self.config.path)
        if not path.is_file():
            raise InputError(f"data file not found: {path}")

        try:
            df = pd.read_csv(
                path,
                sep=self.config.sep,
                encoding=self.config.encoding,
                dtype=str,
                skip_blank_lines=True,
                keep_default_na=False,
            )
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise InputError(f"{path}: {e}") from None

        df.columns = [c.strip().lower() for c in df.columns]
        missing = [c for c in RESPONSE_COLUMNS if c not in df.columns]
        if missing:
            raise InputError(f"header must contain {','.join(RESPONSE_COLUMNS)}; missing {missing}", line=1)

        doses, responses = [], []
        # header is line 1; blank lines are skipped by pandas, so count them back in
        lines = self._data_line_numbers(path)
        for i, row in enumerate(df[RESPONSE_COLUMNS].itertuples(index=False)):
            line = lines[i] if i < len(lines) else i + 2
            dose = self._number(row.dose, "dose", line)
            if dose < 0:
                raise InputError(f"dose must be non-negative, got {dose:g}", line=line)
            doses.append(dose)
            responses.append(self._number(row.response, "response", line))

        if not doses:
            raise InputError(f"{path}: no observations")
        logger.info("read %d observations from %s", len(doses), path)
        return pd.DataFrame({"dose": doses, "response": responses})

    @staticmethod
    def _number(raw: str, column: str, line: int) -> float:
        try:
            value = float(str(raw).strip())
        except ValueError:
            raise InputError(f"{column} {raw!r} is not a number", line=line) from None
        if not math.isfinite(value):
            raise InputError(f"{column} {raw!r} is not finite", line=line)
        return value

    def _data_line_numbers(self, path: Path) -> list[int]:
        text = path.read_text(encoding=self.config.encoding).splitlines()
        return [i + 1 for i, l in enumerate(text) if l.strip()][1:]
