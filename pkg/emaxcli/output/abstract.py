from __future__ import annotations
from abc import ABC, abstractmethod
from pathlib import Path
from pydantic import BaseModel

STDOUT = "-"


class AbstractOutputPipe(ABC):
    """Something that turns processor results into a deliverable."""

    @abstractmethod
    def render(self, *results: BaseModel) -> str:
        """Write the deliverable and return where it went (a path, or ``-`` for stdout)."""

    @staticmethod
    def _write(text: str, out_file: Path | None) -> str:
        if out_file is None:
            print(text)
            return STDOUT
        out_file.parent.mkdir(parents=True, exist_ok=True)
        out_file.write_text(text, encoding="utf-8")
        return str(out_file)
