from __future__ import annotations
import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from .abstract import AbstractOutputPipe


def to_jsonable(result: BaseModel | Any) -> Any:
    if isinstance(result, BaseModel):
        return result.model_dump(mode="json")
    return result


def dumps(*results: BaseModel | Any, indent: int | None = 2) -> str:
    """One result as an object, several as an array. Floats keep their
    shortest round-trip representation."""
    docs = [to_jsonable(r) for r in results]
    return json.dumps(docs[0] if len(docs) == 1 else docs, indent=indent, ensure_ascii=False)


class JsonOutput(AbstractOutputPipe):
    """Result models as a JSON document (stdout when no file is given)."""

    def __init__(self, out_file: str | None = None, indent: int | None = 2):
        self.out_file = Path(out_file).expanduser().resolve() if out_file else None
        self.indent = indent

    def render(self, *results: BaseModel) -> str:
        return self._write(dumps(*results, indent=self.indent), self.out_file)
