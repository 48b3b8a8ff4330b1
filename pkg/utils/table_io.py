import re
from pathlib import Path
from typing import Any, Iterable, Type, TypeVar

import pandas as pd
from pydantic import BaseModel, ValidationError

from utils.exceptions import ParseError

T = TypeVar("T", bound=BaseModel)

_PANDAS_LINE = re.compile(r"line (\d+)")


def read_csv_rows(
    path: str | Path,
    header: list[str],
) -> list[tuple[int, dict[str, str]]]:
    """Rows of a CSV as (line_number, {column: text}), header checked exactly."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path}: empty file, expected header {','.join(header)}", 1) from e
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise ParseError(f"{path}: malformed row ({e})", int(match.group(1)) if match else None) from e

    if list(frame.columns) != header:
        raise ParseError(f"{path}: header {list(frame.columns)} != {header}", 1)

    rows: list[tuple[int, dict[str, str]]] = []
    for index, record in enumerate(frame.to_dict(orient="records")):
        line_number = index + 2
        missing = [k for k, v in record.items() if v is None or (isinstance(v, float) and pd.isna(v)) or v == ""]
        if missing:
            raise ParseError(f"{path}: missing field(s) {missing}", line_number)
        rows.append((line_number, record))
    return rows


def query_models_from_csv(
    path: str | Path,
    model: Type[T],
    header: list[str],
) -> list[T]:
    models: list[T] = []
    for line_number, record in read_csv_rows(path, header):
        try:
            models.append(model.model_validate(record))
        except ValidationError as e:
            raise ParseError(f"{path}: invalid {model.__name__}: {e.errors()[0]['msg']}", line_number) from e
    return models


def write_csv_rows(
    path: str | Path,
    header: list[str],
    rows: Iterable[dict[str, Any]],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=header)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def update_models_to_csv(
    path: str | Path,
    models: Iterable[BaseModel],
    header: list[str],
) -> Path:
    return write_csv_rows(path, header, (m.model_dump(mode="json", include=set(header)) for m in models))
