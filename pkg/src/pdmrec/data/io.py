"""Reading interaction logs and persisting splits.

AIDEV-NOTE: Input logs are delimiter-separated text with columns
user_id, item_id, timestamp, watch_time, loop_times, flags. The last three
may be empty or missing; flags are semicolon-separated tokens. A header
line is detected when the timestamp column of the first non-blank row is
not an integer.
"""

import csv
import hashlib
import logging
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import BinaryIO

from pydantic import ValidationError

from pdmrec.data.models import SPLIT_FORMAT_VERSION, InteractionRecord, SplitDataset
from pdmrec.errors import DataError

logger = logging.getLogger(__name__)

LOG_COLUMNS = ("user_id", "item_id", "timestamp", "watch_time", "loop_times", "flags")


def _optional_float(value: str, column: str, lineno: int) -> float | None:
    value = value.strip()
    if not value:
        return None
    try:
        return float(value)
    except ValueError:
        raise DataError(f"line {lineno}: {column} is not a number: {value!r}")


def _looks_like_header(row: list[str]) -> bool:
    if len(row) < 3:
        return False
    try:
        int(row[2])
    except ValueError:
        return True
    return False


def _decoded_lines(handle: BinaryIO, path: str | Path) -> Iterator[str]:
    for lineno, raw in enumerate(handle, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: line {lineno}: not valid UTF-8 ({exc.reason})") from exc


def iter_interaction_log(
    path: str | Path, delimiter: str = "\t", has_header: bool | None = None
) -> Iterator[InteractionRecord]:
    """Stream records from a delimiter-separated log file.

    The header check applies to the first non-blank row.
    """
    with Path(path).open("rb") as handle:
        reader = csv.reader(_decoded_lines(handle, path), delimiter=delimiter)
        first_row = True
        for row in reader:
            if not row or not any(cell.strip() for cell in row):
                continue
            if first_row:
                first_row = False
                header = has_header if has_header is not None else _looks_like_header(row)
                if header:
                    continue
            yield _parse_row(row, reader.line_num)


def _parse_row(row: list[str], lineno: int) -> InteractionRecord:
    if len(row) < 3:
        raise DataError(f"line {lineno}: expected at least 3 columns, got {len(row)}")
    cells = [*row, "", "", ""][:6]
    try:
        timestamp = int(cells[2].strip())
    except ValueError:
        raise DataError(f"line {lineno}: timestamp is not an integer: {cells[2]!r}")
    flags = frozenset(t.strip() for t in cells[5].split(";") if t.strip())
    return InteractionRecord(
        user_id=cells[0].strip(),
        item_id=cells[1].strip(),
        timestamp=timestamp,
        watch_time=_optional_float(cells[3], "watch_time", lineno),
        loop_times=_optional_float(cells[4], "loop_times", lineno),
        flags=flags,
    )


def read_interaction_log(
    path: str | Path, delimiter: str = "\t", has_header: bool | None = None
) -> list[InteractionRecord]:
    records = list(iter_interaction_log(path, delimiter, has_header))
    logger.info("Read %d records from %s", len(records), path)
    return records


def write_interaction_log(
    records: Iterable[InteractionRecord], path: str | Path, delimiter: str = "\t"
) -> None:
    """Write records with a header line, in the format read_interaction_log accepts."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, delimiter=delimiter, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.user_id,
                    r.item_id,
                    r.timestamp,
                    "" if r.watch_time is None else repr(r.watch_time),
                    "" if r.loop_times is None else repr(r.loop_times),
                    ";".join(sorted(r.flags)),
                ]
            )


def save_split(split: SplitDataset, path: str | Path) -> None:
    Path(path).write_text(split.model_dump_json(), encoding="utf-8")
    logger.info("Saved split with %d users to %s", split.num_users, path)


def load_split(path: str | Path) -> SplitDataset:
    """Load a split file, rejecting unknown format versions."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not UTF-8 text: {exc.reason}") from exc
    try:
        return SplitDataset.model_validate_json(text)
    except ValidationError as exc:
        raise DataError(
            f"{path} is not a version {SPLIT_FORMAT_VERSION} split file: {exc}"
        ) from exc


def export_index_map(split: SplitDataset, path: str | Path) -> None:
    """Two-column text: dense index, raw item id."""
    lines = [f"{i}\t{raw}" for i, raw in enumerate(split.index_map.item_ids, start=1)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
