"""The single writer of the result files of a command.

Files are written to a temporary sibling and moved in place with :func:`os.replace`,
so a reader never sees a half-written file. When a command fails, :file:`FAILED.json`
records the error and the files written before it.
"""
import csv
import io
import json
import os
import tempfile
import threading
from typing import Any, Dict, List, Optional, Sequence

from mnarlbm.logging import logger
from mnarlbm.model import ObservedMatrix
from mnarlbm.parsers.matrices import TERNARY_CSV, format_matrix
from mnarlbm.results.exceptions import ResultWriteError
from mnarlbm.results.serialization import RunManifest, records_to_rows
from mnarlbm.schema import validate

FAILURE_FILE = "FAILED.json"


class ResultWriter:
    """Writes the result files of one command into an output directory.

    :param str output_dir: The output directory, created if needed
    :param str command: The command writing the files

    :ivar written: Names of the files written so far, in order
    :vartype written: list[str]
    """

    def __init__(self, output_dir: str, command: str):
        self.output_dir = os.path.abspath(output_dir)
        self.command = command
        self.written: List[str] = []
        self._lock = threading.Lock()

        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as e:
            raise ResultWriteError(self.output_dir, e.strerror or str(e)) from None

        stale = self.path(FAILURE_FILE)

        if os.path.exists(stale):
            logger.info(f"Removing the failure marker of a previous run: '{stale}'")
            os.remove(stale)

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _write_text(self, name: str, text: str) -> str:
        destination = self.path(name)
        temporary = None

        with self._lock:
            try:
                fd, temporary = tempfile.mkstemp(
                    prefix=f".{name}.", suffix=".tmp", dir=self.output_dir
                )

                with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                    f.write(text)

                os.replace(temporary, destination)
            except OSError as e:
                if temporary is not None and os.path.exists(temporary):
                    os.remove(temporary)

                raise ResultWriteError(destination, e.strerror or str(e)) from None

            if name != FAILURE_FILE:
                self.written.append(name)

        logger.debug(f"Wrote '{destination}'")

        return destination

    def write_json(self, name: str, document: Dict[str, Any], schema: str) -> str:
        """Validates `document` against `schema` and writes it.

        :raises SchemaValidationError: The document does not satisfy the schema
        :raises ResultWriteError: The file cannot be written
        """
        validate(document, schema)

        return self._write_text(name, json.dumps(document, indent=2) + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: List[Sequence]) -> str:
        """Writes a CSV file; cells are written as given."""
        lines = [list(header)] + [list(row) for row in rows]

        return self._write_text(name, _csv_text(lines))

    def write_records(self, name: str, records: List[Dict[str, Any]], columns) -> str:
        """Writes flat records as CSV, floats with 17 significant digits."""
        return self.write_csv(name, columns, records_to_rows(records, list(columns)))

    def write_matrix(
        self, name: str, x: ObservedMatrix, matrix_format: str = TERNARY_CSV
    ) -> str:
        return self._write_text(name, _csv_text(format_matrix(x, matrix_format)))

    def write_failure(
        self, error: BaseException, manifest: Optional[RunManifest] = None
    ) -> Optional[str]:
        """Writes :file:`FAILED.json` for `error`; never raises.

        :return: The path of the marker, :const:`None` if it could not be written
        :rtype: str or None
        """
        document = {
            "command": self.command,
            "status": "failed",
            "error_type": type(error).__name__,
            "message": str(error) or repr(error),
            "partial_files": list(self.written),
        }

        if manifest is not None:
            document["manifest"] = manifest.to_dict()

        try:
            validate(document, "failure")
            return self._write_text(FAILURE_FILE, json.dumps(document, indent=2) + "\n")
        except Exception as e:
            logger.error(f"Could not write the failure marker: {e}")
            return None


def _csv_text(lines: List[Sequence]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(lines)

    return buffer.getvalue()
