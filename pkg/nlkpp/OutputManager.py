"""
Artifact writing: CSV tables, Field snapshots, the run report and the
manifest. Nothing written here depends on the clock or the host, so a rerun
of the same config reproduces every byte.
"""

import csv
import hashlib
import json
import logging
import numbers
import os
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple

import markdown2
import numpy as np

from numerics.Spectral import Field

MANIFEST_NAME = "manifest.json"


def format_value(value) -> str:
    """Shortest round-trip text for floats; NaN and infinities spelled out."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if value is None:
        return ""
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    return str(value)


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_table(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def markdown_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        lines.append("| " + " | ".join(format_value(v) for v in row) + " |")
    return "\n".join(lines)


class OutputManager:
    """Owns one output directory and the list of artifacts written into it"""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.artifacts: List[str] = []
        self.sections: List[Tuple[str, str]] = []
        os.makedirs(output_dir, exist_ok=True)
        logging.debug(f"Writing artifacts to {output_dir}")

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _register(self, name: str):
        if name not in self.artifacts:
            self.artifacts.append(name)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        path = self.path(name)
        with open(path, "w", newline="") as f:
            write_table(f, header, rows)
        self._register(name)
        logging.debug(f"Wrote {path}")
        return path

    def write_field(self, name: str, field: Field) -> str:
        """Binary snapshot (header + float64 values)."""
        path = self.path(name)
        with open(path, "wb") as f:
            f.write(field.to_bytes())
        self._register(name)
        return path

    def write_field_csv(self, name: str, field: Field) -> str:
        return self.write_csv(name, ("x", "u"), zip(field.x, field.values))

    def add_section(self, heading: str, body: str):
        self.sections.append((heading, body))

    def write_report(self, title: str, name: str = "report") -> Optional[str]:
        """report.md from the collected sections, and report.html rendered with markdown2."""
        if not self.sections:
            return None
        parts = [f"# {title}", ""]
        for heading, body in self.sections:
            parts += [f"## {heading}", "", body.rstrip(), ""]
        text = "\n".join(parts)
        md_name, html_name = f"{name}.md", f"{name}.html"
        with open(self.path(md_name), "w") as f:
            f.write(text)
        html = markdown2.markdown(text, extras=["tables"])
        with open(self.path(html_name), "w") as f:
            f.write(html)
        self._register(md_name)
        self._register(html_name)
        return self.path(md_name)

    def write_manifest(self) -> str:
        """manifest.json: every artifact (sorted) with its size and sha256."""
        entries = []
        for name in sorted(self.artifacts):
            path = self.path(name)
            entries.append({"file": name, "bytes": os.path.getsize(path), "sha256": sha256_of(path)})
        path = self.path(MANIFEST_NAME)
        with open(path, "w") as f:
            json.dump({"artifacts": entries}, f, indent=4, sort_keys=True)
            f.write("\n")
        logging.info(f"Manifest lists {len(entries)} artifacts in {self.output_dir}")
        return path
