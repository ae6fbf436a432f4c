"""Static disease reference text backing the description view."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

SECTION_KEYS = ("description", "symptoms", "causes", "diagnosis", "treatments", "prognosis")


@dataclass(frozen=True)
class DiseaseDescription:
    code: str
    name: str
    sections: dict[str, str]
    found: bool = True

    def __post_init__(self):
        missing = [k for k in SECTION_KEYS if k not in self.sections]
        if missing:
            raise ValueError(f"description for {self.code!r} is missing sections {missing}")

    def to_dict(self) -> dict:
        return {"code": self.code, "name": self.name,
                "sections": dict(self.sections), "found": self.found}


def stub_description(code: str) -> DiseaseDescription:
    return DiseaseDescription(code, code, {k: "" for k in SECTION_KEYS}, found=False)


@dataclass(frozen=True)
class DescriptionCatalog:
    """Immutable lookup over a loaded description file; misses are soft."""

    records: dict[str, DiseaseDescription] = field(default_factory=dict)

    def lookup(self, code: str) -> DiseaseDescription:
        return self.records.get(code) or stub_description(code)

    def __len__(self) -> int:
        return len(self.records)


def load_descriptions(path) -> DescriptionCatalog:
    """Load one JSON record per line: {code, name, <six section keys>}.

    A duplicated code keeps the last record and logs a warning.
    """
    records: dict[str, DiseaseDescription] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            code = rec["code"]
            if code in records:
                logger.warning("duplicate description for %r: last record wins", code)
            sections = {k: str(rec.get(k, "")) for k in SECTION_KEYS}
            records[code] = DiseaseDescription(code, rec.get("name", code), sections)
    return DescriptionCatalog(records)
