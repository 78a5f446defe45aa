from __future__ import annotations

import os
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

PROMPT_FILES = (
    "notes_prompt.txt",
    "ircot_flare_fewshot.txt",
    "react_system.txt",
    "synthesis_prompt.txt",
    "judge_prompt.txt",
    "quality_prompt.txt",
)


@lru_cache(maxsize=None)
def _packaged(name: str) -> str:
    return resources.files("noteloop").joinpath("prompts", name).read_text(encoding="utf-8")


def load_prompt(name: str, override_dir: Optional[str | Path] = None) -> str:
    """Prompt text by file name; ``override_dir`` (or ``NOTELOOP_PROMPT_DIR``)
    takes precedence over the packaged copy when it holds the same file."""
    if name not in PROMPT_FILES:
        raise KeyError(name)
    override_dir = override_dir or os.environ.get("NOTELOOP_PROMPT_DIR")
    if override_dir:
        candidate = Path(override_dir) / name
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    return _packaged(name)
