"""Versioned prompt registry: the template files under ``templates/`` are the
single source of truth for every client invocation; stages never inline
prompt text."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

_PLACEHOLDER = re.compile(r"<(img1|img2|eval|text|limit)>")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str  # e.g. "pair_check_v1"
    text: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(_PLACEHOLDER.findall(self.text)))

    def render(self, **values: str) -> str:
        out = self.text
        for name in self.placeholders:
            if name not in values:
                raise KeyError(f"template {self.template_id!r} needs placeholder {name!r}")
            out = out.replace(f"<{name}>", str(values[name]))
        leftover = _PLACEHOLDER.search(out)
        if leftover:
            raise ValueError(f"unsubstituted placeholder {leftover.group(0)} in {self.template_id!r}")
        return out


def _load_all() -> dict[str, PromptTemplate]:
    out: dict[str, PromptTemplate] = {}
    root = resources.files(__package__) / "templates"
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".txt"):
            template_id = entry.name[: -len(".txt")]
            out[template_id] = PromptTemplate(template_id=template_id, text=entry.read_text("utf-8"))
    return out


_REGISTRY = _load_all()

PAIR_CHECK = "pair_check_v1"
FINE_PROMPT = "fine_prompt_v1"
FINE_PROMPT_FASHION = "fine_prompt_fashion_v1"
REFINE = "refine_v1"
REFINE_DETAIL = "refine_detail_v1"
COMPRESS = "compress_v1"


def get_template(template_id: str) -> PromptTemplate:
    try:
        return _REGISTRY[template_id]
    except KeyError:
        raise KeyError(f"unknown template {template_id!r}; registered: {sorted(_REGISTRY)}")


def template_ids() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))
