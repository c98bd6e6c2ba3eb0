"""Expression-tag database: load, validate, query, and story-prompt templating.

A database is a directory holding ``tags.jsonl`` (one JSON object per line,
one line per tag) plus optional ``stories/`` and ``images/`` subtrees that
tag records reference by relative path. The database is immutable after
load; all query helpers are read-only and safe for concurrent use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    AliasCollision,
    DuplicateTagName,
    MissingFile,
    SchemaViolation,
    UnsupportedLanguage,
)

ALIAS_LANGUAGES = ("zh", "ja", "ko", "en", "other")
STORY_LANGUAGES = ("zh", "en", "ja", "ko")

LANGUAGE_NAMES = {"zh": "Chinese", "en": "English", "ja": "Japanese", "ko": "Korean"}

# Reference counts of the complete corpus. Loads that do not match merely
# warn, so partial and sample databases stay usable.
FULL_DATASET_COUNTS = {"tags": 135, "aliases": 332, "stories": 2700, "image_refs": 3375}

STORY_PROMPT_TEMPLATE = (
    "Expression Tag: {name}\n"
    "\n"
    "Definition:\n"
    "\n"
    "{definition}\n"
    "\n"
    "Alternative Tags: [{aliases}]\n"
    "\n"
    "Provide a short story background (3 to 5 sentences) that make a character "
    "do this expression. Generate natural stories, without explicitly referring "
    "to the expression. Write the story in {language}, and repeat {n} times. "
    "Only output {n} stories, each starting with a number from 1 to {n}, "
    "followed by a period."
)


@dataclass(frozen=True)
class AliasEntry:
    text: str
    language: str  # one of ALIAS_LANGUAGES


@dataclass(frozen=True)
class StoryEntry:
    language: str  # one of STORY_LANGUAGES
    index: int  # 1..5
    text: str


@dataclass(frozen=True)
class ExampleImageRef:
    character_id: str
    seed: int
    path: str  # relative to the database root


@dataclass(frozen=True)
class ExpressionTag:
    name: str
    definition: str
    aliases: tuple[AliasEntry, ...]
    transformation_free: bool
    stories: tuple[StoryEntry, ...]
    example_images: tuple[ExampleImageRef, ...] = ()


@dataclass(frozen=True)
class DatabaseReport:
    n_tags: int
    n_aliases: int
    n_stories: int
    n_image_refs: int
    warnings: tuple[str, ...] = ()

    def counts(self) -> dict:
        return {
            "tags": self.n_tags,
            "aliases": self.n_aliases,
            "stories": self.n_stories,
            "image_refs": self.n_image_refs,
        }


class ExpressionDatabase:
    """Validated, immutable collection of expression tags."""

    def __init__(self, tags: tuple[ExpressionTag, ...], root: Path | None,
                 warnings: tuple[str, ...] = ()):
        self.tags = tags
        self.root = root
        self._by_name = {t.name: t for t in tags}
        self._order = {t.name: i for i, t in enumerate(tags)}
        alias_index: dict[str, str] = {}
        for tag in tags:
            for alias in tag.aliases:
                owner = alias_index.get(alias.text)
                if owner is not None and owner != tag.name:
                    raise AliasCollision(alias.text, owner, tag.name)
                if alias.text in self._by_name and alias.text != tag.name:
                    raise AliasCollision(alias.text, alias.text, tag.name)
                alias_index[alias.text] = tag.name
        self.alias_index = alias_index
        self._report = DatabaseReport(
            n_tags=len(tags),
            n_aliases=sum(len(t.aliases) for t in tags),
            n_stories=sum(len(t.stories) for t in tags),
            n_image_refs=sum(len(t.example_images) for t in tags),
            warnings=warnings,
        )

    def __len__(self) -> int:
        return len(self.tags)

    def order_of(self, name: str) -> int:
        return self._order[name]

    def report(self) -> DatabaseReport:
        """Counts plus warnings, including the full-dataset count check."""
        warnings = list(self._report.warnings)
        counts = self._report.counts()
        if counts != FULL_DATASET_COUNTS:
            diffs = ", ".join(
                f"{k}={counts[k]} (full dataset: {v})" for k, v in FULL_DATASET_COUNTS.items()
                if counts[k] != v
            )
            warnings.append(f"counts differ from the full dataset: {diffs}")
        return DatabaseReport(
            n_tags=counts["tags"],
            n_aliases=counts["aliases"],
            n_stories=counts["stories"],
            n_image_refs=counts["image_refs"],
            warnings=tuple(warnings),
        )


def get_tag(db: ExpressionDatabase, name: str) -> ExpressionTag | None:
    """Exact, case-sensitive lookup by canonical name. None when absent."""
    return db._by_name.get(name)


def resolve_alias(db: ExpressionDatabase, alias: str) -> ExpressionTag | None:
    """Exact lookup through the alias index; a canonical name resolves to itself."""
    tag = db._by_name.get(alias)
    if tag is not None:
        return tag
    owner = db.alias_index.get(alias)
    return db._by_name.get(owner) if owner is not None else None


def list_transformation_free(db: ExpressionDatabase) -> list[ExpressionTag]:
    """Tags editable without a geometric hint transform, in database order."""
    return [t for t in db.tags if t.transformation_free]


def build_story_generation_prompt(tag: ExpressionTag, language: str, n_stories: int) -> str:
    """Render the story-generation prompt for one tag.

    ``language`` is a story language code (zh/en/ja/ko); ``n_stories`` is the
    number of stories the model is asked to produce in one reply.
    """
    if language not in LANGUAGE_NAMES:
        raise UnsupportedLanguage(f"no story-prompt support for language {language!r}")
    if n_stories < 1:
        raise ValueError("n_stories must be >= 1")
    aliases = ", ".join(f'"{a.text}"' for a in tag.aliases)
    return STORY_PROMPT_TEMPLATE.format(
        name=tag.name,
        definition=tag.definition,
        aliases=aliases,
        language=LANGUAGE_NAMES[language],
        n=n_stories,
    )


# --- loading ---

def _parse_alias(raw, record: str) -> AliasEntry:
    if not isinstance(raw, dict):
        raise SchemaViolation("aliases", record, "alias entries must be objects")
    text = raw.get("text")
    language = raw.get("language", "other")
    if not isinstance(text, str) or not text:
        raise SchemaViolation("aliases.text", record, "alias text must be a non-empty string")
    if language not in ALIAS_LANGUAGES:
        # Unknown scripts are informational, not behavioral.
        language = "other"
    return AliasEntry(text=text, language=language)


def _parse_story(raw, record: str) -> StoryEntry:
    if not isinstance(raw, dict):
        raise SchemaViolation("stories", record, "story entries must be objects")
    language = raw.get("language")
    index = raw.get("index")
    text = raw.get("text")
    if language not in STORY_LANGUAGES:
        raise SchemaViolation("stories.language", record, f"unknown language {language!r}")
    if not isinstance(index, int) or not (1 <= index <= 5):
        raise SchemaViolation("stories.index", record, "index must be an integer in [1, 5]")
    if not isinstance(text, str) or not text:
        raise SchemaViolation("stories.text", record, "story text must be non-empty")
    return StoryEntry(language=language, index=index, text=text)


def _parse_image_ref(raw, record: str) -> ExampleImageRef:
    if not isinstance(raw, dict):
        raise SchemaViolation("example_images", record, "image refs must be objects")
    character_id = raw.get("character_id")
    seed = raw.get("seed")
    path = raw.get("path")
    if not isinstance(character_id, str) or not character_id:
        raise SchemaViolation("example_images.character_id", record, "must be a non-empty string")
    if not isinstance(seed, int):
        raise SchemaViolation("example_images.seed", record, "must be an integer")
    if not isinstance(path, str) or not path:
        raise SchemaViolation("example_images.path", record, "must be a non-empty string")
    return ExampleImageRef(character_id=character_id, seed=seed, path=path)


def _load_stories_file(root: Path, rel: str, record: str) -> tuple[StoryEntry, ...]:
    stories_path = root / rel
    if not stories_path.is_file():
        raise MissingFile(f"stories file {rel!r} referenced by {record!r} not found")
    try:
        raw = json.loads(stories_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaViolation("stories", record, f"invalid JSON in {rel!r}: {e}") from e
    if not isinstance(raw, list):
        raise SchemaViolation("stories", record, f"{rel!r} must contain a JSON array")
    return tuple(_parse_story(s, record) for s in raw)


def _parse_tag_line(obj: dict, record: str, root: Path) -> ExpressionTag:
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaViolation("name", record, "tag name must be a non-empty string")
    definition = obj.get("definition")
    if not isinstance(definition, str) or not definition:
        raise SchemaViolation("definition", record, "definition must be a non-empty string")
    transformation_free = obj.get("transformation_free")
    if not isinstance(transformation_free, bool):
        raise SchemaViolation("transformation_free", record, "must be a boolean")

    aliases = tuple(_parse_alias(a, record) for a in obj.get("aliases", []))
    for a in aliases:
        if a.text == name:
            raise SchemaViolation("aliases", record, "alias duplicates the canonical name")
    seen = set()
    for a in aliases:
        if a.text in seen:
            raise SchemaViolation("aliases", record, f"alias {a.text!r} listed twice")
        seen.add(a.text)

    raw_stories = obj.get("stories", [])
    if isinstance(raw_stories, str):
        stories = _load_stories_file(root, raw_stories, record)
    elif isinstance(raw_stories, list):
        stories = tuple(_parse_story(s, record) for s in raw_stories)
    else:
        raise SchemaViolation("stories", record, "must be an array or a relative file path")

    images = tuple(_parse_image_ref(r, record) for r in obj.get("example_images", []))
    return ExpressionTag(
        name=name,
        definition=definition,
        aliases=aliases,
        transformation_free=transformation_free,
        stories=stories,
        example_images=images,
    )


def load_database(path: str | Path) -> ExpressionDatabase:
    """Load and validate a tag database from a directory or a tags.jsonl file."""
    path = Path(path)
    if path.is_dir():
        root = path
        tags_file = path / "tags.jsonl"
    else:
        root = path.parent
        tags_file = path
    if not tags_file.is_file():
        raise MissingFile(f"no tags file at {tags_file}")

    tags: list[ExpressionTag] = []
    names: set[str] = set()
    warnings: list[str] = []
    with open(tags_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            record = f"{tags_file.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaViolation("<line>", record, f"invalid JSON: {e}") from e
            if not isinstance(obj, dict):
                raise SchemaViolation("<line>", record, "each line must be a JSON object")
            tag = _parse_tag_line(obj, record, root)
            if tag.name in names:
                raise DuplicateTagName(tag.name)
            names.add(tag.name)
            tags.append(tag)

    # Image paths must stay under the root; existence is only checked when the
    # image tree has actually been shipped alongside the tags file.
    resolved_root = root.resolve()
    images_present = (root / "images").is_dir()
    for tag in tags:
        for ref in tag.example_images:
            target = (root / ref.path).resolve()
            if not target.is_relative_to(resolved_root):
                raise SchemaViolation(
                    "example_images.path", tag.name, f"{ref.path!r} escapes the database root"
                )
            if images_present and not target.is_file():
                warnings.append(f"example image {ref.path!r} of tag {tag.name!r} is missing")

    return ExpressionDatabase(tuple(tags), root=root, warnings=tuple(warnings))


def save_database(db: ExpressionDatabase, path: str | Path) -> Path:
    """Write the database back out as a tags.jsonl directory (stories inlined)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tags_file = path / "tags.jsonl"
    with open(tags_file, "w", encoding="utf-8") as fh:
        for tag in db.tags:
            obj = {
                "name": tag.name,
                "definition": tag.definition,
                "aliases": [{"text": a.text, "language": a.language} for a in tag.aliases],
                "transformation_free": tag.transformation_free,
                "stories": [
                    {"language": s.language, "index": s.index, "text": s.text}
                    for s in tag.stories
                ],
                "example_images": [
                    {"character_id": r.character_id, "seed": r.seed, "path": r.path}
                    for r in tag.example_images
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return tags_file


def sample_db_path() -> Path:
    """Directory of the small database shipped with the package."""
    return Path(__file__).parent / "data" / "sample_db"
