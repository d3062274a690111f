"""
Experiment Config Files

Line-oriented format:

    # comment
    seed = 3
    stage1.lr = 1e-3
    eval.scenarios = full,missing:3,noise:0.1

Keys are `<section>.<field>` (or a top-level field such as `seed`). Values are
coerced and validated by the ExperimentConfig models; list values are
comma-separated.
"""

from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union
import hashlib
import json
import logging

from pydantic import BaseModel, ValidationError

from bmdsnet.errors import ConfigError, MissingConfigError
from bmdsnet.schemas.experiment import ExperimentConfig

logger = logging.getLogger(__name__)

TRAINING_SECTIONS = ("seed", "data", "model", "losses", "stage1")


def _known_keys() -> Dict[str, Tuple[Optional[str], str]]:
    """dotted key -> (section or None, field)"""
    keys: Dict[str, Tuple[Optional[str], str]] = {}
    for name, info in ExperimentConfig.model_fields.items():
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            for field_name in annotation.model_fields:
                keys[f"{name}.{field_name}"] = (name, field_name)
        else:
            keys[name] = (None, name)
    return keys


def _strip_comment(raw: str) -> str:
    head, _, _ = raw.partition("#")
    return head.strip()


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """
    Parse config text into a validated ExperimentConfig.

    Raises:
        ConfigError: naming the key and line of an unknown key, a duplicate,
            a malformed line, an unparsable value or a violated constraint
    """
    known = _known_keys()
    nested: Dict[str, Any] = {}
    lines: Dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        if key not in known:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in lines:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key=key, line=lineno)
        lines[key] = lineno
        section, field_name = known[key]
        if section is None:
            nested[field_name] = value
        else:
            nested.setdefault(section, {})[field_name] = value

    try:
        return ExperimentConfig.model_validate(nested)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err["loc"] if not isinstance(part, int))
        if key not in known:
            key = _constraint_key(err.get("msg", ""), lines) or key or None
        raise ConfigError(err["msg"], key=key, line=lines.get(key)) from e


def _constraint_key(message: str, lines: Dict[str, int]) -> Optional[str]:
    """Best match for a cross-field constraint: the first set key its message names."""
    for key in sorted(lines, key=lines.get):
        if key in message:
            return key
    return None


def parse_config(path: Union[str, Path, None]) -> ExperimentConfig:
    """
    Read a config file; None yields the defaults.

    Raises:
        ConfigError: if the file is missing or invalid
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise MissingConfigError(f"config file not found: {path}")
    cfg = parse_config_text(path.read_text(), source=str(path))
    logger.debug(f"Loaded config {path} (hash {config_hash(cfg)[:12]})")
    return cfg


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _iter_fields(cfg: ExperimentConfig) -> Iterator[Tuple[str, str, Any]]:
    for name, info in ExperimentConfig.model_fields.items():
        value = getattr(cfg, name)
        if isinstance(value, BaseModel):
            for field_name, sub_info in type(value).model_fields.items():
                yield f"{name}.{field_name}", sub_info.description or "", getattr(value, field_name)
        else:
            yield name, info.description or "", value


def dump_config(cfg: Optional[ExperimentConfig] = None) -> str:
    """`# description` plus `key = value` for every field."""
    cfg = cfg or ExperimentConfig()
    out: List[str] = []
    for key, description, value in _iter_fields(cfg):
        if description:
            out.append(f"# {description}")
        out.append(f"{key} = {format_value(value)}")
    return "\n".join(out) + "\n"


def dump_default_config() -> str:
    return dump_config(ExperimentConfig())


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 over the sections that determine a Stage-1 checkpoint."""
    payload = cfg.model_dump(mode="json", include=set(TRAINING_SECTIONS))
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
