"""Application configuration.

One TOML file drives every command: per-role LLM endpoints (or scripted
mocks), classifier mode, retrieval paths and parameters, pipeline depths,
and evaluation settings. ``${VAR}`` references stay raw inside AppConfig and
resolve from the environment only when clients are built, so a dumped
config never leaks secrets and reloads to an identical value.
"""

from __future__ import annotations

import json
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .classify import ClassifierConfig, build_classifier
from .core import ConfigError
from .llm import (
    ANNOTATION_TEMPERATURE,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    DEFAULT_TOP_P,
    EndpointConfig,
    HttpChatClient,
    LlmRole,
    MockChatClient,
    RoleDefaults,
)
from .pipeline import Pipeline, PipelineConfig
from .retrieve import Bm25Params, CorpusIndex, LexicalReranker, RemoteReranker, build_index

LLM_ROLES = ("generator", "decomposer", "scorer", "annotator", "reference_writer")

DEFAULTS: dict = {
    "logging": {"level": "info"},
    "llm": {},
    "classifier": {"mode": "heuristic"},
    "retrieval": {"k": 5, "k1": 0.9, "b": 0.4, "reranker": "lexical"},
    "pipeline": {"k_final": 5, "k_per_keyword": 5, "k_per_subquery": 5},
    "eval": {"scorer_role": "scorer"},
    "dataset": {"include_rewrite": True},
}

_ENV_RX = re.compile(r"\$\{(\w+)\}")


def resolve_env(value: str) -> str:
    """Expand ${NAME} from the environment; unset names are a ConfigError."""

    def repl(m: re.Match) -> str:
        name = m.group(1)
        if name not in os.environ:
            raise ConfigError(f"environment variable {name} is not set")
        return os.environ[name]

    return _ENV_RX.sub(repl, value)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class AppConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "AppConfig":
        return cls(data=_deep_merge(DEFAULTS, raw))

    @classmethod
    def load(cls, path: str | Path) -> "AppConfig":
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"config {path} is not valid TOML: {err}") from err
        return cls.from_dict(raw)

    def dump_toml(self) -> str:
        return dump_toml(self.data)

    # -- sections ------------------------------------------------------------

    def section(self, name: str) -> dict:
        value = self.data.get(name, {})
        if not isinstance(value, dict):
            raise ConfigError(f"[{name}] must be a table")
        return value

    def role_configs(self, role: str) -> list[dict]:
        """The [llm.<role>] table(s); a list allows several writer models."""
        entry = self.section("llm").get(role)
        if entry is None:
            raise ConfigError(f"no [llm.{role}] section configured")
        if isinstance(entry, dict):
            return [entry]
        if isinstance(entry, list) and all(isinstance(e, dict) for e in entry):
            return list(entry)
        raise ConfigError(f"[llm.{role}] must be a table or an array of tables")

    def has_role(self, role: str) -> bool:
        return role in self.section("llm")

    # -- builders ------------------------------------------------------------

    def build_role(self, role: str) -> LlmRole:
        return _build_role(self.role_configs(role)[0], role)

    def build_roles(self, role: str) -> list[LlmRole]:
        return [_build_role(cfg, role) for cfg in self.role_configs(role)]

    def build_classifier(self):
        cfg = self.section("classifier")
        mode = cfg.get("mode", "heuristic")
        endpoint = None
        if mode == "remote":
            if "base_url" not in cfg:
                raise ConfigError("[classifier] remote mode requires base_url")
            endpoint = EndpointConfig(
                base_url=resolve_env(cfg["base_url"]),
                timeout=float(cfg.get("timeout", 30.0)),
            )
        return build_classifier(
            ClassifierConfig(mode=mode, endpoint=endpoint, rules_file=cfg.get("rules_file"))
        )

    def build_reranker(self):
        cfg = self.section("retrieval")
        kind = cfg.get("reranker", "lexical")
        if kind == "lexical":
            return LexicalReranker()
        if kind == "remote":
            if "reranker_url" not in cfg:
                raise ConfigError("[retrieval] remote reranker requires reranker_url")
            return RemoteReranker(
                EndpointConfig(
                    base_url=resolve_env(cfg["reranker_url"]),
                    timeout=float(cfg.get("timeout", 30.0)),
                )
            )
        raise ConfigError(f"unknown reranker kind: {kind!r}")

    def bm25_params(self) -> Bm25Params:
        cfg = self.section("retrieval")
        return Bm25Params(k1=float(cfg.get("k1", 0.9)), b=float(cfg.get("b", 0.4)))

    def load_index(self) -> CorpusIndex:
        """Load the prebuilt index, or build it from the corpus file."""
        cfg = self.section("retrieval")
        index_dir = cfg.get("index_dir")
        if index_dir and Path(index_dir).joinpath("manifest.json").exists():
            return CorpusIndex.load(index_dir)
        corpus = cfg.get("corpus")
        if corpus:
            return build_index(corpus, self.bm25_params(), out_dir=index_dir)
        raise ConfigError("[retrieval] needs index_dir (built) or corpus (to build)")

    def pipeline_config(self) -> PipelineConfig:
        cfg = self.section("pipeline")
        return PipelineConfig(
            k_final=int(cfg.get("k_final", 5)),
            k_per_keyword=int(cfg.get("k_per_keyword", 5)),
            k_per_subquery=int(cfg.get("k_per_subquery", 5)),
            prompt_dir=cfg.get("prompt_dir"),
        )

    def build_pipeline(self, need_index: bool = True) -> Pipeline:
        index = self.load_index() if need_index else CorpusIndex(params=self.bm25_params())
        return Pipeline(
            index=index,
            classifier=self.build_classifier(),
            decomposer_role=self.build_role("decomposer") if self.has_role("decomposer") else self.build_role("generator"),
            generator_role=self.build_role("generator"),
            reranker=self.build_reranker(),
            config=self.pipeline_config(),
        )

    def scorer_matches_generator(self) -> bool:
        """Self-evaluation check: scorer and generator resolve to the same endpoint+model."""
        try:
            scorer = self.role_configs("scorer")[0]
            generator = self.role_configs("generator")[0]
        except ConfigError:
            return False
        keys = ("mode", "model", "base_url")
        return all(scorer.get(k) == generator.get(k) for k in keys)


def _build_role(cfg: dict, role: str) -> LlmRole:
    mode = cfg.get("mode", "http")
    temperature_default = ANNOTATION_TEMPERATURE if role == "annotator" else DEFAULT_TEMPERATURE
    defaults = RoleDefaults(
        model=str(cfg.get("model", "mock")),
        temperature=float(cfg.get("temperature", temperature_default)),
        top_p=float(cfg.get("top_p", DEFAULT_TOP_P)),
        max_tokens=int(cfg.get("max_tokens", DEFAULT_MAX_TOKENS)),
        seed=cfg.get("seed"),
        system_prompt=cfg.get("system_prompt"),
    )
    if mode == "mock":
        script_cfg = cfg.get("script")
        if not script_cfg:
            raise ConfigError(f"[llm.{role}] mock mode requires a non-empty script")
        script = []
        for rule in script_cfg:
            if "match" not in rule or "response" not in rule:
                raise ConfigError(f"[llm.{role}] script rules need match and response")
            response = rule["response"]
            script.append((rule["match"], list(response) if isinstance(response, list) else response))
        client = MockChatClient(
            script,
            max_retries=int(cfg.get("max_retries", 0)),
            max_concurrent=int(cfg.get("max_concurrent_requests", 64)),
        )
        return LlmRole(client=client, defaults=defaults)
    if mode == "http":
        if "model" not in cfg:
            raise ConfigError(f"[llm.{role}] http mode requires a model")
        if "base_url" not in cfg:
            raise ConfigError(f"[llm.{role}] http mode requires a base_url")
        endpoint = EndpointConfig(
            base_url=resolve_env(str(cfg["base_url"])),
            api_key=resolve_env(str(cfg["api_key"])) if cfg.get("api_key") else None,
            timeout=float(cfg.get("timeout", 60.0)),
            max_retries=int(cfg.get("max_retries", 3)),
            max_concurrent_requests=int(cfg.get("max_concurrent_requests", 4)),
        )
        return LlmRole(client=HttpChatClient(endpoint), defaults=defaults)
    raise ConfigError(f"[llm.{role}] has unknown mode {mode!r}")


def _fmt_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(_fmt_scalar(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k} = {_fmt_scalar(v)}" for k, v in value.items()) + "}"
    raise ConfigError(f"cannot serialize config value of type {type(value).__name__}")


def _is_table_array(value) -> bool:
    return isinstance(value, list) and bool(value) and all(isinstance(v, dict) for v in value)


def dump_toml(data: dict) -> str:
    """Serialize the config dict back to TOML (scalars, tables, table arrays)."""
    out: list[str] = []

    def emit(path: str, table: dict) -> None:
        scalars = [(k, v) for k, v in table.items() if not isinstance(v, dict) and not _is_table_array(v)]
        subtables = [(k, v) for k, v in table.items() if isinstance(v, dict)]
        arrays = [(k, v) for k, v in table.items() if _is_table_array(v)]
        if scalars or not (subtables or arrays):
            out.append(f"[{path}]")
            out.extend(f"{k} = {_fmt_scalar(v)}" for k, v in scalars)
            out.append("")
        for key, sub in subtables:
            emit(f"{path}.{key}", sub)
        for key, items in arrays:
            for item in items:
                out.append(f"[[{path}.{key}]]")
                out.extend(f"{k} = {_fmt_scalar(v)}" for k, v in item.items())
                out.append("")

    top_scalars = [(k, v) for k, v in data.items() if not isinstance(v, dict)]
    out.extend(f"{k} = {_fmt_scalar(v)}" for k, v in top_scalars)
    if top_scalars:
        out.append("")
    for key, value in data.items():
        if isinstance(value, dict):
            emit(key, value)
    return "\n".join(out).rstrip() + "\n"
