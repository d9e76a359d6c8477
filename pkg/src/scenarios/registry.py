import logging
import os
from typing import Any, Dict, Mapping, Optional

import yaml
from pydantic import ValidationError

from src.core.config import settings
from src.scenarios.types import SCENARIO_IDS, ScenarioConfig, ScenarioError, ScenarioPreset

logger = logging.getLogger(__name__)


class ScenarioRegistry:
    """Scenario defaults, required keys and comparison sets, read from a YAML file."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or settings.SCENARIO_PRESETS_PATH
        self.presets: Dict[str, ScenarioPreset] = {}
        self._load_config()

    def _resolve_path(self, path: str) -> str:
        if os.path.isabs(path):
            return path
        base_dir = os.path.dirname(os.path.abspath(__file__))
        project_root = os.path.abspath(os.path.join(base_dir, "..", ".."))
        return os.path.join(project_root, path)

    def _load_config(self) -> None:
        resolved = self._resolve_path(self.config_path)
        if not os.path.exists(resolved):
            raise ScenarioError(f"Scenario presets not found: {resolved}", operation="registry")
        try:
            with open(resolved, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ScenarioError(f"Failed to load scenario presets: {exc}", operation="registry", cause=exc) from exc

        scenarios = data.get("scenarios", {}) if isinstance(data, dict) else {}
        if not isinstance(scenarios, dict):
            raise ScenarioError("'scenarios' must be a mapping", operation="registry")
        for scenario_id, item in scenarios.items():
            if scenario_id not in SCENARIO_IDS:
                logger.warning("Ignoring unknown scenario preset: %s", scenario_id)
                continue
            try:
                self.presets[scenario_id] = ScenarioPreset.model_validate(item or {})
            except (ValidationError, ValueError) as exc:
                raise ScenarioError(
                    f"Invalid preset for {scenario_id}: {exc}", operation="registry", scenario=scenario_id, cause=exc
                ) from exc
        missing = [s for s in SCENARIO_IDS if s not in self.presets]
        if missing:
            logger.warning("Scenario presets missing for: %s", ", ".join(missing))

    def get(self, scenario_id: str) -> ScenarioPreset:
        preset = self.presets.get(scenario_id)
        if preset is None:
            raise ScenarioError(f"Unknown scenario: {scenario_id}", operation="registry", scenario=scenario_id)
        return preset

    def resolve_params(self, cfg: ScenarioConfig) -> Dict[str, float]:
        """Defaults overlaid with the config's params; unknown keys and missing required keys are errors."""
        preset = self.get(cfg.id)
        unknown = sorted(set(cfg.params) - preset.keys)
        if unknown:
            raise ScenarioError(
                f"Unknown parameter(s) for {cfg.id}: {', '.join(unknown)} (accepted: {', '.join(sorted(preset.keys))})",
                operation="config",
                scenario=cfg.id,
            )
        params = {**preset.defaults, **cfg.params}
        missing = [key for key in preset.required if key not in params]
        if missing:
            raise ScenarioError(f"Missing required parameter(s) for {cfg.id}: {', '.join(missing)}", operation="config", scenario=cfg.id)
        return params

    def make_config(self, scenario_id: str, params: Optional[Mapping[str, Any]] = None, **kwargs: Any) -> ScenarioConfig:
        try:
            return ScenarioConfig(id=scenario_id, params=dict(params or {}), **kwargs)
        except ValidationError as exc:
            raise ScenarioError(f"Invalid scenario config: {exc}", operation="config", scenario=scenario_id, cause=exc) from exc

    def reload(self) -> None:
        self.presets = {}
        self._load_config()


_default_registry: Optional[ScenarioRegistry] = None


def get_registry() -> ScenarioRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = ScenarioRegistry()
    return _default_registry
