from aura.service.config import EngineConfig, load_config
from aura.service.evaluate import EvaluationReport, evaluate

__all__ = ["EngineConfig", "load_config", "EvaluationReport", "evaluate"]
