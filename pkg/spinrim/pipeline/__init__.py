from spinrim.pipeline.config import ConfigError, PipelineConfig, Problem
