"""Instance generators, the problem file format and the feature registry."""
from .generators import BUNDLED, DomainSpec, generate, DOMAINS
from .problem_io import parse_problem, emit_problem
from .features import FeatureSpec, resolve_features, parse_feature_spec, builtin_hooks

__all__ = [
    "BUNDLED", "DomainSpec", "generate", "DOMAINS", "parse_problem", "emit_problem",
    "FeatureSpec", "resolve_features", "parse_feature_spec", "builtin_hooks",
]
