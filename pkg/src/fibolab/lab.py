"""Shared state for one experiment run: slope, orbit cache, conjugacy parameters."""
from __future__ import annotations

import logging
from functools import cached_property

from .config import ExperimentConfig
from .conjugacy import ConjugacyParams
from .kneading import SolveReport, TentParams, fib_cut_times, golden_lambda, solve_fibonacci_report
from .lyapunov import Cocycle
from .postcritical import OrbitCache, orbit_points

log = logging.getLogger(__name__)


def required_cache_index(cfg: ExperimentConfig) -> int:
    """Largest orbit index any subcommand reads: far end of J_{k_max+2}."""
    s = fib_cut_times(cfg.k_max + 6)
    K = cfg.k_max + 2
    return max(s[K + 1] + s[K - 1], s[K] + 2, cfg.depth + 2)


class Lab:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.s = fib_cut_times(cfg.k_max + 12)
        self.solve_report: SolveReport | None = None

    @cached_property
    def params(self) -> TentParams:
        if self.cfg.lambda_source == "golden":
            log.info("loading stored slope")
            return golden_lambda()
        log.info("solving slope at depth %d (%s)", self.cfg.prefix_depth_k, self.cfg.solve_method)
        self.solve_report = solve_fibonacci_report(
            self.cfg.prefix_depth_k, max_precision=self.cfg.max_precision, method=self.cfg.solve_method
        )
        return self.solve_report.params

    @cached_property
    def cache(self) -> OrbitCache:
        n = required_cache_index(self.cfg)
        log.info("orbit cache to index %d", n)
        return orbit_points(self.params, n, self.cfg.target_bits, max_precision=4 * self.cfg.max_precision)

    @cached_property
    def conj(self) -> ConjugacyParams:
        return ConjugacyParams.of(self.cfg.a_plus, self.cfg.a_minus)

    @cached_property
    def cocycle(self) -> Cocycle:
        return Cocycle(self.conj, self.cache)

    def lambda_digits(self, n: int = 40) -> str:
        return self.params.lambda_.mid_str(n)

    def metadata(self) -> dict:
        return {
            "config_hash": self.cfg.hash(),
            "lambda_digits": self.lambda_digits(),
            "lambda_radius": self.params.lambda_.rad_str(),
            "lambda_prefix_depth": self.params.prefix_depth,
            "a_plus": self.cfg.a_plus,
            "a_minus": self.cfg.a_minus,
        }
