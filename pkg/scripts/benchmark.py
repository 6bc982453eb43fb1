#!/usr/bin/env python3
"""
Benchmark script for the antifragile RL kernels.
Times the flow field, the 1-D Wasserstein distance, the discounted
Thompson update and the observation attacks.
"""

import time
import argparse
import statistics
from pathlib import Path
from typing import Any, Callable, Dict, List
import logging
import json
import csv

import numpy as np

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class KernelBenchmark:
    """Benchmark suite for the numerical kernels."""

    def __init__(self, output_dir: str = './benchmarks', repeats: int = 5, seed: int = 0):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.repeats = repeats
        self.rng = np.random.default_rng(seed)
        self.results: List[Dict[str, Any]] = []

    def _time(self, name: str, size: int, fn: Callable[[], Any]) -> Dict[str, Any]:
        """Run ``fn`` ``repeats`` times and record wall-clock statistics."""
        timings = []
        for _ in range(self.repeats):
            start = time.perf_counter()
            fn()
            timings.append(time.perf_counter() - start)
        row = {
            'kernel': name,
            'size': size,
            'mean_s': statistics.mean(timings),
            'stdev_s': statistics.stdev(timings) if len(timings) > 1 else 0.0,
            'min_s': min(timings),
            'per_item_us': 1e6 * statistics.mean(timings) / size,
        }
        self.results.append(row)
        logger.info(f"{name:<24} n={size:<7} {row['mean_s'] * 1e3:9.3f} ms")
        return row

    def benchmark_flow_field(self, steps: int = 500) -> None:
        from antifragile_rl.environment import load_scenario
        from antifragile_rl.flowfield import FlowField, ObstacleKinematics

        scenario = load_scenario('testing')
        obstacles = [ObstacleKinematics(o.shape) for o in scenario.obstacles]
        field = FlowField(scenario.episode.goal, obstacles, scenario.ifds)
        self._time('flow_field.trace', steps, lambda: field.trace(scenario.episode.start_mean, steps))

    def benchmark_wasserstein(self, sizes=(512, 4096, 32768)) -> None:
        from antifragile_rl.shift import wasserstein1

        for n in sizes:
            a = self.rng.normal(size=n)
            b = self.rng.normal(0.5, 1.2, size=n)
            self._time('wasserstein1', n, lambda: wasserstein1(a, b))

    def benchmark_dts(self, updates: int = 4000, n_arms: int = 5) -> None:
        from antifragile_rl.bandit import DiscountedThompsonSampler

        def run():
            sampler = DiscountedThompsonSampler(n_arms)
            rng = np.random.default_rng(1)
            for _ in range(updates):
                arm = sampler.select(rng)
                sampler.update(arm, 0.6, rng)

        self._time('dts.select_update', updates, run)

    def benchmark_attacks(self, n_obs: int = 64) -> None:
        from antifragile_rl.attacks import AttackConfig, ObservationAttacker
        from antifragile_rl.environment import ACTION_HIGH, ACTION_LOW, OBS_DIM
        from antifragile_rl.robust_rl import RobustPolicyPair

        pair = RobustPolicyPair(OBS_DIM, 3, ACTION_LOW, ACTION_HIGH, rng=np.random.default_rng(2))
        observations = self.rng.normal(size=(n_obs, OBS_DIM))
        for kind in ('fgsm', 'pgd', 'fw'):
            attacker = ObservationAttacker(AttackConfig(kind=kind, epsilon=1.0, n_steps=20),
                                           pair.attack_loss_gradient)
            rng = np.random.default_rng(3)
            self._time(f'attack.{kind}', n_obs,
                       lambda: [attacker.perturb(obs, rng) for obs in observations])

    def run_all(self) -> List[Dict[str, Any]]:
        self.benchmark_flow_field()
        self.benchmark_wasserstein()
        self.benchmark_dts()
        self.benchmark_attacks()
        return self.results

    def save_results(self) -> None:
        json_path = self.output_dir / 'benchmark.json'
        with open(json_path, 'w', encoding='utf-8') as f:
            json.dump(self.results, f, indent=2)

        csv_path = self.output_dir / 'benchmark.csv'
        with open(csv_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(self.results[0]))
            writer.writeheader()
            writer.writerows(self.results)
        logger.info(f"Results saved to {json_path} and {csv_path}")


def main():
    parser = argparse.ArgumentParser(description='Benchmark the antifragile RL kernels')
    parser.add_argument('--output-dir', default='./benchmarks', help='Directory for results')
    parser.add_argument('--repeats', type=int, default=5, help='Timed repetitions per kernel')
    parser.add_argument('--seed', type=int, default=0, help='Seed for the synthetic inputs')
    args = parser.parse_args()

    benchmark = KernelBenchmark(args.output_dir, args.repeats, args.seed)
    benchmark.run_all()
    benchmark.save_results()


if __name__ == '__main__':
    main()
