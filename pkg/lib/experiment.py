import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy import stats

from lib.adversary import AttackDescriptor, AttackKind, BasisPolicy, detection_miss_probability
from lib.config import ProtocolConfig
from lib.errors import InsufficientSamplesError
from lib.lattice import LatticeWalker
from lib.protocol import (RoundRecord, assemble_keys, detection_rng, run_round, sift,
                          verify_rng, verify_subsequence)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['round_id', 'c-parity', 'valid', 'predicted', 'measured', 'match',
               'attacked_link', 'attack_flags']


@dataclass(frozen=True)
class Rate:
    """count out of samples, with a 3-sigma binomial half-width."""
    count: int
    samples: int

    @property
    def value(self) -> Optional[float]:
        return self.count / self.samples if self.samples else None

    @property
    def sigma3(self) -> Optional[float]:
        if not self.samples:
            return None
        p = self.value
        return 3.0 * math.sqrt(p * (1.0 - p) / self.samples)

    def within(self, expected) -> bool:
        """|value - expected| within 3 sigma of Bernoulli(expected)."""
        if not self.samples:
            return False
        half_width = 3.0 * math.sqrt(expected * (1.0 - expected) / self.samples)
        return abs(self.value - expected) <= half_width

    def to_dict(self):
        return {'count': self.count, 'samples': self.samples,
                'value': self.value, 'sigma3': self.sigma3}


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    critical: float
    p_value: float
    samples: int
    significance: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical

    def to_dict(self):
        return {'statistic': self.statistic, 'dof': self.dof, 'critical': self.critical,
                'p_value': self.p_value, 'samples': self.samples,
                'significance': self.significance, 'passed': self.passed}


def chi_square_uniformity(histogram, significance=0.001) -> ChiSquareResult:
    """Pearson chi-square of a histogram over Z_d against the uniform law."""
    counts = np.asarray(histogram, dtype=float)
    d = counts.size
    total = int(counts.sum())
    if d < 2 or total < 10 * d:
        raise InsufficientSamplesError(f"need at least {10 * d} samples over {d} bins, got {total}")
    statistic, p_value = stats.chisquare(counts)
    critical = float(stats.chi2.ppf(1.0 - significance, d - 1))
    return ChiSquareResult(float(statistic), d - 1, critical, float(p_value), total, significance)


def records_frame(records: List[RoundRecord]) -> pd.DataFrame:
    """One row per round, in round_id order; the per-round CSV schema."""
    rows = []
    for r in records:
        rows.append({
            'round_id': r.round_id,
            'c-parity': r.c_parity,
            'valid': r.valid,
            'predicted': r.predicted,
            'measured': r.outcome,
            'match': r.match,
            'attacked_link': r.attack.link_ids() if r.attack else '',
            'attack_flags': r.attack.flags() if r.attack else '',
        })
    df = pd.DataFrame(rows, columns=CSV_COLUMNS)
    df['predicted'] = df['predicted'].astype('Int64')
    return df.sort_values('round_id').reset_index(drop=True)


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    totals: dict
    correlation: dict
    invalid_outcomes: dict
    attack: Optional[dict]
    keys: dict
    wall_time_sec: float = 0.0

    def canonical_dict(self):
        """Report body that regenerates bit-identically from (config, seed)."""
        return {
            'config': self.config,
            'seed': self.seed,
            'totals': self.totals,
            'correlation': self.correlation,
            'invalid_outcomes': self.invalid_outcomes,
            'attack': self.attack,
            'keys': self.keys,
        }

    def to_dict(self, include_timing=True):
        body = self.canonical_dict()
        if include_timing:
            body['wall_time_sec'] = self.wall_time_sec
        return body

    def to_json(self, include_timing=True):
        return json.dumps(self.to_dict(include_timing), indent=2)


def _run_batch(config, round_ids):
    return [run_round(config, rid) for rid in round_ids]


class ExperimentRunner:
    """
    Runs the rounds of one configuration (serially or on a process pool),
    then sifts, assembles keys, verifies and aggregates in round_id order.
    """

    def __init__(self, config: ProtocolConfig):
        self.config = config.validate()
        self.records: List[RoundRecord] = []
        self.keys = []
        self.verification = None

    def execute_rounds(self) -> List[RoundRecord]:
        cfg = self.config
        round_ids = list(range(cfg.rounds))
        if cfg.workers == 1:
            records = _run_batch(cfg, round_ids)
        else:
            size = max(1, math.ceil(cfg.rounds / (cfg.workers * 4)))
            batches = [round_ids[i:i + size] for i in range(0, cfg.rounds, size)]
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                # map() preserves submission order, so the reduce is round_id-ordered
                records = [r for batch in pool.map(_run_batch, [cfg] * len(batches), batches) for r in batch]
        self.records = records
        return records

    def run(self) -> ExperimentReport:
        cfg = self.config
        logger.info("experiment: d=%d players=%d rounds=%d seed=%d attack=%s workers=%d",
                    cfg.d, cfg.n_players, cfg.rounds, cfg.seed, cfg.attack.kind.value, cfg.workers)
        started = time.perf_counter()

        records = self.execute_rounds()
        df = records_frame(records)
        valid_records, _ = sift(records)

        self.keys = assemble_keys(valid_records, cfg.d)
        self.verification = verify_subsequence(
            self.keys, valid_records, cfg.check_fraction, verify_rng(cfg.seed),
            check_count=cfg.check_count, error_threshold=cfg.error_threshold)

        report = ExperimentReport(
            config=cfg.to_dict(),
            seed=cfg.seed,
            totals=self._totals(df),
            correlation=self._correlation(df),
            invalid_outcomes=self._invalid_outcomes(df),
            attack=self._attack_stats(records) if cfg.attack.active else None,
            keys=self._key_stats(len(valid_records)),
            wall_time_sec=time.perf_counter() - started,
        )
        logger.info("sifted %d of %d rounds; key %d -> %d dits after verification",
                    len(valid_records), cfg.rounds, len(valid_records),
                    len(self.verification.remaining_keys[0]) if self.verification.remaining_keys else 0)
        return report

    def _totals(self, df):
        n = len(df)
        valid = int(df['valid'].sum())
        efficiency = Rate(valid, n)
        bound = 3.0 * math.sqrt(0.25 / n)
        return {
            'rounds': n,
            'valid': valid,
            'efficiency': efficiency.to_dict(),
            'efficiency_interval': [efficiency.value - efficiency.sigma3, efficiency.value + efficiency.sigma3],
            'expected_efficiency': 0.5,
            'efficiency_consistent': abs(efficiency.value - 0.5) <= bound,
        }

    def _correlation(self, df):
        valid = df[df['valid']]
        return {'match_rate': Rate(int(valid['match'].sum()), len(valid)).to_dict()}

    def _invalid_outcomes(self, df):
        outcomes = df.loc[~df['valid'], 'measured']
        histogram = outcomes.value_counts().reindex(range(self.config.d), fill_value=0)
        body = {'histogram': [int(x) for x in histogram.values], 'samples': int(len(outcomes))}
        try:
            body['uniformity'] = chi_square_uniformity(histogram.values, self.config.significance).to_dict()
        except InsufficientSamplesError as exc:
            logger.warning("uniformity test skipped: %s", exc)
            body['uniformity'] = None
        return body

    def _attack_stats(self, records):
        valid = [r for r in records if r.valid and r.attack is not None]
        disturbed = [r for r in valid if r.attack.disturbing]
        clean = [r for r in valid if not r.attack.disturbing]

        def error_rate(rows):
            return Rate(sum(1 for r in rows if not r.match), len(rows)).to_dict()

        per_link = {}
        for r in records:
            if r.attack is None:
                continue
            for link in r.attack.links:
                entry = per_link.setdefault(link.link, {'rounds': 0, 'usable': 0, 'exact': 0, 'disturbing': 0,
                                                        'usable_clean': 0, 'exact_clean': 0})
                exact = int(bool(link.usable and link.exact_recovery))
                entry['rounds'] += 1
                entry['usable'] += int(link.usable)
                entry['disturbing'] += int(link.disturbing)
                entry['exact'] += exact
                # an earlier attacked link that was disturbed changes the state this link sees
                if not any(up.disturbing for up in r.attack.links if up.link < link.link):
                    entry['usable_clean'] += int(link.usable)
                    entry['exact_clean'] += exact

        links = []
        for link_id in sorted(per_link):
            entry = per_link[link_id]
            links.append({
                'link': link_id,
                'usable_fraction': Rate(entry['usable'], entry['rounds']).to_dict(),
                'recovery_rate': Rate(entry['exact'], entry['usable']).to_dict(),
                'recovery_rate_upstream_clean': Rate(entry['exact_clean'], entry['usable_clean']).to_dict(),
                'disturbing_fraction': Rate(entry['disturbing'], entry['rounds']).to_dict(),
            })

        return {
            'kind': self.config.attack.kind.value,
            'error_rate': error_rate(valid),
            'error_rate_disturbed': error_rate(disturbed),
            'error_rate_undisturbed': error_rate(clean),
            'links': links,
            'detection': self._detection_stats(records),
        }

    def _detection_stats(self, records):
        cfg = self.config
        v = self.verification
        key_positions = [r for r in records if r.valid]
        position_error = Rate(sum(1 for r in key_positions if not r.match), len(key_positions))
        misses = detection_trials(self.keys, cfg.detection_checks, cfg.detection_repetitions,
                                  detection_rng(cfg.seed), cfg.error_threshold)
        model = (detection_miss_probability(position_error.value, cfg.detection_checks)
                 if position_error.samples else None)
        return {
            'detected': v.detected,
            'check_error_rate': Rate(v.errors, v.checked).to_dict(),
            'checks': cfg.detection_checks,
            'miss_rate': misses.to_dict(),
            'detection_rate': None if misses.value is None else 1.0 - misses.value,
            'model_miss_probability': model,
        }

    def _key_stats(self, sifted_length):
        v = self.verification
        remaining = len(v.remaining_keys[0]) if v.remaining_keys else 0
        zero_sum = all(
            sum(col) % self.config.d == 0 for col in zip(*(k.symbols for k in self.keys))
        ) if self.keys else True
        return {
            'sifted_length': sifted_length,
            'opened': v.checked,
            'check_errors': v.errors,
            'detected': v.detected,
            'final_length': remaining,
            'zero_sum_all_positions': zero_sum,
        }


def run_experiment(config: ProtocolConfig) -> ExperimentReport:
    return ExperimentRunner(config).run()


def write_round_csv(records, path):
    records_frame(records).to_csv(path, index=False)
    logger.info("wrote %d per-round rows to %s", len(records), path)


def trace_round(config: ProtocolConfig, round_id=0):
    """Everything the `round` subcommand prints: moves, lattice path, ledger, outcome."""
    config.validate()
    record = run_round(config, round_id)
    path = LatticeWalker.path(record.moves, config.d)
    ledger = None
    if record.valid:
        ledger = LatticeWalker.build_ledger(record.announced_c, config.d)
    return record, path, ledger


def attack_sweep(base: ProtocolConfig, kind, dims=(2, 4, 8), policy=None) -> List[ExperimentReport]:
    """Preset attack runs over several dimensions, everything else from `base`."""
    kind = AttackKind(kind)
    attack = base.attack
    if attack.kind is not kind:
        attack = AttackDescriptor(kind=kind, basis_policy=attack.basis_policy).with_default_targets()
    if policy is not None:
        attack = replace(attack, basis_policy=BasisPolicy(policy))
    reports = []
    for d in dims:
        logger.info("attack sweep: %s at d=%d", kind.value, d)
        reports.append(run_experiment(replace(base, d=d, attack=attack)))
    return reports


def detection_trials(keys, checks, repetitions, rng, error_threshold=0.0) -> Rate:
    """
    Open `checks` uniformly chosen key positions `repetitions` times and count
    the openings that miss the attack, i.e. whose error rate stays at or below
    `error_threshold`. Same rule as verify_subsequence.
    """
    if not keys or not repetitions:
        return Rate(0, 0)
    d = keys[0].d
    matrix = np.array([k.symbols for k in keys], dtype=np.int64)
    wrong = matrix.sum(axis=0) % d != 0
    checks = min(int(checks), wrong.size)
    if checks == 0:
        return Rate(repetitions, repetitions)
    missed = 0
    for _ in range(repetitions):
        opened = rng.choice(wrong.size, size=checks, replace=False)
        missed += int(wrong[opened].mean() <= error_threshold)
    return Rate(missed, repetitions)
